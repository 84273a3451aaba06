#include "noisesim/error.hpp"
#include "noisesim/eval_metrics.hpp"
#include "noisesim/rng.hpp"
#include "noisesim/synth_gen.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>

using namespace noisesim;

namespace {

const std::vector<double>& feature(const FeatureTable& t, Feature f) { return t[static_cast<std::size_t>(f)]; }

std::vector<Scenario> synthetic_split(int n, std::uint64_t seed) {
    const auto map = build_freeway_map(3, 1000, 3.6, "freeway-3l");
    std::vector<Scenario> out;
    for (int i = 0; i < n; ++i) {
        SynthConfig c;
        c.seed = seed + static_cast<std::uint64_t>(i);
        c.wave_mode = i % 2 == 1;
        auto s = generate_scenario(c, map, "e" + std::to_string(i));
        s.split = SplitTag::test;
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace

TEST(HistogramLikelihood, HandComputedValues) {
    const HistogramSpec spec{0.0, 1.0, 2};
    const std::vector<double> sim(10, 0.1);
    const std::vector<double> gt0(5, 0.2);
    const std::vector<double> gt1(5, 0.9);
    EXPECT_NEAR(histogram_likelihood(sim, gt0, spec, 0.1), 10.1 / 10.2, 1e-12);
    EXPECT_NEAR(histogram_likelihood(sim, gt0, spec, 0.1), 0.990196, 1e-6);
    EXPECT_NEAR(histogram_likelihood(sim, gt1, spec, 0.1), 0.009804, 1e-6);
}

TEST(HistogramLikelihood, UniformApproachesOneOverB) {
    Rng rng(4);
    std::vector<double> sim, gt;
    for (int i = 0; i < 20000; ++i) {
        sim.push_back(rng.uniform());
        gt.push_back(rng.uniform());
    }
    EXPECT_NEAR(histogram_likelihood(sim, gt, {0.0, 1.0, 2}, 0.1), 0.5, 0.02);
}

TEST(HistogramLikelihood, ClampsAndPermutationInvariant) {
    const HistogramSpec spec{0.0, 10.0, 5};
    EXPECT_EQ(spec.bin(-3.0), 0);
    EXPECT_EQ(spec.bin(10.0), 4);
    EXPECT_EQ(spec.bin(99.0), 4);
    EXPECT_EQ(spec.bin(4.0), 2);
    std::vector<double> sim{1, 3, 3, 7, 9, 9, 9, -1}, gt{2, 8, 50};
    const double a = histogram_likelihood(sim, gt, spec);
    std::reverse(sim.begin(), sim.end());
    std::reverse(gt.begin(), gt.end());
    EXPECT_DOUBLE_EQ(histogram_likelihood(sim, gt, spec), a);
    EXPECT_GT(a, 0.0);
    EXPECT_LE(a, 1.0);
}

TEST(HistogramLikelihood, NoGroundTruth) {
    const std::vector<double> sim{1.0};
    try {
        histogram_likelihood(sim, std::span<const double>{}, {0, 1, 2});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), "no-ground-truth");
    }
}

TEST(Features, ConstantVelocityTrack) {
    const auto map = fixtures::two_lane_map();
    const auto s = fixtures::make_scenario("cv", {fixtures::straight_track(1, 100, 0, 20)}, map);
    const auto f = component_features(s, map);
    ASSERT_EQ(feature(f, Feature::speed).size(), 80u);
    for (double v : feature(f, Feature::speed)) EXPECT_NEAR(v, 20.0, 1e-9);
    for (double v : feature(f, Feature::accel)) EXPECT_NEAR(v, 0.0, 1e-9);
    for (double v : feature(f, Feature::angular_speed)) EXPECT_NEAR(v, 0.0, 1e-12);
    for (double v : feature(f, Feature::offroad)) EXPECT_EQ(v, 0.0);
    for (double v : feature(f, Feature::edge_distance)) EXPECT_NEAR(v, 1.8, 1e-9);
    EXPECT_TRUE(feature(f, Feature::nearest_distance).empty());
}

TEST(Features, NeighborsAndOffroad) {
    const auto map = fixtures::two_lane_map();
    const auto s = fixtures::make_scenario(
        "pair", {fixtures::straight_track(1, 100, 0, 20), fixtures::straight_track(2, 105, 0, 20), fixtures::straight_track(3, 400, 9, 20)},
        map);
    const auto f = component_features(s, map);
    const auto& near = feature(f, Feature::nearest_distance);
    ASSERT_EQ(near.size(), 240u);
    for (std::size_t i = 0; i < 80; ++i) EXPECT_NEAR(near[i], 5.0, 1e-9);
    const auto& coll = feature(f, Feature::collision);
    for (std::size_t i = 0; i < 160; ++i) EXPECT_EQ(coll[i], 0.0);
    const auto& off = feature(f, Feature::offroad);
    for (std::size_t i = 160; i < 240; ++i) EXPECT_EQ(off[i], 1.0);
}

TEST(Features, InvalidFramesExcluded) {
    const auto map = fixtures::two_lane_map();
    auto t = fixtures::straight_track(1, 100, 0, 20);
    for (int f = 30; f < 40; ++f) t.states[static_cast<std::size_t>(f)].valid = false;
    const auto s = fixtures::make_scenario("gap", {t}, map);
    const auto f = component_features(s, map);
    EXPECT_EQ(feature(f, Feature::speed).size(), 70u);
    EXPECT_EQ(feature(f, Feature::offroad).size(), 70u);
}

TEST(MinAde, Examples) {
    const auto map = fixtures::two_lane_map();
    const auto gt = fixtures::make_scenario("g", {fixtures::straight_track(1, 100, 0, 20)}, map);
    const std::vector<Scenario> same{gt};
    EXPECT_EQ(min_ade(same, gt), 0.0);

    auto shifted = gt;
    for (auto& st : shifted.tracks[0].states) st.y += 1.0;
    const std::vector<Scenario> one{shifted};
    EXPECT_NEAR(min_ade(one, gt), 1.0, 1e-12);

    auto far = gt;
    for (auto& st : far.tracks[0].states) st.y += 2.0;
    auto close = gt;
    for (auto& st : close.tracks[0].states) st.x += 0.5;
    const std::vector<Scenario> two{far, close};
    EXPECT_NEAR(min_ade(two, gt), 0.5, 1e-12);
    // nested rollouts never raise the minimum
    const std::vector<Scenario> three{far, close, shifted};
    EXPECT_LE(min_ade(three, gt), min_ade(two, gt));
}

TEST(MinAde, OrphanIdsIgnoredAndNoOverlap) {
    const auto map = fixtures::two_lane_map();
    const auto gt = fixtures::make_scenario("g", {fixtures::straight_track(1, 100, 0, 20), fixtures::straight_track(7, 300, 0, 20)}, map);
    auto sim = fixtures::make_scenario("g", {fixtures::straight_track(1, 100, 0, 20), fixtures::straight_track(9, 0, 0, 0)}, map);
    const std::vector<Scenario> one{sim};
    EXPECT_EQ(min_ade(one, gt), 0.0);

    const auto lone = fixtures::make_scenario("g", {fixtures::straight_track(42, 0, 0, 1)}, map);
    const std::vector<Scenario> none{lone};
    try {
        min_ade(none, gt);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), "no-overlap");
    }
}

TEST(Evaluate, ReplayScoresZeroAndDominatesConstantSpeed) {
    const auto split = synthetic_split(6, 300);
    const auto map = build_freeway_map(3, 1000, 3.6, "freeway-3l");
    std::vector<EvalItem> items;
    for (const auto& s : split) items.push_back({&s, &map});
    MetricsConfig cfg;
    cfg.k_rollouts = 2;
    const auto replay = evaluate(items, ReplayPolicy{}, cfg, 1);
    const auto cv = evaluate(items, ConstantSpeedPolicy{}, cfg, 1);
    EXPECT_EQ(replay.aggregate.min_ade, 0.0);
    EXPECT_EQ(replay.scenarios, 6u);
    EXPECT_GE(replay.aggregate.kinematic, cv.aggregate.kinematic);
    EXPECT_GE(replay.aggregate.interactive, cv.aggregate.interactive);
    EXPECT_GE(replay.aggregate.map_based, cv.aggregate.map_based);
    EXPECT_GE(replay.aggregate.realism, cv.aggregate.realism);
    for (const auto* r : {&replay, &cv}) {
        for (double v : {r->aggregate.realism, r->aggregate.kinematic, r->aggregate.interactive, r->aggregate.map_based}) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
        EXPECT_NEAR(r->aggregate.realism, (r->aggregate.kinematic + r->aggregate.interactive + r->aggregate.map_based) / 3, 1e-12);
    }
}

TEST(Evaluate, ConstantSpeedExactOnConstantVelocityCorpus) {
    const auto map = fixtures::two_lane_map();
    const auto s = fixtures::make_scenario("cv", {fixtures::straight_track(1, 100, 0, 20), fixtures::straight_track(2, 300, 3.6, 27)}, map);
    const std::vector<EvalItem> items{{&s, &map}};
    MetricsConfig cfg;
    cfg.k_rollouts = 1;
    EXPECT_NEAR(evaluate(items, ConstantSpeedPolicy{}, cfg, 0).aggregate.min_ade, 0.0, 1e-9);
}

TEST(Evaluate, DeterministicAcrossRunsAndJobs) {
    const auto split = synthetic_split(4, 500);
    const auto map = build_freeway_map(3, 1000, 3.6, "freeway-3l");
    std::vector<EvalItem> items;
    for (const auto& s : split) items.push_back({&s, &map});
    MetricsConfig cfg;
    cfg.k_rollouts = 2;
    const auto a = to_json(evaluate(items, IdmPolicy{}, cfg, 9, 1)).dump();
    const auto b = to_json(evaluate(items, IdmPolicy{}, cfg, 9, 1)).dump();
    const auto c = to_json(evaluate(items, IdmPolicy{}, cfg, 9, 3)).dump();
    EXPECT_EQ(a, b);
    EXPECT_EQ(a, c);
}

TEST(Evaluate, ErrorsCarryScenarioId) {
    const auto map = fixtures::two_lane_map();
    auto t = fixtures::straight_track(1, 100, 0, 20);
    for (int f = 0; f < kHistoryFrames; ++f) t.states[static_cast<std::size_t>(f)].valid = false;
    const auto s = fixtures::make_scenario("broken-7", {t}, map);
    const std::vector<EvalItem> items{{&s, &map}};
    try {
        evaluate(items, ConstantSpeedPolicy{}, MetricsConfig{}, 0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), "missing-history");
        EXPECT_NE(std::string(e.what()).find("broken-7"), std::string::npos);
    }
}

TEST(Report, JsonRoundTrip) {
    MetricsReport r;
    r.policy = "idm";
    r.scenarios = 1;
    r.aggregate = {0.5, 0.6, 0.4, 0.5, 3.25, {{"speed", 0.7}}};
    r.per_scenario.push_back({"s000001", r.aggregate});
    const auto j = to_json(r);
    const auto back = metrics_report_from_json(j);
    EXPECT_EQ(to_json(back).dump(), j.dump());
    EXPECT_EQ(back.aggregate.min_ade, 3.25);
    MetricsConfig c;
    c.histograms[0].bins = 1;
    EXPECT_FALSE(c.valid());
    EXPECT_TRUE(MetricsConfig{}.valid());
}
