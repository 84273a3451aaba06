#include "noisesim/error.hpp"
#include "noisesim/synth_gen.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace noisesim;

namespace {

std::vector<double> ys_of(const RoadMap& map, PolylineKind kind) {
    std::vector<double> ys;
    for (const auto* p : map.of_kind(kind)) ys.push_back(p->points.front().y());
    std::sort(ys.begin(), ys.end());
    return ys;
}

double speed_at(const AgentTrack& t, int f) {
    const int a = std::max(0, f - 1), b = std::min(kNumFrames - 1, f + 1);
    return (t.states[static_cast<std::size_t>(b)].xy() - t.states[static_cast<std::size_t>(a)].xy()).norm() / ((b - a) * kFrameDt);
}

}  // namespace

TEST(FreewayMap, SpecExamples) {
    const auto two = build_freeway_map(2, 1000, 3.6, "m2");
    EXPECT_EQ(ys_of(two, PolylineKind::centerline), (std::vector<double>{0.0, 3.6}));
    const auto edges = ys_of(two, PolylineKind::road_edge);
    ASSERT_EQ(edges.size(), 2u);
    EXPECT_NEAR(edges[0], -1.8, 1e-12);
    EXPECT_NEAR(edges[1], 5.4, 1e-12);
    for (const auto& p : two.polylines) EXPECT_EQ(p.points.size(), 101u);
    EXPECT_TRUE(validate_map(two).empty());

    const auto one = build_freeway_map(1, 500, 3.6, "m1");
    const auto e1 = ys_of(one, PolylineKind::road_edge);
    EXPECT_NEAR(e1[1] - e1[0], 3.6, 1e-12);
}

TEST(GenerateScenario, EquilibriumPlatoonHoldsSpeed) {
    SynthConfig c;
    c.lanes = 2;
    c.vehicle_count = 12;
    c.desired_speed_min = c.desired_speed_max = 20.0;
    c.initial_gap_min = c.initial_gap_max = idm_equilibrium_gap(20.0, c.idm);
    c.lane_change_rate = 0.0;
    c.seed = 5;
    ASSERT_NEAR(c.initial_gap_min, 35.722, 5e-4);
    const auto map = build_freeway_map(c.lanes, c.length, c.lane_width, "eq");
    const auto s = generate_scenario(c, map, "eq0");
    ASSERT_EQ(s.tracks.size(), 12u);
    for (const auto& t : s.tracks)
        for (int f = 0; f < kNumFrames; ++f) EXPECT_NEAR(speed_at(t, f), 20.0, 0.01) << "agent " << t.agent_id << " frame " << f;
}

TEST(GenerateScenario, DeterministicAndClean) {
    SynthConfig c;
    c.seed = 11;
    c.wave_mode = true;
    c.lane_change_rate = 0.1;
    const auto map = build_freeway_map(c.lanes, c.length, c.lane_width, "det");
    const auto a = generate_scenario(c, map, "x");
    EXPECT_EQ(a, generate_scenario(c, map, "x"));
    EXPECT_EQ(a.provenance, Provenance::clean);
    EXPECT_TRUE(validate_scenario(a, map).empty());
    c.seed = 12;
    EXPECT_NE(a, generate_scenario(c, map, "x"));
}

TEST(GenerateScenario, NoLaneChangeKeepsLateral) {
    SynthConfig c;
    c.lane_change_rate = 0.0;
    c.wave_mode = true;
    c.seed = 3;
    const auto map = build_freeway_map(c.lanes, c.length, c.lane_width, "lat");
    for (const auto& t : generate_scenario(c, map, "l").tracks)
        for (const auto& st : t.states) EXPECT_EQ(st.y, t.states.front().y);
}

TEST(GenerateScenario, CollisionFreeAndSpeedBounded) {
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
        SynthConfig c;
        c.seed = seed;
        c.wave_mode = seed % 2 == 0;
        c.lane_change_rate = 0.05;
        c.driver_spread = 0.2;
        const auto map = build_freeway_map(c.lanes, c.length, c.lane_width, "prop");
        const auto s = generate_scenario(c, map, "p" + std::to_string(seed));
        const RoadGeometry geo(map);
        for (int f = 0; f < kNumFrames; ++f) {
            for (const auto& t : s.tracks) {
                const double v = (f > 0 ? (t.states[static_cast<std::size_t>(f)].xy() - t.states[static_cast<std::size_t>(f - 1)].xy()).norm() / kFrameDt : 0.0);
                EXPECT_LE(v, c.max_desired_speed() + 1.0);
            }
            for (std::size_t i = 0; i < s.tracks.size(); ++i)
                for (std::size_t j = 0; j < s.tracks.size(); ++j) {
                    if (i == j) continue;
                    const auto& a = s.tracks[i].states[static_cast<std::size_t>(f)];
                    const auto& b = s.tracks[j].states[static_cast<std::size_t>(f)];
                    if (std::abs(a.y - b.y) >= 0.5 * (s.tracks[i].width + s.tracks[j].width) || b.x < a.x) continue;
                    EXPECT_GT(b.x - a.x - 0.5 * (s.tracks[i].length + s.tracks[j].length), 0.0)
                        << "seed " << seed << " frame " << f;
                }
        }
    }
}

TEST(GenerateScenario, Overcrowded) {
    SynthConfig c;
    c.lanes = 1;
    c.length = 300;
    c.vehicle_count = 30;
    const auto map = build_freeway_map(c.lanes, c.length, c.lane_width, "tight");
    try {
        generate_scenario(c, map, "o");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), "overcrowded");
    }
}

TEST(SynthConfig, JsonRoundTrip) {
    SynthConfig c;
    c.lanes = 4;
    c.wave_mode = true;
    c.idm.T = 1.2;
    c.seed = 42;
    const nlohmann::json j = c;
    const auto back = j.get<SynthConfig>();
    EXPECT_EQ(back.lanes, 4);
    EXPECT_TRUE(back.wave_mode);
    EXPECT_EQ(back.idm.T, 1.2);
    EXPECT_EQ(back.seed, 42u);
    EXPECT_EQ(nlohmann::json::parse("{\"lanes\": 2}").get<SynthConfig>().vehicle_count, SynthConfig{}.vehicle_count);
}
