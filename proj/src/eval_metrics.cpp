#include "noisesim/eval_metrics.hpp"

#include "noisesim/error.hpp"
#include "noisesim/parallel.hpp"
#include "noisesim/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace noisesim {

std::string_view to_string(Feature f) {
    switch (f) {
        case Feature::speed: return "speed";
        case Feature::accel: return "accel";
        case Feature::angular_speed: return "angular_speed";
        case Feature::nearest_distance: return "nearest_distance";
        case Feature::collision: return "collision";
        case Feature::edge_distance: return "edge_distance";
        case Feature::offroad: return "offroad";
    }
    return "speed";
}

int HistogramSpec::bin(double x) const {
    const double t = (x - lo) / (hi - lo) * bins;
    if (!(t >= 0.0)) return 0;  // also catches NaN
    return std::min(bins - 1, static_cast<int>(std::floor(t)));
}

bool MetricsConfig::valid() const {
    if (k_rollouts < 1 || !(smoothing > 0.0) || temperature < 0.0) return false;
    return std::all_of(histograms.begin(), histograms.end(), [](const HistogramSpec& h) { return h.bins >= 2 && h.hi > h.lo; });
}

void to_json(nlohmann::json& j, const MetricsConfig& c) {
    j = {{"k_rollouts", c.k_rollouts}, {"temperature", c.temperature}, {"smoothing", c.smoothing}};
    for (const auto f : kAllFeatures) {
        const auto& h = c.spec(f);
        j["histograms"][std::string(to_string(f))] = {{"lo", h.lo}, {"hi", h.hi}, {"bins", h.bins}};
    }
}

void from_json(const nlohmann::json& j, MetricsConfig& c) {
    c.k_rollouts = j.value("k_rollouts", c.k_rollouts);
    c.temperature = j.value("temperature", c.temperature);
    c.smoothing = j.value("smoothing", c.smoothing);
    if (j.contains("histograms")) {
        for (const auto f : kAllFeatures) {
            const auto key = std::string(to_string(f));
            if (!j["histograms"].contains(key)) continue;
            auto& h = c.histograms[static_cast<std::size_t>(f)];
            const auto& jh = j["histograms"][key];
            h.lo = jh.value("lo", h.lo);
            h.hi = jh.value("hi", h.hi);
            h.bins = jh.value("bins", h.bins);
        }
    }
}

namespace {

std::optional<Eigen::Vector2d> velocity_at(const AgentTrack& t, int f) {
    const auto ok = [&](int g) { return g >= 0 && g < static_cast<int>(t.states.size()) && t.states[static_cast<std::size_t>(g)].valid; };
    if (!ok(f)) return std::nullopt;
    const auto xy = [&](int g) { return t.states[static_cast<std::size_t>(g)].xy(); };
    if (ok(f - 1) && ok(f + 1)) return (xy(f + 1) - xy(f - 1)) / (2 * kFrameDt);
    if (ok(f - 1)) return (xy(f) - xy(f - 1)) / kFrameDt;
    if (ok(f + 1)) return (xy(f + 1) - xy(f)) / kFrameDt;
    return std::nullopt;
}

std::optional<double> speed_at(const AgentTrack& t, int f) {
    if (auto v = velocity_at(t, f)) return v->norm();
    return std::nullopt;
}

}  // namespace

FeatureTable component_features(const Scenario& scenario, const RoadMap& map) {
    const RoadGeometry geo(map);
    FeatureTable out;
    auto push = [&out](Feature f, double v) { out[static_cast<std::size_t>(f)].push_back(v); };
    const auto& tracks = scenario.tracks;
    for (std::size_t i = 0; i < tracks.size(); ++i) {
        const auto& t = tracks[i];
        const int frames = static_cast<int>(t.states.size());
        for (int f = kHistoryFrames; f < frames; ++f) {
            const auto& s = t.states[static_cast<std::size_t>(f)];
            if (!s.valid) continue;

            if (auto v = speed_at(t, f)) push(Feature::speed, *v);
            {
                auto before = speed_at(t, f - 1);
                auto after = f + 1 < frames ? speed_at(t, f + 1) : std::nullopt;
                auto here = speed_at(t, f);
                if (before && after) push(Feature::accel, std::abs(*after - *before) / (2 * kFrameDt));
                else if (before && here) push(Feature::accel, std::abs(*here - *before) / kFrameDt);
                else if (after && here) push(Feature::accel, std::abs(*after - *here) / kFrameDt);
            }
            if (t.states[static_cast<std::size_t>(f - 1)].valid)
                push(Feature::angular_speed, wrap_angle(s.heading - t.states[static_cast<std::size_t>(f - 1)].heading) / kFrameDt);

            double nearest = std::numeric_limits<double>::infinity();
            bool colliding = false;
            bool any_other = false;
            for (std::size_t j = 0; j < tracks.size(); ++j) {
                if (j == i || static_cast<int>(tracks[j].states.size()) <= f) continue;
                const auto& o = tracks[j].states[static_cast<std::size_t>(f)];
                if (!o.valid) continue;
                any_other = true;
                const double d = std::hypot(o.x - s.x, o.y - s.y);
                nearest = std::min(nearest, d);
                if (d < std::max(t.length, tracks[j].length)) colliding = true;
            }
            if (any_other) {
                push(Feature::nearest_distance, nearest);
                push(Feature::collision, colliding ? 1.0 : 0.0);
            }
            const RoadFrame rf = geo.frame(s.xy());
            push(Feature::edge_distance, rf.edge_distance);
            push(Feature::offroad, rf.offroad ? 1.0 : 0.0);
        }
    }
    return out;
}

void append_features(FeatureTable& into, const FeatureTable& from) {
    for (std::size_t k = 0; k < kFeatureCount; ++k) into[k].insert(into[k].end(), from[k].begin(), from[k].end());
}

double histogram_likelihood(std::span<const double> sim_values, std::span<const double> gt_values, const HistogramSpec& spec,
                            double smoothing) {
    if (gt_values.empty()) throw Error("no-ground-truth");
    if (spec.bins < 2 || !(spec.hi > spec.lo) || !(smoothing > 0.0)) throw Error("bad-argument", "histogram spec");
    std::vector<double> counts(static_cast<std::size_t>(spec.bins), 0.0);
    for (double v : sim_values) counts[static_cast<std::size_t>(spec.bin(v))] += 1.0;
    const double denom = static_cast<double>(sim_values.size()) + smoothing * spec.bins;
    double log_sum = 0.0;
    for (double g : gt_values) log_sum += std::log((counts[static_cast<std::size_t>(spec.bin(g))] + smoothing) / denom);
    return std::exp(log_sum / static_cast<double>(gt_values.size()));
}

double min_ade(std::span<const Scenario> rollouts, const Scenario& ground_truth) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& sim : rollouts) {
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& gt : ground_truth.tracks) {
            const AgentTrack* st = sim.find(gt.agent_id);
            if (!st) continue;
            const std::size_t frames = std::min(gt.states.size(), st->states.size());
            for (std::size_t f = kHistoryFrames; f < frames; ++f) {
                const auto& a = gt.states[f];
                const auto& b = st->states[f];
                if (!a.valid || !b.valid) continue;
                sum += std::hypot(a.x - b.x, a.y - b.y);
                ++n;
            }
        }
        if (n > 0) best = std::min(best, sum / static_cast<double>(n));
    }
    if (!std::isfinite(best)) throw Error("no-overlap", ground_truth.scenario_id);
    return best;
}

Scores score_scenario(std::span<const Scenario> rollouts, const Scenario& ground_truth, const RoadMap& map,
                      const MetricsConfig& config) {
    FeatureTable sim;
    for (const auto& r : rollouts) append_features(sim, component_features(r, map));
    const FeatureTable gt = component_features(ground_truth, map);

    Scores s;
    auto component = [&](Feature f) -> std::optional<double> {
        const auto k = static_cast<std::size_t>(f);
        if (gt[k].empty()) return std::nullopt;
        const double v = histogram_likelihood(sim[k], gt[k], config.spec(f), config.smoothing);
        s.components[std::string(to_string(f))] = v;
        return v;
    };
    auto mean_of = [&](std::initializer_list<Feature> fs) {
        double sum = 0.0;
        int n = 0;
        for (auto f : fs)
            if (auto v = component(f)) {
                sum += *v;
                ++n;
            }
        return n ? sum / n : 0.0;
    };
    s.kinematic = mean_of({Feature::speed, Feature::accel, Feature::angular_speed});
    s.interactive = mean_of({Feature::nearest_distance, Feature::collision});
    s.map_based = mean_of({Feature::edge_distance, Feature::offroad});
    s.realism = (s.kinematic + s.interactive + s.map_based) / 3.0;
    s.min_ade = min_ade(rollouts, ground_truth);
    return s;
}

MetricsReport evaluate(std::span<const EvalItem> items, const SimPolicy& policy, const MetricsConfig& config,
                       std::uint64_t seed, int jobs) {
    if (items.empty()) throw Error("no-samples", "empty test split");
    if (!config.valid()) throw Error("bad-config", "invalid MetricsConfig");

    std::vector<ScenarioScores> results(items.size());
    parallel_for(items.size(), jobs, [&](std::size_t i) {
        const auto& item = items[i];
        try {
            RolloutOptions opts{config.k_rollouts, config.temperature,
                                SeedBuilder(seed).add("evaluate").add(item.scenario->scenario_id).seed()};
            const auto sims = rollout(*item.scenario, *item.map, policy, opts);
            results[i] = {item.scenario->scenario_id, score_scenario(sims, *item.scenario, *item.map, config)};
        } catch (const Error& e) {
            throw Error(e.code(), item.scenario->scenario_id + ": " + e.what());
        }
    });

    MetricsReport report;
    report.policy = policy_name(policy);
    report.scenarios = results.size();
    std::map<std::string, std::pair<double, int>> comp;
    for (const auto& r : results) {
        report.aggregate.realism += r.scores.realism;
        report.aggregate.kinematic += r.scores.kinematic;
        report.aggregate.interactive += r.scores.interactive;
        report.aggregate.map_based += r.scores.map_based;
        report.aggregate.min_ade += r.scores.min_ade;
        for (const auto& [k, v] : r.scores.components) {
            comp[k].first += v;
            ++comp[k].second;
        }
    }
    const double n = static_cast<double>(results.size());
    report.aggregate.realism /= n;
    report.aggregate.kinematic /= n;
    report.aggregate.interactive /= n;
    report.aggregate.map_based /= n;
    report.aggregate.min_ade /= n;
    for (const auto& [k, v] : comp) report.aggregate.components[k] = v.first / v.second;
    report.per_scenario = std::move(results);
    return report;
}

namespace {

nlohmann::json scores_json(const Scores& s) {
    return {{"realism", s.realism},     {"kinematic", s.kinematic}, {"interactive", s.interactive},
            {"map_based", s.map_based}, {"min_ade", s.min_ade},     {"components", s.components}};
}

Scores scores_from(const nlohmann::json& j) {
    Scores s;
    s.realism = j.at("realism").get<double>();
    s.kinematic = j.at("kinematic").get<double>();
    s.interactive = j.at("interactive").get<double>();
    s.map_based = j.at("map_based").get<double>();
    s.min_ade = j.at("min_ade").get<double>();
    s.components = j.value("components", std::map<std::string, double>{});
    return s;
}

}  // namespace

nlohmann::json to_json(const MetricsReport& report) {
    nlohmann::json per = nlohmann::json::array();
    for (const auto& r : report.per_scenario) {
        auto j = scores_json(r.scores);
        j["scenario_id"] = r.scenario_id;
        per.push_back(std::move(j));
    }
    return {{"policy", report.policy}, {"scenarios", report.scenarios}, {"aggregate", scores_json(report.aggregate)},
            {"per_scenario", std::move(per)}};
}

MetricsReport metrics_report_from_json(const nlohmann::json& j) {
    MetricsReport r;
    r.policy = j.at("policy").get<std::string>();
    r.scenarios = j.at("scenarios").get<std::size_t>();
    r.aggregate = scores_from(j.at("aggregate"));
    for (const auto& e : j.at("per_scenario")) r.per_scenario.push_back({e.at("scenario_id").get<std::string>(), scores_from(e)});
    return r;
}

}  // namespace noisesim
