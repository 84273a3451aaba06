#pragma once

#include "noisesim/core_model.hpp"
#include "noisesim/sim_policies.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace noisesim {

enum class Feature { speed, accel, angular_speed, nearest_distance, collision, edge_distance, offroad };
inline constexpr std::size_t kFeatureCount = 7;
inline constexpr std::array<Feature, kFeatureCount> kAllFeatures{Feature::speed,           Feature::accel,
                                                                 Feature::angular_speed,   Feature::nearest_distance,
                                                                 Feature::collision,       Feature::edge_distance,
                                                                 Feature::offroad};
std::string_view to_string(Feature f);

struct HistogramSpec {
    double lo = 0.0;
    double hi = 1.0;
    int bins = 2;

    int bin(double x) const;
};

struct MetricsConfig {
    int k_rollouts = 32;
    double temperature = 1.0;
    double smoothing = 0.1;  // Laplace lambda
    std::array<HistogramSpec, kFeatureCount> histograms{{
        {0.0, 50.0, 50},    // speed, m/s
        {0.0, 10.0, 40},    // accel magnitude, m/s^2
        {-1.0, 1.0, 40},    // angular speed, rad/s
        {0.0, 100.0, 50},   // nearest-agent distance, m
        {0.0, 1.0, 2},      // collision indicator
        {-10.0, 10.0, 40},  // road-edge distance, m
        {0.0, 1.0, 2},      // offroad indicator
    }};

    const HistogramSpec& spec(Feature f) const { return histograms[static_cast<std::size_t>(f)]; }
    bool valid() const;
};

void to_json(nlohmann::json& j, const MetricsConfig& c);
void from_json(const nlohmann::json& j, MetricsConfig& c);

/// Pooled values per feature over all agents and valid future frames.
using FeatureTable = std::array<std::vector<double>, kFeatureCount>;

FeatureTable component_features(const Scenario& scenario, const RoadMap& map);
void append_features(FeatureTable& into, const FeatureTable& from);

/// exp(mean log p(bin(gt))) under the smoothed sim histogram
/// p(bin) = (n_bin + lambda) / (N + lambda B). Out-of-range values clamp to
/// the edge bins. Throws Error("no-ground-truth") when gt is empty.
double histogram_likelihood(std::span<const double> sim_values, std::span<const double> gt_values,
                            const HistogramSpec& spec, double smoothing = 0.1);

/// Min over rollouts of the mean displacement over (agent, future frame)
/// pairs valid in both. Agents missing from either side are ignored.
/// Throws Error("no-overlap") when nothing pairs up.
double min_ade(std::span<const Scenario> rollouts, const Scenario& ground_truth);

struct Scores {
    double realism = 0.0;
    double kinematic = 0.0;
    double interactive = 0.0;
    double map_based = 0.0;
    double min_ade = 0.0;
    std::map<std::string, double> components;
};

struct ScenarioScores {
    std::string scenario_id;
    Scores scores;
};

struct MetricsReport {
    std::string policy;
    std::size_t scenarios = 0;
    Scores aggregate;
    std::vector<ScenarioScores> per_scenario;
};

nlohmann::json to_json(const MetricsReport& report);
MetricsReport metrics_report_from_json(const nlohmann::json& j);

/// Scores one scenario given its rollouts.
Scores score_scenario(std::span<const Scenario> rollouts, const Scenario& ground_truth, const RoadMap& map,
                      const MetricsConfig& config);

struct EvalItem {
    const Scenario* scenario = nullptr;
    const RoadMap* map = nullptr;
};

/// Rolls out and scores every item; the aggregate is the unweighted mean over
/// scenarios. `jobs` > 1 evaluates scenarios concurrently; results do not
/// depend on it.
MetricsReport evaluate(std::span<const EvalItem> items, const SimPolicy& policy, const MetricsConfig& config,
                       std::uint64_t seed, int jobs = 1);

}  // namespace noisesim
