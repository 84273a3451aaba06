#pragma once

#include "noisesim/core_model.hpp"
#include "noisesim/idm.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>

namespace noisesim {

/// Parameters of the synthetic freeway generator.
///
/// Lane leaders (front-most vehicle of each lane) cruise at their sampled
/// desired speed; everyone else follows with IDM. `driver_spread` gives each
/// follower its own v0 in [v0(1-spread), v0] and headway in T(1 +- spread).
struct SynthConfig {
    int lanes = 3;
    double length = 1000.0;
    double lane_width = 3.6;
    int vehicle_count = 24;
    double desired_speed_min = 22.0;
    double desired_speed_max = 30.0;
    double initial_gap_min = 15.0;
    double initial_gap_max = 60.0;
    double lane_change_rate = 0.02;  // per vehicle per second
    bool wave_mode = false;
    double wave_period = 20.0;       // s
    double wave_amplitude = 0.4;     // fraction of desired speed
    double warmup = 10.0;            // s simulated before frame 0
    double driver_spread = 0.0;
    IdmParams idm;
    std::uint64_t seed = 0;

    /// Upper bound any generated speed respects (plus integration slack).
    double max_desired_speed() const { return std::max(desired_speed_max, idm.v0); }
};

void to_json(nlohmann::json& j, const IdmParams& p);
void from_json(const nlohmann::json& j, IdmParams& p);
void to_json(nlohmann::json& j, const SynthConfig& c);
void from_json(const nlohmann::json& j, SynthConfig& c);

/// Straight carriageway along +x with 10 m point spacing.
RoadMap build_freeway_map(int lanes, double length, double lane_width, const std::string& map_id);

/// One clean 91-frame scenario. Throws Error("overcrowded") when the requested
/// vehicles cannot be placed with the minimum initial gap.
Scenario generate_scenario(const SynthConfig& config, const RoadMap& map, const std::string& scenario_id);

}  // namespace noisesim
