#pragma once

#include "noisesim/core_model.hpp"

#include <json.hpp>

#include <cstdint>

namespace noisesim {

/// Observation corruption parameters. Gaussian jitter and geometric
/// occlusion lengths are this library's parametric choices.
struct NoiseConfig {
    double jitter_sigma_xy = 0.0;       // m, i.i.d. per frame and axis
    double jitter_sigma_heading = 0.0;  // rad
    double dropout_rate = 0.0;          // per frame
    double occlusion_rate = 0.0;        // expected occlusion events per track (at most one)
    double occlusion_mean_len = 5.0;    // frames
    double fragmentation_rate = 0.0;    // per track
    std::uint64_t seed = 0;

    bool valid() const;
};

void to_json(nlohmann::json& j, const NoiseConfig& c);
void from_json(const nlohmann::json& j, NoiseConfig& c);

/// Applies fragmentation, occlusion, dropout and jitter, in that order.
///
/// Each source track draws from its own stream keyed on (seed, scenario_id,
/// agent_id), so corrupting one track does not depend on the others.
/// Fragment tails get fresh ids above the scenario's current maximum; a split
/// that would push the track count past 32 is skipped.
///
/// Throws Error("double-corruption") unless the input is clean.
Scenario corrupt(const Scenario& scenario, const NoiseConfig& config);

}  // namespace noisesim
