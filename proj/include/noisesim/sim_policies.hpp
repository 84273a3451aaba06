#pragma once

#include "noisesim/core_model.hpp"
#include "noisesim/idm.hpp"
#include "noisesim/policy.hpp"
#include "noisesim/tokenizer.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace noisesim {

/// Straight-line extrapolation at fixed velocity and heading.
AgentState constant_speed_step(const AgentState& state, const Eigen::Vector2d& velocity, double dt);

struct IdmGrid {
    std::vector<double> v0, T, a, b, s0;
    double delta = 4.0;

    /// Cartesian product in row-major order (v0 slowest, s0 fastest).
    std::vector<IdmParams> points() const;
};

struct IdmCalibration {
    IdmParams params;
    double error = 0.0;       // mean squared speed error, (m/s)^2
    std::size_t grid_index = 0;
    std::size_t pairs = 0;
};

/// A follower/leader pair that stays in one lane with both tracks fully valid.
struct FollowingPair {
    const AgentTrack* follower = nullptr;
    const AgentTrack* leader = nullptr;
    /// Reference-line stations per frame, linearly bridged over invalid frames.
    std::vector<double> follower_station, leader_station;
};

/// Tracks valid at both ends and on at least this fraction of frames take part
/// in following-pair detection.
inline constexpr double kPairMinValidFraction = 0.8;

std::vector<FollowingPair> find_following_pairs(const Scenario& scenario, const RoadMap& map);

/// Replays each follower with IDM against its leader's observed motion and
/// returns the grid point with the lowest mean squared speed error (lowest
/// index on ties). Throws Error("no-pairs") when nothing is car-following.
IdmCalibration calibrate_idm(std::span<const Scenario> scenarios, const RoadMap& map, const IdmGrid& grid);

struct ConstantSpeedPolicy {};
struct IdmPolicy {
    IdmParams params;
};
struct LearnedPolicy {
    const PolicyParameters* params = nullptr;
    const TokenVocab* vocab = nullptr;
};
/// Copies the recorded future; the upper reference for metrics.
struct ReplayPolicy {};

using SimPolicy = std::variant<ConstantSpeedPolicy, IdmPolicy, LearnedPolicy, ReplayPolicy>;

std::string policy_name(const SimPolicy& policy);

struct RolloutOptions {
    int k_rollouts = 32;
    double temperature = 1.0;
    std::uint64_t master_seed = 0;
};

/// K closed-loop simulations of frames 11..90. History frames are copied
/// verbatim and every track is simulated.
/// Throws Error("missing-history") for a track with no valid history.
std::vector<Scenario> rollout(const Scenario& scenario, const RoadMap& map, const SimPolicy& policy,
                              const RolloutOptions& options);

/// Velocity at the end of history from the last two valid history frames.
Eigen::Vector2d history_velocity(const AgentTrack& track);

}  // namespace noisesim
