#pragma once

#include "noisesim/core_model.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace noisesim {

/// Displacement over one token period, in the agent frame at the period start.
struct MotionDelta {
    double dx = 0.0;
    double dy = 0.0;
    double dheading = 0.0;

    friend bool operator==(const MotionDelta&, const MotionDelta&) = default;
};

/// sqrt(dx^2 + dy^2) + w_h * |wrap(dtheta)|
inline double delta_distance(const MotionDelta& a, const MotionDelta& b, double heading_weight) {
    return std::hypot(a.dx - b.dx, a.dy - b.dy) + heading_weight * std::abs(wrap_angle(a.dheading - b.dheading));
}

using Token = int;

struct TokenVocab {
    std::vector<MotionDelta> templates;
    double coverage_radius = 0.25;
    double heading_weight = 1.0;  // m/rad
    double token_period = 0.5;    // s
    std::uint64_t seed = 0;
    int requested_size = 512;
    int epsilon_doublings = 0;

    int size() const { return static_cast<int>(templates.size()); }
    /// Frames per token at 10 Hz.
    int period_frames() const;
    /// Stable content hash, recorded in policy checkpoints.
    std::uint64_t hash() const;
};

nlohmann::json to_json(const TokenVocab& vocab);
TokenVocab vocab_from_json(const nlohmann::json& j);

/// Converts a token period in seconds to a positive whole number of 10 Hz frames.
int token_period_frames(double token_period);

/// Displacement from `from` to `to`, rotated into the frame of `from`.
MotionDelta relative_delta(const AgentState& from, const AgentState& to);

/// One entry per anchor pair (0,p), (p,2p), ...; empty when any frame of the
/// pair is invalid.
std::vector<std::optional<MotionDelta>> track_deltas(const AgentTrack& track, int period_frames);

/// All deltas of all tracks, in scenario then track order.
std::vector<MotionDelta> extract_deltas(std::span<const Scenario> scenarios, double token_period);

/// Greedy disk cover over shuffled deltas, topped up by farthest-point
/// sampling; the radius doubles until the cover fits in `size` templates.
/// Throws Error("no-deltas") on empty input.
TokenVocab build_vocab(std::span<const MotionDelta> deltas, int size = 512, double epsilon = 0.25,
                       std::uint64_t seed = 0, double heading_weight = 1.0, double token_period = 0.5);

/// Nearest template; ties go to the lowest index.
Token encode_delta(const MotionDelta& delta, const TokenVocab& vocab);

std::vector<std::optional<Token>> encode(const AgentTrack& track, const TokenVocab& vocab);

/// Composes template deltas from `start`; returns start plus period_frames
/// interpolated states per token.
std::vector<AgentState> decode(const AgentState& start, std::span<const Token> tokens, const TokenVocab& vocab);

/// State after applying one template delta.
AgentState apply_delta(const AgentState& from, const MotionDelta& delta);

}  // namespace noisesim
