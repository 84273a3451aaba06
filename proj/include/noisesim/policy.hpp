#pragma once

#include "noisesim/core_model.hpp"
#include "noisesim/tokenizer.hpp"

#include <Eigen/Core>
#include <json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

namespace noisesim {

class Rng;

inline constexpr int kHistoryTokens = 2;
inline constexpr int kMaxNeighbors = 8;
inline constexpr int kNeighborFeatures = 4;  // rel x, rel y, rel speed, present
inline constexpr int kEgoFeatures = 4;       // speed, heading vs lane, lane offset, edge distance
inline constexpr int kNumericFeatures = kEgoFeatures + kMaxNeighbors * kNeighborFeatures;

/// Layer sizes of the next-token MLP: token embeddings ++ numeric features
/// -> tanh(hidden1) -> tanh(hidden2) -> vocab_size logits.
struct PolicyArch {
    int vocab_size = 512;
    int embed_dim = 16;
    int history_tokens = kHistoryTokens;
    int numeric_dim = kNumericFeatures;
    int hidden1 = 128;
    int hidden2 = 128;
    std::string activation = "tanh";

    int input_dim() const { return history_tokens * embed_dim + numeric_dim; }
    /// Row vocab_size of the embedding table stands for "no token" (gap in history).
    int unknown_token() const { return vocab_size; }
    Eigen::Index parameter_count() const;

    friend bool operator==(const PolicyArch&, const PolicyArch&) = default;
};

void to_json(nlohmann::json& j, const PolicyArch& a);
void from_json(const nlohmann::json& j, PolicyArch& a);

struct PolicyParameters {
    PolicyArch arch;
    Eigen::VectorXd theta;
    std::uint64_t vocab_hash = 0;
};

/// Hidden layers get Xavier-uniform weights; the output layer starts at zero
/// so the initial policy is exactly uniform.
PolicyParameters init_policy(const PolicyArch& arch, std::uint64_t seed);

struct PolicyContext {
    std::array<int, kHistoryTokens> history{};  // oldest first
    Eigen::VectorXd numeric = Eigen::VectorXd::Zero(kNumericFeatures);
};

/// What the context builder needs to know about one agent at the current step.
struct AgentSnapshot {
    std::int64_t agent_id = 0;
    Eigen::Vector2d position = Eigen::Vector2d::Zero();
    double heading = 0.0;
    Eigen::Vector2d velocity = Eigen::Vector2d::Zero();
    std::array<int, kHistoryTokens> history{};
};

/// Ego features plus the 8 nearest agents (by distance, then id) in the ego frame.
PolicyContext build_context(std::span<const AgentSnapshot> agents, std::size_t ego, const RoadGeometry& geometry);

struct ContextBatch {
    Eigen::MatrixXi tokens;   // history_tokens x B
    Eigen::MatrixXd numeric;  // numeric_dim x B

    Eigen::Index size() const { return numeric.cols(); }
};

ContextBatch make_batch(std::span<const PolicyContext> contexts);

struct ForwardCache {
    Eigen::MatrixXd input;
    Eigen::MatrixXd h1;
    Eigen::MatrixXd h2;
    Eigen::MatrixXi tokens;
};

/// Logits, one column per context. Throws Error("shape-mismatch") when the
/// parameters, architecture and batch disagree.
Eigen::MatrixXd policy_forward(const PolicyParameters& params, const ContextBatch& batch, ForwardCache* cache = nullptr);

/// Flat gradient of sum(dlogits .* logits) with respect to theta.
Eigen::VectorXd policy_backward(const PolicyParameters& params, const ForwardCache& cache, const Eigen::MatrixXd& dlogits);

Eigen::VectorXd policy_logits(const PolicyParameters& params, const PolicyContext& context);

/// Temperature 0 is argmax (lowest index on ties); otherwise a categorical
/// draw from softmax(logits / temperature).
int sample_token(const Eigen::Ref<const Eigen::VectorXd>& logits, double temperature, Rng& rng);

/// JSON header line followed by little-endian float64 parameters.
void save_policy(const std::filesystem::path& path, const PolicyParameters& params);
PolicyParameters load_policy(const std::filesystem::path& path);

}  // namespace noisesim
