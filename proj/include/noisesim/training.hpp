#pragma once

#include "noisesim/core_model.hpp"
#include "noisesim/losses.hpp"
#include "noisesim/policy.hpp"
#include "noisesim/tokenizer.hpp"

#include <Eigen/Core>
#include <json.hpp>

#include <cstdint>
#include <span>
#include <vector>

namespace noisesim {

struct TrainConfig {
    double learning_rate = 1e-3;
    int batch_size = 256;
    int epochs = 10;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    double clip_norm = 1.0;
    int patience = 3;
    /// Random subset drawn each epoch; 0 uses every sample.
    int samples_per_epoch = 0;
    int hidden1 = 128;
    int hidden2 = 128;
    int embed_dim = 16;
    std::uint64_t seed = 0;

    bool valid() const { return learning_rate > 0 && batch_size > 0 && epochs > 0 && patience > 0 && clip_norm > 0; }
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// Teacher-forced (context, next token) pairs stored column-wise.
struct SampleSet {
    Eigen::MatrixXi tokens;   // history x N
    Eigen::MatrixXd numeric;  // features x N
    std::vector<int> targets;

    std::size_t size() const { return targets.size(); }
    void append(const PolicyContext& ctx, int target);
    void append(const SampleSet& other);
    void reserve(std::size_t n);
    ContextBatch gather(std::span<const std::size_t> columns) const;
};

/// One sample per agent and anchor frame a (a = 10 mod period) whose next
/// period [a, a+p] is fully valid. History tokens spanning invalid frames
/// become the unknown token; agents invisible at `a` are not neighbors.
SampleSet build_samples(std::span<const Scenario> scenarios, const RoadMap& map, const TokenVocab& vocab);

struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double wall_time = 0.0;
};

nlohmann::json to_json(const EpochLog& e);

struct TrainResult {
    PolicyParameters params;
    std::vector<EpochLog> log;
    int best_epoch = 0;
    double initial_batch_loss = 0.0;  // loss of the first batch before any update
};

/// Mean loss over a sample set.
double mean_loss(const PolicyParameters& params, const SampleSet& samples, const LossSpec& loss);

/// Minibatch Adam with global-norm clipping and early stopping on val loss.
/// Throws Error("no-samples") or Error("diverged").
TrainResult train(const SampleSet& train_set, const SampleSet& val_set, const TokenVocab& vocab, const LossSpec& loss,
                  const TrainConfig& config);

/// Relative error ||a - n|| / max(||a||, ||n||) of analytic vs. central
/// finite-difference gradients (step 1e-5), maximised over trials.
double grad_check(const LossSpec& loss, int trials, std::uint64_t seed, int classes = 512);

/// Same check for the policy network, on random parameters and contexts.
double grad_check_policy(int trials, std::uint64_t seed, const PolicyArch& arch = {});

}  // namespace noisesim
