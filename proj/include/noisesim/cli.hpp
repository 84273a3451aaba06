#pragma once

#include "noisesim/cleaning.hpp"
#include "noisesim/eval_metrics.hpp"
#include "noisesim/losses.hpp"
#include "noisesim/noise_model.hpp"
#include "noisesim/sim_policies.hpp"
#include "noisesim/synth_gen.hpp"
#include "noisesim/training.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace noisesim {

/// Corpus-level knobs for `synth`.
struct CorpusConfig {
    int scenarios = 200;
    double wave_fraction = 0.5;
    std::array<double, 3> split_ratios{0.8, 0.1, 0.1};
    bool gzip = false;
};

struct TokenizerConfig {
    int vocab_size = 512;
    double epsilon = 0.25;
    double heading_weight = 1.0;
    double token_period = 0.5;
};

struct PipelineConfig {
    std::uint64_t seed = 0;
    int jobs = 1;
    CorpusConfig corpus;
    SynthConfig synth;
    NoiseConfig noise;
    CleaningConfig cleaning;
    TokenizerConfig tokenizer;
    TrainConfig train;
    LossSpec loss;
    MetricsConfig metrics;
    IdmGrid idm_grid{{25.0, 30.0, 35.0}, {1.0, 1.5, 2.0}, {0.5, 1.0, 1.5}, {1.5}, {2.0}, 4.0};
    /// Train scenarios used to calibrate the IDM baseline (0 = all).
    int calibration_scenarios = 100;
};

void to_json(nlohmann::json& j, const PipelineConfig& c);
void from_json(const nlohmann::json& j, PipelineConfig& c);

/// Stage seeds are derived from the master seed so one number pins the run.
std::uint64_t stage_seed(std::uint64_t master, std::string_view stage);

/// Entry point for the `noisesim` tool. Returns the process exit code:
/// 0 success, 1 validation or runtime failure, 2 usage error.
int run_command(const std::vector<std::string>& args);

}  // namespace noisesim
