#include "noisesim/cli.hpp"

#include "noisesim/error.hpp"
#include "noisesim/parallel.hpp"
#include "noisesim/rng.hpp"
#include "noisesim/scenario_io.hpp"
#include "noisesim/tokenizer.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

namespace noisesim {

namespace fs = std::filesystem;

// ---------------------------------------------------------------- config json

void to_json(nlohmann::json& j, const CorpusConfig& c) {
    j = {{"scenarios", c.scenarios}, {"wave_fraction", c.wave_fraction}, {"split_ratios", c.split_ratios}, {"gzip", c.gzip}};
}

void from_json(const nlohmann::json& j, CorpusConfig& c) {
    c.scenarios = j.value("scenarios", c.scenarios);
    c.wave_fraction = j.value("wave_fraction", c.wave_fraction);
    c.split_ratios = j.value("split_ratios", c.split_ratios);
    c.gzip = j.value("gzip", c.gzip);
}

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TokenizerConfig, vocab_size, epsilon, heading_weight, token_period)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(IdmGrid, v0, T, a, b, s0, delta)

void to_json(nlohmann::json& j, const PipelineConfig& c) {
    j = {{"seed", c.seed},         {"jobs", c.jobs},         {"corpus", c.corpus},   {"synth", c.synth},
         {"noise", c.noise},       {"cleaning", c.cleaning}, {"tokenizer", c.tokenizer},
         {"train", c.train},       {"loss", c.loss},         {"metrics", c.metrics}, {"idm_grid", c.idm_grid},
         {"calibration_scenarios", c.calibration_scenarios}};
}

void from_json(const nlohmann::json& j, PipelineConfig& c) {
    c.seed = j.value("seed", c.seed);
    c.jobs = j.value("jobs", c.jobs);
    if (j.contains("corpus")) c.corpus = j.at("corpus").get<CorpusConfig>();
    if (j.contains("synth")) c.synth = j.at("synth").get<SynthConfig>();
    if (j.contains("noise")) c.noise = j.at("noise").get<NoiseConfig>();
    if (j.contains("cleaning")) c.cleaning = j.at("cleaning").get<CleaningConfig>();
    if (j.contains("tokenizer")) c.tokenizer = j.at("tokenizer").get<TokenizerConfig>();
    if (j.contains("train")) c.train = j.at("train").get<TrainConfig>();
    if (j.contains("loss")) c.loss = j.at("loss").get<LossSpec>();
    if (j.contains("metrics")) c.metrics = j.at("metrics").get<MetricsConfig>();
    if (j.contains("idm_grid")) c.idm_grid = j.at("idm_grid").get<IdmGrid>();
    c.calibration_scenarios = j.value("calibration_scenarios", c.calibration_scenarios);
}

std::uint64_t stage_seed(std::uint64_t master, std::string_view stage) {
    return SeedBuilder(master).add("stage").add(stage).seed();
}

namespace {

// ---------------------------------------------------------------- logging

enum class LogLevel { quiet = 0, error, warn, info, debug };

LogLevel log_level() {
    const char* env = std::getenv("NOISESIM_LOG");
    if (!env) return LogLevel::info;
    const std::string v(env);
    if (v == "quiet" || v == "off" || v == "0") return LogLevel::quiet;
    if (v == "error") return LogLevel::error;
    if (v == "warn") return LogLevel::warn;
    if (v == "debug") return LogLevel::debug;
    return LogLevel::info;
}

template <typename... Args>
void log(LogLevel level, const Args&... args) {
    static const LogLevel threshold = log_level();
    if (level > threshold) return;
    static constexpr const char* names[] = {"", "error", "warn", "info", "debug"};
    std::ostringstream os;
    os << "[noisesim " << names[static_cast<int>(level)] << "] ";
    (os << ... << args);
    os << '\n';
    std::cerr << os.str();
}

// ---------------------------------------------------------------- options

struct Options {
    std::string config_path;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
    std::string split;
    std::string input;
    std::string vocab_path;
    std::string checkpoint;
    std::string policy = "const";
    std::optional<std::string> loss;
    std::optional<double> gamma, epsilon_smooth, alpha, beta, eta;
    std::optional<int> k_rollouts;
    std::optional<double> temperature;
    std::optional<int> epochs;
    std::vector<std::string> metrics_files;
};

PipelineConfig resolve_config(const Options& o) {
    PipelineConfig c;
    if (!o.config_path.empty()) {
        try {
            c = read_json_file(o.config_path).get<PipelineConfig>();
        } catch (const nlohmann::json::exception& e) {
            throw Error("bad-config", o.config_path + ": " + e.what());
        }
    }
    if (o.seed) c.seed = *o.seed;
    if (o.jobs) c.jobs = *o.jobs;
    if (o.loss) c.loss.kind = parse_loss_kind(*o.loss);
    if (o.gamma) c.loss.gamma = *o.gamma;
    if (o.epsilon_smooth) c.loss.epsilon_smooth = *o.epsilon_smooth;
    if (o.alpha) c.loss.alpha = *o.alpha;
    if (o.beta) c.loss.beta = *o.beta;
    if (o.eta) c.loss.eta = *o.eta;
    if (o.k_rollouts) c.metrics.k_rollouts = *o.k_rollouts;
    if (o.temperature) c.metrics.temperature = *o.temperature;
    if (o.epochs) c.train.epochs = *o.epochs;
    if (c.jobs < 1) throw Error("bad-config", "jobs must be >= 1");
    return c;
}

std::optional<SplitTag> split_filter(const std::string& s) {
    if (s.empty() || s == "all") return std::nullopt;
    return parse_split(s);
}

fs::path require_out(const Options& o) {
    if (o.out.empty()) throw Error("usage", "--out is required");
    return o.out;
}

std::vector<RoadMap> maps_of(const std::vector<CorpusItem>& items) {
    std::map<std::string, const RoadMap*> seen;
    for (const auto& it : items) seen.emplace(it.map->map_id, it.map.get());
    std::vector<RoadMap> out;
    for (const auto& [id, m] : seen) out.push_back(*m);
    return out;
}

/// Groups scenarios that share a map, in first-seen order.
std::vector<std::pair<const RoadMap*, std::vector<Scenario>>> group_by_map(const std::vector<CorpusItem>& items) {
    std::vector<std::pair<const RoadMap*, std::vector<Scenario>>> groups;
    for (const auto& it : items) {
        auto g = std::find_if(groups.begin(), groups.end(), [&](const auto& p) { return p.first == it.map.get(); });
        if (g == groups.end()) {
            groups.push_back({it.map.get(), {}});
            g = std::prev(groups.end());
        }
        g->second.push_back(it.scenario);
    }
    return groups;
}

SampleSet samples_of(const std::vector<CorpusItem>& items, const TokenVocab& vocab) {
    SampleSet out;
    for (const auto& [map, scenarios] : group_by_map(items)) out.append(build_samples(scenarios, *map, vocab));
    return out;
}

// ---------------------------------------------------------------- policies

struct PolicyHolder {
    SimPolicy policy;
    std::unique_ptr<PolicyParameters> params;
    std::unique_ptr<TokenVocab> vocab;
};

PolicyHolder make_policy(const Options& o, const PipelineConfig& cfg, const fs::path& corpus) {
    PolicyHolder h;
    if (o.policy == "const") {
        h.policy = ConstantSpeedPolicy{};
    } else if (o.policy == "replay") {
        h.policy = ReplayPolicy{};
    } else if (o.policy == "idm") {
        auto train = read_corpus(corpus, SplitTag::train);
        if (train.empty()) {
            log(LogLevel::warn, "no train split; IDM uses synth.idm parameters uncalibrated");
            h.policy = IdmPolicy{cfg.synth.idm};
        } else {
            const RoadMap* map = train.front().map.get();
            std::vector<Scenario> sample;
            for (const auto& it : train) {
                if (it.map.get() != map) continue;
                if (cfg.calibration_scenarios > 0 && static_cast<int>(sample.size()) >= cfg.calibration_scenarios) break;
                sample.push_back(it.scenario);
            }
            const auto cal = calibrate_idm(sample, *map, cfg.idm_grid);
            log(LogLevel::info, "idm calibrated on ", sample.size(), " scenarios: v0=", cal.params.v0, " T=", cal.params.T,
                " a=", cal.params.a, " b=", cal.params.b, " s0=", cal.params.s0, " mse=", cal.error);
            h.policy = IdmPolicy{cal.params};
        }
    } else if (o.policy == "learned") {
        if (o.checkpoint.empty() || o.vocab_path.empty())
            throw Error("usage", "--policy learned needs --checkpoint and --vocab");
        h.params = std::make_unique<PolicyParameters>(load_policy(o.checkpoint));
        h.vocab = std::make_unique<TokenVocab>(vocab_from_json(read_json_file(o.vocab_path)));
        if (h.params->vocab_hash != h.vocab->hash()) throw Error("vocab-mismatch", "checkpoint was trained with another vocabulary");
        h.policy = LearnedPolicy{h.params.get(), h.vocab.get()};
    } else {
        throw Error("usage", "unknown policy '" + o.policy + "'");
    }
    return h;
}

std::uint64_t eval_seed(const PipelineConfig& cfg) { return stage_seed(cfg.seed, "eval"); }

// ---------------------------------------------------------------- subcommands

int cmd_synth(const Options& o) {
    const auto cfg = resolve_config(o);
    const auto out = require_out(o);
    if (cfg.corpus.scenarios < 1) throw Error("bad-config", "corpus.scenarios must be >= 1");
    const RoadMap map = build_freeway_map(cfg.synth.lanes, cfg.synth.length, cfg.synth.lane_width,
                                          "freeway-" + std::to_string(cfg.synth.lanes) + "l");
    const auto n = static_cast<std::size_t>(cfg.corpus.scenarios);
    std::vector<std::string> ids(n);
    for (std::size_t i = 0; i < n; ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "s%06zu", i);
        ids[i] = buf;
    }
    const auto splits = assign_splits(ids, cfg.corpus.split_ratios, stage_seed(cfg.seed, "split"));
    const auto synth_seed = stage_seed(cfg.seed, "synth");

    std::vector<Scenario> scenarios(n);
    parallel_for(n, cfg.jobs, [&](std::size_t i) {
        SynthConfig sc = cfg.synth;
        // spread wave scenarios evenly through the id sequence
        const double f = cfg.corpus.wave_fraction;
        sc.wave_mode = std::floor(static_cast<double>(i + 1) * f) > std::floor(static_cast<double>(i) * f);
        sc.seed = SeedBuilder(synth_seed).add(ids[i]).seed();
        scenarios[i] = generate_scenario(sc, map, ids[i]);
        scenarios[i].split = splits.at(ids[i]);
    });
    const auto manifest = write_corpus(scenarios, {map}, out, {cfg.corpus.gzip});
    log(LogLevel::info, "synth: wrote ", n, " scenarios to ", out.string(), " (train ", manifest.counts.count("train") ? manifest.counts.at("train") : 0,
        ")");
    return 0;
}

int cmd_corrupt(const Options& o) {
    auto cfg = resolve_config(o);
    const auto out = require_out(o);
    cfg.noise.seed = stage_seed(cfg.seed, "noise");
    if (!cfg.noise.valid()) throw Error("bad-config", "invalid noise section");
    const auto items = read_corpus(o.input);
    std::vector<Scenario> scenarios(items.size());
    parallel_for(items.size(), cfg.jobs, [&](std::size_t i) {
        const auto& s = items[i].scenario;
        scenarios[i] = s.split == SplitTag::test ? s : corrupt(s, cfg.noise);
    });
    write_corpus(scenarios, maps_of(items), out, {cfg.corpus.gzip});
    log(LogLevel::info, "corrupt: ", items.size(), " scenarios -> ", out.string());
    return 0;
}

int cmd_clean(const Options& o) {
    const auto cfg = resolve_config(o);
    const auto out = require_out(o);
    if (!cfg.cleaning.valid()) throw Error("bad-config", "invalid cleaning section");
    const auto items = read_corpus(o.input);
    std::vector<Scenario> scenarios(items.size());
    std::size_t before = 0, after = 0;
    parallel_for(items.size(), cfg.jobs, [&](std::size_t i) {
        const auto& s = items[i].scenario;
        scenarios[i] = s.split == SplitTag::test ? s : clean(s, *items[i].map, cfg.cleaning);
    });
    for (std::size_t i = 0; i < items.size(); ++i) {
        before += items[i].scenario.tracks.size();
        after += scenarios[i].tracks.size();
    }
    write_corpus(scenarios, maps_of(items), out, {cfg.corpus.gzip});
    log(LogLevel::info, "clean: kept ", after, " of ", before, " tracks");
    return 0;
}

int cmd_vocab(const Options& o) {
    const auto cfg = resolve_config(o);
    const auto out = require_out(o);
    const auto items = read_corpus(o.input, SplitTag::train);
    std::vector<Scenario> scenarios;
    for (const auto& it : items) scenarios.push_back(it.scenario);
    const auto deltas = extract_deltas(scenarios, cfg.tokenizer.token_period);
    const auto vocab = build_vocab(deltas, cfg.tokenizer.vocab_size, cfg.tokenizer.epsilon, stage_seed(cfg.seed, "vocab"),
                                   cfg.tokenizer.heading_weight, cfg.tokenizer.token_period);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    write_json_file(out, to_json(vocab));
    log(LogLevel::info, "vocab: ", vocab.size(), " templates from ", deltas.size(), " deltas, radius ", vocab.coverage_radius);
    return 0;
}

int cmd_train(const Options& o) {
    auto cfg = resolve_config(o);
    const fs::path out = require_out(o);
    if (o.vocab_path.empty()) throw Error("usage", "--vocab is required");
    if (!cfg.loss.valid()) throw Error("bad-config", "invalid loss section");
    cfg.train.seed = stage_seed(cfg.seed, "train");
    const auto vocab = vocab_from_json(read_json_file(o.vocab_path));
    const auto train_set = samples_of(read_corpus(o.input, SplitTag::train), vocab);
    const auto val_set = samples_of(read_corpus(o.input, SplitTag::val), vocab);
    log(LogLevel::info, "train: ", train_set.size(), " train / ", val_set.size(), " val samples, loss ", to_string(cfg.loss.kind));

    const auto result = train(train_set, val_set, vocab, cfg.loss, cfg.train);
    fs::create_directories(out);
    save_policy(out / "policy.ckpt", result.params);
    std::ofstream logf(out / "train_log.jsonl");
    for (const auto& e : result.log) logf << to_json(e).dump() << '\n';
    nlohmann::json summary = {{"loss", cfg.loss},
                              {"train", cfg.train},
                              {"train_samples", train_set.size()},
                              {"val_samples", val_set.size()},
                              {"best_epoch", result.best_epoch},
                              {"epochs_run", result.log.size()},
                              {"initial_batch_loss", result.initial_batch_loss}};
    if (!result.log.empty()) {
        const auto& best = result.log[static_cast<std::size_t>(std::max(0, result.best_epoch - 1))];
        summary["best_val_loss"] = best.val_loss;
    }
    write_json_file(out / "train_summary.json", summary);
    return 0;
}

int cmd_rollout(const Options& o) {
    const auto cfg = resolve_config(o);
    const fs::path out = require_out(o);
    const auto holder = make_policy(o, cfg, o.input);
    const auto items = read_corpus(o.input, split_filter(o.split.empty() ? "test" : o.split));
    fs::create_directories(out);
    const auto seed = eval_seed(cfg);
    parallel_for(items.size(), cfg.jobs, [&](std::size_t i) {
        const auto& s = items[i].scenario;
        const RolloutOptions opts{cfg.metrics.k_rollouts, cfg.metrics.temperature,
                                  SeedBuilder(seed).add("evaluate").add(s.scenario_id).seed()};
        const auto sims = rollout(s, *items[i].map, holder.policy, opts);
        nlohmann::json j = {{"scenario_id", s.scenario_id}, {"policy", policy_name(holder.policy)}};
        auto& arr = j["rollouts"] = nlohmann::json::array();
        for (const auto& r : sims) arr.push_back(to_json(r));
        write_json_file(out / (s.scenario_id + ".json"), j);
    });
    log(LogLevel::info, "rollout: ", items.size(), " scenarios x ", cfg.metrics.k_rollouts, " -> ", out.string());
    return 0;
}

int cmd_eval(const Options& o) {
    const auto cfg = resolve_config(o);
    const fs::path out = require_out(o);
    const auto holder = make_policy(o, cfg, o.input);
    const auto items = read_corpus(o.input, split_filter(o.split.empty() ? "test" : o.split));
    std::vector<EvalItem> eval_items;
    for (const auto& it : items) eval_items.push_back({&it.scenario, it.map.get()});
    const auto report = evaluate(eval_items, holder.policy, cfg.metrics, eval_seed(cfg), cfg.jobs);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    write_json_file(out, to_json(report));
    log(LogLevel::info, "eval: ", report.policy, " realism ", report.aggregate.realism, " minADE ", report.aggregate.min_ade);
    return 0;
}

// ---------------------------------------------------------------- report

std::string fmt(double v, int precision = 4) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(precision) << v;
    return os.str();
}

std::string svg_bars(const std::string& title, const std::string& xlabel, const std::vector<double>& edges_or_values,
                     const std::vector<std::size_t>& counts, bool labels_are_values) {
    const double w = 640, h = 360, ml = 60, mr = 20, mt = 40, mb = 50;
    const std::size_t n = counts.size();
    const std::size_t peak = counts.empty() ? 1 : std::max<std::size_t>(1, *std::max_element(counts.begin(), counts.end()));
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << w / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n";
    os << "<text x=\"" << w / 2 << "\" y=\"" << h - 10 << "\" text-anchor=\"middle\">" << xlabel << "</text>\n";
    os << "<text x=\"16\" y=\"" << mt + (h - mt - mb) / 2 << "\" transform=\"rotate(-90 16 " << mt + (h - mt - mb) / 2
       << ")\" text-anchor=\"middle\">count</text>\n";
    const double pw = w - ml - mr, ph = h - mt - mb;
    os << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw << "\" y2=\"" << mt + ph << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + ph << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << ml - 6 << "\" y=\"" << mt + 4 << "\" text-anchor=\"end\">" << peak << "</text>\n";
    const double bw = n ? pw / static_cast<double>(n) : pw;
    for (std::size_t i = 0; i < n; ++i) {
        const double bh = ph * static_cast<double>(counts[i]) / static_cast<double>(peak);
        os << "<rect x=\"" << fmt(ml + bw * static_cast<double>(i), 2) << "\" y=\"" << fmt(mt + ph - bh, 2) << "\" width=\""
           << fmt(std::max(0.5, bw - 1), 2) << "\" height=\"" << fmt(bh, 2) << "\" fill=\"#4a7fb5\"/>\n";
    }
    // a handful of tick labels
    const std::size_t step = std::max<std::size_t>(1, n / 8);
    for (std::size_t i = 0; i < n; i += step) {
        const double x = labels_are_values ? ml + bw * (static_cast<double>(i) + 0.5) : ml + bw * static_cast<double>(i);
        os << "<text x=\"" << fmt(x, 2) << "\" y=\"" << mt + ph + 16 << "\" text-anchor=\"middle\">"
           << fmt(edges_or_values[i], labels_are_values ? 0 : 1) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

int cmd_report(const Options& o) {
    const auto cfg = resolve_config(o);
    const fs::path out = require_out(o);
    const auto filter = split_filter(o.split);
    CorpusReader reader(o.input, filter);

    std::map<std::size_t, std::size_t> agent_counts;
    const HistogramSpec speed_spec{0.0, 50.0, 50};
    std::vector<std::size_t> speed_counts(static_cast<std::size_t>(speed_spec.bins), 0);
    std::vector<std::vector<std::array<double, 2>>> fan;
    constexpr std::size_t kFanTracks = 200;
    std::map<std::string, std::size_t> split_counts, provenance_counts;
    std::size_t scenario_count = 0, track_count = 0;
    double fan_extent_x = 1.0, fan_extent_y = 1.0;

    while (auto item = reader.next()) {
        const auto& s = item->scenario;
        ++scenario_count;
        ++split_counts[std::string(to_string(s.split))];
        ++provenance_counts[std::string(to_string(s.provenance))];
        ++agent_counts[s.tracks.size()];
        for (const auto& t : s.tracks) {
            ++track_count;
            for (std::size_t f = 1; f < t.states.size(); ++f) {
                if (!t.states[f].valid || !t.states[f - 1].valid) continue;
                const double v = (t.states[f].xy() - t.states[f - 1].xy()).norm() / kFrameDt;
                ++speed_counts[static_cast<std::size_t>(speed_spec.bin(v))];
            }
            if (fan.size() >= kFanTracks) continue;
            const auto first = std::find_if(t.states.begin(), t.states.end(), [](const AgentState& a) { return a.valid; });
            if (first == t.states.end()) continue;
            const double c = std::cos(-first->heading), sn = std::sin(-first->heading);
            std::vector<std::array<double, 2>> line;
            for (auto it = first; it != t.states.end(); ++it) {
                if (!it->valid) continue;
                const double dx = it->x - first->x, dy = it->y - first->y;
                const double rx = c * dx - sn * dy, ry = sn * dx + c * dy;
                fan_extent_x = std::max(fan_extent_x, std::abs(rx));
                fan_extent_y = std::max(fan_extent_y, std::abs(ry));
                line.push_back({std::round(rx * 100) / 100, std::round(ry * 100) / 100});
            }
            fan.push_back(std::move(line));
        }
    }
    if (scenario_count == 0) throw Error("empty-corpus", o.input);
    fs::create_directories(out);

    nlohmann::json summary;
    summary["scenarios"] = scenario_count;
    summary["tracks"] = track_count;
    summary["splits"] = split_counts;
    summary["provenance"] = provenance_counts;
    {
        auto& h = summary["agent_count_histogram"] = nlohmann::json::array();
        for (const auto& [k, n] : agent_counts) h.push_back({{"agents", k}, {"scenarios", n}});
    }
    summary["speed_histogram"] = {{"lo", speed_spec.lo}, {"hi", speed_spec.hi}, {"bins", speed_spec.bins}, {"counts", speed_counts}};
    summary["trajectory_fan"] = {{"tracks", fan.size()}, {"frame", "origin at first valid state, x along initial heading"},
                                 {"polylines", fan}};

    std::vector<double> agent_labels;
    std::vector<std::size_t> agent_bar;
    if (!agent_counts.empty()) {
        for (std::size_t k = agent_counts.begin()->first; k <= agent_counts.rbegin()->first; ++k) {
            agent_labels.push_back(static_cast<double>(k));
            agent_bar.push_back(agent_counts.count(k) ? agent_counts.at(k) : 0);
        }
    }
    write_text_file(out / "agent_count.svg", svg_bars("Agent count distribution", "agents per scenario", agent_labels, agent_bar, true));
    std::vector<double> speed_edges;
    for (int b = 0; b < speed_spec.bins; ++b) speed_edges.push_back(speed_spec.lo + (speed_spec.hi - speed_spec.lo) * b / speed_spec.bins);
    write_text_file(out / "speed.svg", svg_bars("Speed distribution", "speed (m/s)", speed_edges, speed_counts, false));
    {
        const double w = 640, h = 360, m = 40;
        std::ostringstream os;
        os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
           << "\" font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
        os << "<text x=\"" << w / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">Vehicle trajectory distribution</text>\n";
        const double sx = (w - 2 * m) / fan_extent_x, sy = (h / 2 - m) / fan_extent_y;
        const double scale = std::min(sx, sy * 20);  // lateral exaggerated at most 20x
        const double ysc = std::min(sy, scale * 20);
        for (const auto& line : fan) {
            os << "<polyline fill=\"none\" stroke=\"#4a7fb5\" stroke-opacity=\"0.4\" points=\"";
            for (const auto& p : line) os << fmt(m + p[0] * scale, 1) << ',' << fmt(h / 2 - p[1] * ysc, 1) << ' ';
            os << "\"/>\n";
        }
        os << "<text x=\"" << w / 2 << "\" y=\"" << h - 10 << "\" text-anchor=\"middle\">longitudinal (m), lateral exaggerated</text>\n</svg>\n";
        write_text_file(out / "trajectory_fan.svg", os.str());
    }

    if (!o.metrics_files.empty()) {
        nlohmann::json rows = nlohmann::json::array();
        std::ostringstream table;
        table << "| Method | Realism | Kinematic | Interactive | Map-Based | minADE |\n";
        table << "|---|---|---|---|---|---|\n";
        for (const auto& path : o.metrics_files) {
            const auto r = metrics_report_from_json(read_json_file(path));
            const auto& a = r.aggregate;
            const std::string name = fs::path(path).stem().string();
            table << "| " << name << " | " << fmt(a.realism) << " | " << fmt(a.kinematic) << " | " << fmt(a.interactive)
                  << " | " << fmt(a.map_based) << " | " << fmt(a.min_ade) << " |\n";
            rows.push_back({{"method", name},        {"policy", r.policy},        {"realism", a.realism},
                            {"kinematic", a.kinematic}, {"interactive", a.interactive}, {"map_based", a.map_based},
                            {"min_ade", a.min_ade}});
        }
        summary["results"] = rows;
        write_text_file(out / "results.md", table.str());
        std::cout << table.str();
    }
    write_json_file(out / "summary.json", summary);
    log(LogLevel::info, "report: ", scenario_count, " scenarios summarized in ", out.string());
    return 0;
}

}  // namespace

int run_command(const std::vector<std::string>& args) {
    CLI::App app{"noisesim: noise-aware generative traffic simulation toolkit", "noisesim"};
    app.require_subcommand(1);
    Options o;

    auto common = [&o](CLI::App* sub) {
        sub->add_option("--config", o.config_path, "pipeline JSON config")->check(CLI::ExistingFile);
        sub->add_option("--out", o.out, "output path");
        sub->add_option("--seed", o.seed, "master seed (overrides config)");
        sub->add_option("--jobs", o.jobs, "scenario-level worker threads")->check(CLI::PositiveNumber);
    };
    auto policy_opts = [&o](CLI::App* sub) {
        sub->add_option("--policy", o.policy, "simulation policy")->check(CLI::IsMember({"idm", "const", "learned", "replay"}));
        sub->add_option("--checkpoint", o.checkpoint, "policy checkpoint for --policy learned");
        sub->add_option("--vocab", o.vocab_path, "token vocabulary for --policy learned");
        sub->add_option("--split", o.split, "corpus split to evaluate (default test)");
        sub->add_option("--k-rollouts", o.k_rollouts, "rollouts per scenario")->check(CLI::PositiveNumber);
        sub->add_option("--temperature", o.temperature, "sampling temperature")->check(CLI::NonNegativeNumber);
    };

    auto* synth = app.add_subcommand("synth", "generate a clean synthetic corpus");
    common(synth);

    auto* corrupt_cmd = app.add_subcommand("corrupt", "corrupt train/val, copy test clean");
    common(corrupt_cmd);
    corrupt_cmd->add_option("corpus", o.input, "input corpus")->required();

    auto* clean_cmd = app.add_subcommand("clean", "apply the cleaning pipeline to train/val");
    common(clean_cmd);
    clean_cmd->add_option("corpus", o.input, "input corpus")->required();

    auto* vocab = app.add_subcommand("vocab", "build a motion-token vocabulary from the train split");
    common(vocab);
    vocab->add_option("corpus", o.input, "input corpus")->required();

    auto* train_cmd = app.add_subcommand("train", "train the next-token policy");
    common(train_cmd);
    train_cmd->add_option("corpus", o.input, "input corpus")->required();
    train_cmd->add_option("--vocab", o.vocab_path, "token vocabulary JSON");
    train_cmd->add_option("--loss", o.loss, "training loss")->check(CLI::IsMember({"ce", "ls", "focal", "sce"}));
    train_cmd->add_option("--gamma", o.gamma, "focal exponent");
    train_cmd->add_option("--epsilon", o.epsilon_smooth, "label smoothing mass");
    train_cmd->add_option("--alpha", o.alpha, "symmetric CE weight on CE");
    train_cmd->add_option("--beta", o.beta, "symmetric CE weight on reverse CE");
    train_cmd->add_option("--eta", o.eta, "reverse CE log clamp");
    train_cmd->add_option("--epochs", o.epochs, "epoch budget")->check(CLI::PositiveNumber);

    auto* rollout_cmd = app.add_subcommand("rollout", "simulate K futures per scenario");
    common(rollout_cmd);
    rollout_cmd->add_option("corpus", o.input, "input corpus")->required();
    policy_opts(rollout_cmd);

    auto* eval_cmd = app.add_subcommand("eval", "score a policy and write a MetricsReport");
    common(eval_cmd);
    eval_cmd->add_option("corpus", o.input, "input corpus")->required();
    policy_opts(eval_cmd);

    auto* report = app.add_subcommand("report", "corpus statistics, plots and results table");
    common(report);
    report->add_option("corpus", o.input, "input corpus")->required();
    report->add_option("--split", o.split, "restrict statistics to one split");
    report->add_option("--metrics", o.metrics_files, "MetricsReport files for the results table");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(std::move(reversed));
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        std::cout << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << "noisesim: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (synth->parsed()) return cmd_synth(o);
        if (corrupt_cmd->parsed()) return cmd_corrupt(o);
        if (clean_cmd->parsed()) return cmd_clean(o);
        if (vocab->parsed()) return cmd_vocab(o);
        if (train_cmd->parsed()) return cmd_train(o);
        if (rollout_cmd->parsed()) return cmd_rollout(o);
        if (eval_cmd->parsed()) return cmd_eval(o);
        if (report->parsed()) return cmd_report(o);
    } catch (const Error& e) {
        if (e.code() == "usage") {
            std::cerr << "noisesim: " << e.what() << '\n';
            return 2;
        }
        log(LogLevel::error, e.what());
        return 1;
    } catch (const std::exception& e) {
        log(LogLevel::error, e.what());
        return 1;
    }
    std::cerr << app.help();
    return 2;
}

}  // namespace noisesim
