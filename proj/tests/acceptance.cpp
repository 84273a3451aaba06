// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers as
// arguments to run a subset, e.g. `acceptance 1 2 3`.

#include "noisesim/cleaning.hpp"
#include "noisesim/cli.hpp"
#include "noisesim/error.hpp"
#include "noisesim/eval_metrics.hpp"
#include "noisesim/idm.hpp"
#include "noisesim/losses.hpp"
#include "noisesim/noise_model.hpp"
#include "noisesim/rng.hpp"
#include "noisesim/scenario_io.hpp"
#include "noisesim/sim_policies.hpp"
#include "noisesim/synth_gen.hpp"
#include "noisesim/tokenizer.hpp"
#include "noisesim/training.hpp"

#include "test_support.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

using namespace noisesim;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string num(double v, int precision = 6) {
    std::ostringstream os;
    os << std::setprecision(precision) << v;
    return os.str();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

int run(std::vector<std::string> args) { return run_command(args); }

Eigen::VectorXd logits_for(std::initializer_list<double> p) {
    Eigen::VectorXd z(static_cast<Eigen::Index>(p.size()));
    Eigen::Index i = 0;
    for (double v : p) z(i++) = std::log(v);
    return z;
}

// ---------------------------------------------------------------- 1

bool loss_reductions(std::ostream& msg) {
    const auto t0 = Clock::now();
    Rng rng(101);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        Eigen::VectorXd z(512);
        for (auto& v : z) v = 3.0 * rng.normal();
        const int t = static_cast<int>(rng.below(512));
        const auto ce = loss_ce(z, t);
        for (const auto& r : {loss_focal(z, t, 0.0), loss_label_smoothing(z, t, 0.0), loss_symmetric_ce(z, t, 1.0, 0.0, 4e-4)}) {
            worst = std::max(worst, std::abs(r.loss - ce.loss));
            worst = std::max(worst, (r.grad - ce.grad).cwiseAbs().maxCoeff());
        }
    }
    const double secs = seconds_since(t0);
    msg << "max |diff| " << num(worst, 3) << " over 1000 logit vectors, " << num(secs, 3) << " s";
    return worst <= 1e-12 && secs < 1.0;
}

// ---------------------------------------------------------------- 2

bool analytic_losses(std::ostream& msg) {
    Eigen::VectorXd sharp4 = Eigen::VectorXd::Zero(4);
    sharp4(0) = 800.0;
    const Eigen::VectorXd uniform4 = Eigen::VectorXd::Zero(4);
    const Eigen::VectorXd uniform2 = Eigen::VectorXd::Zero(2);
    const Eigen::VectorXd p09 = logits_for({0.9, 0.1});
    const Eigen::VectorXd half = logits_for({0.5, 0.5});
    struct Case {
        const char* name;
        double got, want;
    };
    const std::vector<Case> cases{
        {"ce one-hot", loss_ce(sharp4, 0).loss, 0.0},
        {"ce uniform C=4", loss_ce(uniform4, 1).loss, 1.38629},
        {"ce p=0.9", loss_ce(p09, 0).loss, 0.10536},
        {"ls eps=0", loss_label_smoothing(p09, 0, 0.0).loss, 0.10536},
        {"ls uniform C=2", loss_label_smoothing(uniform2, 1, 0.3).loss, 0.693147},
        {"ls eps=0.1", loss_label_smoothing(p09, 0, 0.1).loss, 0.21522},
        {"focal gamma=0", loss_focal(p09, 0, 0.0).loss, 0.10536},
        {"focal p=1", loss_focal(sharp4, 0, 2.0).loss, 0.0},
        {"focal gamma=2 p=0.5", loss_focal(half, 0, 2.0).loss, 0.17329},
        {"sce beta=0", loss_symmetric_ce(p09, 0, 1.0, 0.0, 4e-4).loss, 0.10536},
        {"sce one-hot", loss_symmetric_ce(sharp4, 0, 1.0, 0.13, 4e-4).loss, -5.1994e-5},
        {"sce uniform C=4", loss_symmetric_ce(uniform4, 0, 1.0, 0.13, 4e-4).loss, 2.14912},
    };
    double worst = 0.0;
    std::string worst_name;
    for (const auto& c : cases) {
        const double d = std::abs(c.got - c.want);
        if (d >= worst) {
            worst = d;
            worst_name = c.name;
        }
    }
    msg << cases.size() << " examples, max |diff| " << num(worst, 3) << " (" << worst_name << ")";
    return worst <= 1e-5;
}

// ---------------------------------------------------------------- 3

bool gradient_checks(std::ostream& msg) {
    const auto t0 = Clock::now();
    LossSpec ce, ls, focal, sce;
    ls.kind = LossKind::ce_label_smoothing;
    focal.kind = LossKind::focal;
    focal.gamma = 2.0;
    sce.kind = LossKind::symmetric_ce;
    double worst = 0.0;
    for (const auto& [name, spec] : std::vector<std::pair<std::string, LossSpec>>{{"ce", ce}, {"ls", ls}, {"focal", focal}, {"sce", sce}}) {
        const double e = grad_check(spec, 100, 7);
        msg << name << ' ' << num(e, 2) << ", ";
        worst = std::max(worst, e);
    }
    const double pe = grad_check_policy(100, 7);
    worst = std::max(worst, pe);
    const double secs = seconds_since(t0);
    msg << "policy " << num(pe, 2) << "; " << num(secs, 3) << " s";
    return worst < 1e-4 && secs < 30.0;
}

// ---------------------------------------------------------------- 4

bool idm_physics(std::ostream& msg) {
    const IdmParams p{30, 1.5, 1, 1.5, 2, 4};
    const double free = idm_accel(0.0, std::nullopt, p);

    // independent oracle: bisect 1 - (v/v0)^4 - (s*/s)^2 = 0 at equal speeds
    auto f = [](double s) {
        const double sstar = 2.0 + 20.0 * 1.5;
        return 1.0 - std::pow(20.0 / 30.0, 4.0) - (sstar / s) * (sstar / s);
    };
    double lo = 1.0, hi = 500.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) < 0 ? lo : hi) = mid;
    }
    const double oracle = 0.5 * (lo + hi);
    const double closed = idm_equilibrium_gap(20.0, p);
    // root of the library's own acceleration law
    lo = 1.0;
    hi = 500.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (idm_accel(20.0, LeadVehicle{20.0, mid}, p) < 0 ? lo : hi) = mid;
    }
    const double lib_root = 0.5 * (lo + hi);

    // 60 s platoon: head cruises, brakes to a halt, then restarts
    constexpr int n = 12;
    constexpr double len = 4.5, dt = 0.01;
    std::vector<double> x(n), v(n, 20.0);
    for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = -i * (closed + len);
    double min_gap = 1e9;
    for (int step = 0; step < 6000; ++step) {
        const double t = step * dt;
        std::vector<double> acc(n);
        acc[0] = t < 10 ? 0.0 : (t < 17 ? -3.0 : idm_accel(v[0], std::nullopt, p));
        for (std::size_t k = 1; k < n; ++k) {
            const double gap = x[k - 1] - x[k] - len;
            min_gap = std::min(min_gap, gap);
            if (gap <= 0) break;
            acc[k] = idm_accel(v[k], LeadVehicle{v[k - 1], gap}, p);
        }
        if (min_gap <= 0) break;
        for (std::size_t k = 0; k < n; ++k) {
            v[k] = std::max(0.0, v[k] + acc[k] * dt);
            x[k] += v[k] * dt;
        }
    }
    msg << "free accel " << free << ", equilibrium gap " << num(closed, 8) << " (oracle " << num(oracle, 8) << ", accel root "
        << num(lib_root, 8) << "), platoon min gap " << num(min_gap, 4) << " m";
    return free == p.a && std::abs(closed - 35.722) <= 0.001 && std::abs(oracle - 35.722) <= 0.001 &&
           std::abs(lib_root - oracle) <= 1e-6 && min_gap > 0.0;
}

// ---------------------------------------------------------------- 5

bool tokenizer_coverage(std::ostream& msg) {
    const auto map = build_freeway_map(3, 1000, 3.6, "freeway-3l");
    std::vector<Scenario> corpus;
    for (int i = 0; i < 80; ++i) {
        SynthConfig c;
        c.seed = SeedBuilder(55).add(static_cast<std::uint64_t>(i)).seed();
        c.wave_mode = i % 2 == 1;
        c.lane_change_rate = 0.05;
        corpus.push_back(generate_scenario(c, map, "tok" + std::to_string(i)));
    }
    const auto deltas = extract_deltas(corpus, 0.5);
    const auto vocab = build_vocab(deltas, 512, 0.25, 3);
    std::size_t covered = 0;
    for (const auto& d : deltas) {
        const auto& t = vocab.templates[static_cast<std::size_t>(encode_delta(d, vocab))];
        covered += delta_distance(d, t, vocab.heading_weight) <= vocab.coverage_radius;
    }

    std::vector<const AgentTrack*> tracks;
    for (const auto& s : corpus)
        for (const auto& t : s.tracks) tracks.push_back(&t);
    Rng rng(9);
    rng.shuffle(tracks.begin(), tracks.end());
    const std::size_t n_tracks = std::min<std::size_t>(1000, tracks.size());
    const int p = vocab.period_frames();
    std::size_t steps = 0, within = 0;
    double worst = 0.0;
    for (std::size_t k = 0; k < n_tracks; ++k) {
        const auto& t = *tracks[k];
        std::vector<Token> tokens;
        for (const auto& e : encode(t, vocab)) tokens.push_back(*e);
        const auto dec = decode(t.states.front(), tokens, vocab);
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            const auto a = i * static_cast<std::size_t>(p), b = a + static_cast<std::size_t>(p);
            const double err = delta_distance(relative_delta(t.states[a], t.states[b]), relative_delta(dec[a], dec[b]), vocab.heading_weight);
            worst = std::max(worst, err);
            within += err <= vocab.coverage_radius;
            ++steps;
        }
    }
    msg << covered << '/' << deltas.size() << " deltas covered (radius " << vocab.coverage_radius << ", " << vocab.size()
        << " templates); " << within << '/' << steps << " token steps within radius over " << n_tracks << " tracks, worst "
        << num(worst, 4);
    return covered == deltas.size() && within == steps && n_tracks == 1000;
}

// ---------------------------------------------------------------- 6

bool cleaning_planted(std::ostream& msg) {
    const auto map = fixtures::two_lane_map();
    const auto s = fixtures::planted_cleaning_scenario(map);
    const auto c = clean(s, map);
    std::set<std::int64_t> kept;
    for (const auto& t : c.tracks) kept.insert(t.agent_id);
    const bool idempotent = clean(c, map) == c;
    msg << "kept {";
    for (auto id : kept) msg << ' ' << id;
    msg << " }, idempotent " << (idempotent ? "yes" : "no");
    return kept == std::set<std::int64_t>{1, 2, 6, 8} && idempotent;
}

// ---------------------------------------------------------------- 7

bool noise_properties(std::ostream& msg) {
    const auto map = build_freeway_map(3, 1000, 3.6, "freeway-3l");
    auto scenario = [&](std::uint64_t seed) {
        SynthConfig c;
        c.seed = seed;
        return generate_scenario(c, map, "n" + std::to_string(seed));
    };

    bool identity = true;
    for (std::uint64_t s = 0; s < 5; ++s) {
        const auto clean_s = scenario(s);
        auto out = corrupt(clean_s, NoiseConfig{});
        out.provenance = Provenance::clean;
        identity &= out == clean_s;
    }

    NoiseConfig drop;
    drop.dropout_rate = 0.1;
    drop.seed = 4;
    std::size_t frames = 0, dropped = 0;
    for (std::uint64_t s = 100; frames < 10000; ++s) {
        const auto c = scenario(s);
        for (const auto& t : corrupt(c, drop).tracks) {
            frames += t.states.size();
            dropped += t.states.size() - static_cast<std::size_t>(t.valid_count());
        }
    }
    const double drop_frac = static_cast<double>(dropped) / static_cast<double>(frames);

    NoiseConfig jit;
    jit.jitter_sigma_xy = 0.1;
    jit.seed = 8;
    double sum = 0, sum2 = 0;
    std::size_t draws = 0;
    for (std::uint64_t s = 200; draws < 100000; ++s) {
        const auto c = scenario(s);
        const auto noisy = corrupt(c, jit);
        for (std::size_t i = 0; i < c.tracks.size(); ++i)
            for (std::size_t f = 0; f < c.tracks[i].states.size(); ++f)
                for (double d : {noisy.tracks[i].states[f].x - c.tracks[i].states[f].x, noisy.tracks[i].states[f].y - c.tracks[i].states[f].y}) {
                    sum += d;
                    sum2 += d * d;
                    ++draws;
                }
    }
    const double mean = sum / static_cast<double>(draws);
    const double sd = std::sqrt(sum2 / static_cast<double>(draws) - mean * mean);

    NoiseConfig full{0.1, 0.02, 0.05, 0.3, 5.0, 0.2, 77};
    bool deterministic = true;
    for (std::uint64_t s = 300; s < 310; ++s) {
        const auto c = scenario(s);
        deterministic &= to_json(corrupt(c, full)).dump() == to_json(corrupt(c, full)).dump();
    }
    msg << "identity " << (identity ? "yes" : "no") << ", dropout " << num(drop_frac, 4) << " vs 0.1 over " << frames
        << " frames, jitter sd " << num(sd, 5) << " over " << draws << " draws, deterministic " << (deterministic ? "yes" : "no");
    return identity && std::abs(drop_frac - 0.1) <= 0.02 && sd >= 0.097 && sd <= 0.103 && deterministic;
}

// ---------------------------------------------------------------- 8

bool metrics_properties(std::ostream& msg) {
    const auto map = build_freeway_map(3, 1000, 3.6, "freeway-3l");
    std::vector<Scenario> split;
    for (int i = 0; i < 100; ++i) {
        SynthConfig c;
        c.seed = SeedBuilder(808).add(static_cast<std::uint64_t>(i)).seed();
        c.wave_mode = i % 2 == 1;
        auto s = generate_scenario(c, map, "m" + std::to_string(i));
        s.split = SplitTag::test;
        split.push_back(std::move(s));
    }
    std::vector<EvalItem> items;
    for (const auto& s : split) items.push_back({&s, &map});
    MetricsConfig cfg;
    cfg.k_rollouts = 2;
    const auto replay = evaluate(items, ReplayPolicy{}, cfg, 1).aggregate;
    const auto cv = evaluate(items, ConstantSpeedPolicy{}, cfg, 1).aggregate;
    const bool dominates = replay.realism >= cv.realism && replay.kinematic >= cv.kinematic &&
                           replay.interactive >= cv.interactive && replay.map_based >= cv.map_based;

    const HistogramSpec two{0.0, 1.0, 2};
    const std::vector<double> sim(10, 0.25), gt0(4, 0.1), gt1(4, 0.9);
    const double h0 = histogram_likelihood(sim, gt0, two, 0.1);
    const double h1 = histogram_likelihood(sim, gt1, two, 0.1);
    Rng rng(12);
    std::vector<double> us, ug;
    for (int i = 0; i < 50000; ++i) {
        us.push_back(rng.uniform());
        ug.push_back(rng.uniform());
    }
    const double hu = histogram_likelihood(us, ug, two, 0.1);
    msg << "replay minADE " << replay.min_ade << ", replay/const realism " << num(replay.realism, 4) << '/' << num(cv.realism, 4)
        << " kinematic " << num(replay.kinematic, 4) << '/' << num(cv.kinematic, 4) << " interactive " << num(replay.interactive, 4)
        << '/' << num(cv.interactive, 4) << " map " << num(replay.map_based, 4) << '/' << num(cv.map_based, 4)
        << "; histogram " << num(h0, 7) << ", " << num(h1, 7) << ", " << num(hu, 4);
    return replay.min_ade == 0.0 && dominates && std::abs(h0 - 0.990196) <= 1e-6 && std::abs(h1 - 0.009804) <= 1e-6 &&
           std::abs(hu - 0.5) <= 0.02;
}

// ---------------------------------------------------------------- 9

double min_ade_of(const fs::path& report) { return metrics_report_from_json(nlohmann::json::parse(slurp(report))).aggregate.min_ade; }

bool end_to_end(std::ostream& msg) {
    const fs::path cfg_path = NOISESIM_EXPERIMENT_CONFIG;
    const fs::path work = fs::current_path() / "acceptance_e2e";
    fs::remove_all(work);
    fs::create_directories(work);
    const std::string cfg = cfg_path.string();
    auto w = [&](const std::string& name) { return (work / name).string(); };
    const auto t0 = Clock::now();

    if (run({"synth", "--config", cfg, "--out", w("clean")}) != 0) throw Error("stage-failed", "synth");
    if (run({"corrupt", "--config", cfg, "--out", w("noisy"), w("clean")}) != 0) throw Error("stage-failed", "corrupt");
    if (run({"clean", "--config", cfg, "--out", w("cleaned"), w("noisy")}) != 0) throw Error("stage-failed", "clean");
    fs::remove_all(w("noisy"));
    if (run({"vocab", "--config", cfg, "--out", w("vocab.json"), w("cleaned")}) != 0) throw Error("stage-failed", "vocab");
    std::cerr << "[acceptance] corpus ready after " << num(seconds_since(t0), 4) << " s\n";

    if (run({"eval", "--config", cfg, "--policy", "idm", "--out", w("idm.json"), w("cleaned")}) != 0) throw Error("stage-failed", "eval idm");
    if (run({"eval", "--config", cfg, "--policy", "const", "--out", w("const.json"), w("cleaned")}) != 0)
        throw Error("stage-failed", "eval const");
    const double idm = min_ade_of(w("idm.json"));
    const double cv = min_ade_of(w("const.json"));

    std::map<std::string, std::vector<double>> ade;
    for (const std::string loss : {"ce", "ls", "focal", "sce"}) {
        for (const std::string seed : {"1", "2", "3"}) {
            const std::string tag = loss + "_s" + seed;
            if (run({"train", "--config", cfg, "--vocab", w("vocab.json"), "--loss", loss, "--seed", seed, "--out", w(tag), w("cleaned")}) != 0)
                throw Error("stage-failed", "train " + tag);
            if (run({"eval", "--config", cfg, "--policy", "learned", "--checkpoint", w(tag) + "/policy.ckpt", "--vocab", w("vocab.json"),
                     "--out", w(tag + ".json"), w("cleaned")}) != 0)
                throw Error("stage-failed", "eval " + tag);
            ade[loss].push_back(min_ade_of(w(tag + ".json")));
            std::cerr << "[acceptance] " << tag << " minADE " << num(ade[loss].back(), 5) << " after " << num(seconds_since(t0), 4) << " s\n";
        }
    }

    bool beats_baselines = true;
    std::map<std::string, double> mean;
    for (const auto& [loss, v] : ade) {
        double s = 0;
        for (double a : v) {
            s += a;
            beats_baselines &= a < idm && a < cv;
        }
        mean[loss] = s / static_cast<double>(v.size());
    }
    const bool ordering = mean["ls"] <= mean["ce"] && mean["focal"] <= mean["ce"] && mean["sce"] <= mean["ce"];

    nlohmann::json summary = {{"idm", idm}, {"const", cv}, {"per_seed", ade}, {"mean", mean}, {"seconds", seconds_since(t0)}};
    std::ofstream(work / "summary.json") << summary.dump(2) << '\n';

    msg << "minADE idm " << num(idm, 4) << ", const " << num(cv, 4) << "; means";
    for (const auto& [loss, m] : mean) msg << ' ' << loss << ' ' << num(m, 4);
    msg << " (per seed";
    for (const auto& [loss, v] : ade) {
        msg << ' ' << loss;
        for (double a : v) msg << ' ' << num(a, 4);
    }
    msg << "); learned beat both baselines: " << (beats_baselines ? "yes" : "no") << ", noise-aware <= CE: " << (ordering ? "yes" : "no")
        << "; " << num(seconds_since(t0) / 60.0, 3) << " min";
    return beats_baselines && ordering;
}

// ---------------------------------------------------------------- 10

bool determinism(std::ostream& msg) {
    const fs::path work = fs::current_path() / "acceptance_determinism";
    fs::remove_all(work);
    fs::create_directories(work);
    const fs::path cfg = work / "config.json";
    std::ofstream(cfg) << nlohmann::json{{"seed", 4},
                                         {"corpus", {{"scenarios", 40}}},
                                         {"synth", {{"vehicle_count", 10}, {"length", 800.0}}},
                                         {"noise", {{"jitter_sigma_xy", 0.1}, {"dropout_rate", 0.05}, {"occlusion_rate", 0.2}, {"fragmentation_rate", 0.1}}},
                                         {"tokenizer", {{"vocab_size", 128}}},
                                         {"train", {{"epochs", 2}, {"samples_per_epoch", 4000}}},
                                         {"metrics", {{"k_rollouts", 4}}}}
                              .dump(2);

    auto pipeline = [&](const std::string& name, const std::string& jobs) {
        const fs::path d = work / name;
        auto p = [&](const std::string& n) { return (d / n).string(); };
        const std::string c = cfg.string();
        int rc = 0;
        rc |= run({"synth", "--config", c, "--jobs", jobs, "--out", p("clean")});
        rc |= run({"corrupt", "--config", c, "--jobs", jobs, "--out", p("noisy"), p("clean")});
        rc |= run({"clean", "--config", c, "--jobs", jobs, "--out", p("cleaned"), p("noisy")});
        rc |= run({"vocab", "--config", c, "--jobs", jobs, "--out", p("vocab.json"), p("cleaned")});
        rc |= run({"train", "--config", c, "--jobs", jobs, "--vocab", p("vocab.json"), "--loss", "sce", "--out", p("model"), p("cleaned")});
        rc |= run({"eval", "--config", c, "--jobs", jobs, "--policy", "learned", "--checkpoint", p("model/policy.ckpt"), "--vocab",
                   p("vocab.json"), "--out", p("learned.json"), p("cleaned")});
        rc |= run({"eval", "--config", c, "--jobs", jobs, "--policy", "idm", "--out", p("idm.json"), p("cleaned")});
        if (rc != 0) throw Error("stage-failed", "determinism pipeline with --jobs " + jobs);
        return d;
    };
    const auto a = pipeline("jobs1", "1");
    const auto b = pipeline("jobs2", "2");
    const auto repeat = pipeline("repeat", "1");

    std::size_t compared = 0;
    std::vector<std::string> differing;
    for (const auto& e : fs::recursive_directory_iterator(a)) {
        if (!e.is_regular_file()) continue;
        const auto rel = fs::relative(e.path(), a);
        if (rel.filename() == "train_log.jsonl") continue;  // carries wall-clock times
        ++compared;
        for (const auto& other : {b, repeat})
            if (!fs::exists(other / rel) || slurp(e.path()) != slurp(other / rel)) differing.push_back(rel.string());
    }
    msg << compared << " files compared across --jobs 1, --jobs 2 and a repeat run, " << differing.size() << " differ";
    for (const auto& d : differing) msg << ' ' << d;
    return compared > 0 && differing.empty();
}

}  // namespace

int main(int argc, char** argv) {
    if (!std::getenv("NOISESIM_LOG")) setenv("NOISESIM_LOG", "warn", 1);
    const std::vector<std::pair<std::string, std::function<bool(std::ostream&)>>> criteria{
        {"loss reductions exact", loss_reductions},
        {"analytic loss values", analytic_losses},
        {"gradient checks", gradient_checks},
        {"IDM physics", idm_physics},
        {"tokenizer coverage", tokenizer_coverage},
        {"cleaning planted violations", cleaning_planted},
        {"noise model", noise_properties},
        {"metrics", metrics_properties},
        {"end-to-end ordering", end_to_end},
        {"determinism", determinism},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i + 1);
        if (!selected.empty() && !selected.count(id)) continue;
        std::ostringstream detail;
        bool ok = false;
        try {
            ok = criteria[i].second(detail);
        } catch (const std::exception& e) {
            detail << "exception: " << e.what();
        }
        failures += !ok;
        std::cout << (ok ? "PASS" : "FAIL") << " criterion " << id << " (" << criteria[i].first << "): " << detail.str() << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
