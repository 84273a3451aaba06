#include "noisesim/training.hpp"

#include "json_fields.hpp"

#include "noisesim/error.hpp"
#include "noisesim/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace noisesim {

NOISESIM_JSON_FIELDS(TrainConfig, learning_rate, batch_size, epochs, adam_beta1, adam_beta2,
                                                adam_epsilon, clip_norm, patience, samples_per_epoch, hidden1, hidden2,
                                                embed_dim, seed)

nlohmann::json to_json(const EpochLog& e) {
    return {{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_loss", e.val_loss}, {"wall_time", e.wall_time}};
}

void SampleSet::reserve(std::size_t n) {
    tokens.conservativeResize(kHistoryTokens, static_cast<Eigen::Index>(std::max(n, size())));
    numeric.conservativeResize(kNumericFeatures, static_cast<Eigen::Index>(std::max(n, size())));
    targets.reserve(n);
}

void SampleSet::append(const PolicyContext& ctx, int target) {
    const auto col = static_cast<Eigen::Index>(targets.size());
    if (col >= numeric.cols()) reserve(std::max<std::size_t>(1024, 2 * targets.size()));
    for (int k = 0; k < kHistoryTokens; ++k) tokens(k, col) = ctx.history[static_cast<std::size_t>(k)];
    numeric.col(col) = ctx.numeric;
    targets.push_back(target);
}

void SampleSet::append(const SampleSet& other) {
    const auto n = static_cast<Eigen::Index>(size());
    const auto m = static_cast<Eigen::Index>(other.size());
    tokens.conservativeResize(kHistoryTokens, n + m);
    numeric.conservativeResize(kNumericFeatures, n + m);
    tokens.rightCols(m) = other.tokens.leftCols(m);
    numeric.rightCols(m) = other.numeric.leftCols(m);
    targets.insert(targets.end(), other.targets.begin(), other.targets.end());
}

ContextBatch SampleSet::gather(std::span<const std::size_t> columns) const {
    ContextBatch b{Eigen::MatrixXi(kHistoryTokens, static_cast<Eigen::Index>(columns.size())),
                   Eigen::MatrixXd(kNumericFeatures, static_cast<Eigen::Index>(columns.size()))};
    for (std::size_t i = 0; i < columns.size(); ++i) {
        const auto src = static_cast<Eigen::Index>(columns[i]);
        b.tokens.col(static_cast<Eigen::Index>(i)) = tokens.col(src);
        b.numeric.col(static_cast<Eigen::Index>(i)) = numeric.col(src);
    }
    return b;
}

SampleSet build_samples(std::span<const Scenario> scenarios, const RoadMap& map, const TokenVocab& vocab) {
    const int p = vocab.period_frames();
    if (kCurrentFrame % p != 0) throw Error("bad-token-period", "period must divide the history length");
    const RoadGeometry geo(map);
    const int unknown = vocab.size();
    SampleSet out;

    for (const auto& sc : scenarios) {
        const std::size_t n = sc.tracks.size();
        // tokens[i][j]: pair (j*p -> (j+1)*p) of track i, or unknown
        std::vector<std::vector<int>> tokens(n);
        for (std::size_t i = 0; i < n; ++i)
            for (const auto& d : track_deltas(sc.tracks[i], p)) tokens[i].push_back(d ? encode_delta(*d, vocab) : unknown);

        for (int a = 0; a + p < kNumFrames; a += p) {
            const int pair = a / p;
            std::vector<AgentSnapshot> snaps;
            std::vector<std::size_t> owner;
            for (std::size_t i = 0; i < n; ++i) {
                const auto& states = sc.tracks[i].states;
                const auto& cur = states[static_cast<std::size_t>(a)];
                if (!cur.valid) continue;
                AgentSnapshot s;
                s.agent_id = sc.tracks[i].agent_id;
                s.position = cur.xy();
                s.heading = cur.heading;
                // earliest valid frame in the last token period
                for (int back = std::min(p, a); back >= 1; --back) {
                    const auto& prev = states[static_cast<std::size_t>(a - back)];
                    if (!prev.valid) continue;
                    s.velocity = (cur.xy() - prev.xy()) / (back * kFrameDt);
                    break;
                }
                for (int k = 0; k < kHistoryTokens; ++k) {
                    const int j = pair - kHistoryTokens + k;
                    s.history[static_cast<std::size_t>(k)] = j >= 0 ? tokens[i][static_cast<std::size_t>(j)] : unknown;
                }
                snaps.push_back(s);
                owner.push_back(i);
            }
            for (std::size_t k = 0; k < snaps.size(); ++k) {
                const int target = tokens[owner[k]][static_cast<std::size_t>(pair)];
                if (target == unknown) continue;
                out.append(build_context(snaps, k, geo), target);
            }
        }
    }
    out.tokens.conservativeResize(kHistoryTokens, static_cast<Eigen::Index>(out.size()));
    out.numeric.conservativeResize(kNumericFeatures, static_cast<Eigen::Index>(out.size()));
    return out;
}

namespace {

/// Mean loss over the batch and d(mean loss)/d logits.
double batch_loss(const LossSpec& loss, const Eigen::MatrixXd& logits, std::span<const int> targets, Eigen::MatrixXd* dlogits) {
    const auto n = logits.cols();
    double total = 0.0;
    if (dlogits) dlogits->resize(logits.rows(), n);
    for (Eigen::Index b = 0; b < n; ++b) {
        const auto r = evaluate_loss(loss, logits.col(b), targets[static_cast<std::size_t>(b)]);
        total += r.loss;
        if (dlogits) dlogits->col(b) = r.grad / static_cast<double>(n);
    }
    return total / static_cast<double>(n);
}

struct Adam {
    Eigen::VectorXd m, v;
    long step = 0;

    void update(Eigen::VectorXd& theta, const Eigen::VectorXd& grad, const TrainConfig& c) {
        if (m.size() != theta.size()) {
            m = Eigen::VectorXd::Zero(theta.size());
            v = Eigen::VectorXd::Zero(theta.size());
        }
        ++step;
        m = c.adam_beta1 * m + (1.0 - c.adam_beta1) * grad;
        v = c.adam_beta2 * v + (1.0 - c.adam_beta2) * grad.cwiseAbs2();
        const double bc1 = 1.0 - std::pow(c.adam_beta1, static_cast<double>(step));
        const double bc2 = 1.0 - std::pow(c.adam_beta2, static_cast<double>(step));
        theta.array() -= c.learning_rate * (m.array() / bc1) / ((v.array() / bc2).sqrt() + c.adam_epsilon);
    }
};

}  // namespace

double mean_loss(const PolicyParameters& params, const SampleSet& samples, const LossSpec& loss) {
    if (samples.size() == 0) throw Error("no-samples");
    constexpr std::size_t chunk = 4096;
    double total = 0.0;
    std::vector<std::size_t> cols;
    for (std::size_t start = 0; start < samples.size(); start += chunk) {
        const std::size_t end = std::min(samples.size(), start + chunk);
        cols.resize(end - start);
        std::iota(cols.begin(), cols.end(), start);
        const auto logits = policy_forward(params, samples.gather(cols));
        total += batch_loss(loss, logits, std::span(samples.targets).subspan(start, end - start), nullptr) *
                 static_cast<double>(end - start);
    }
    return total / static_cast<double>(samples.size());
}

TrainResult train(const SampleSet& train_set, const SampleSet& val_set, const TokenVocab& vocab, const LossSpec& loss,
                  const TrainConfig& config) {
    if (!config.valid()) throw Error("bad-config", "invalid TrainConfig");
    if (!loss.valid()) throw Error("bad-config", "invalid LossSpec");
    if (train_set.size() == 0 || val_set.size() == 0) throw Error("no-samples");

    PolicyArch arch;
    arch.vocab_size = vocab.size();
    arch.hidden1 = config.hidden1;
    arch.hidden2 = config.hidden2;
    arch.embed_dim = config.embed_dim;
    TrainResult result;
    result.params = init_policy(arch, config.seed);
    result.params.vocab_hash = vocab.hash();
    PolicyParameters best = result.params;
    double best_val = INFINITY;
    int stale = 0;

    Adam adam;
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<std::size_t> order(train_set.size());
    std::vector<int> targets;
    Eigen::MatrixXd dlogits;
    ForwardCache cache;
    bool first_batch = true;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        Rng rng(SeedBuilder(config.seed).add("epoch").add(static_cast<std::uint64_t>(epoch)).seed());
        rng.shuffle(order.begin(), order.end());
        std::size_t used = order.size();
        if (config.samples_per_epoch > 0) used = std::min(used, static_cast<std::size_t>(config.samples_per_epoch));

        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < used; start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end = std::min(used, start + static_cast<std::size_t>(config.batch_size));
            const std::span<const std::size_t> cols(order.data() + start, end - start);
            targets.clear();
            for (auto c : cols) targets.push_back(train_set.targets[c]);

            const auto logits = policy_forward(result.params, train_set.gather(cols), &cache);
            const double l = batch_loss(loss, logits, targets, &dlogits);
            if (!std::isfinite(l)) throw Error("diverged", "epoch " + std::to_string(epoch));
            if (first_batch) {
                result.initial_batch_loss = l;
                first_batch = false;
            }
            epoch_loss += l * static_cast<double>(cols.size());

            Eigen::VectorXd grad = policy_backward(result.params, cache, dlogits);
            const double norm = grad.norm();
            if (norm > config.clip_norm) grad *= config.clip_norm / norm;
            adam.update(result.params.theta, grad, config);
        }
        epoch_loss /= static_cast<double>(used);
        const double val = mean_loss(result.params, val_set, loss);
        if (!std::isfinite(val)) throw Error("diverged", "epoch " + std::to_string(epoch));
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.log.push_back({epoch, epoch_loss, val, wall});

        if (val < best_val) {
            best_val = val;
            best = result.params;
            result.best_epoch = epoch;
            stale = 0;
        } else if (++stale >= config.patience) {
            break;
        }
    }
    result.params = std::move(best);
    return result;
}

namespace {

double relative_error(const Eigen::VectorXd& analytic, const Eigen::VectorXd& numeric) {
    const double scale = std::max({analytic.norm(), numeric.norm(), 1e-300});
    return (analytic - numeric).norm() / scale;
}

}  // namespace

double grad_check(const LossSpec& loss, int trials, std::uint64_t seed, int classes) {
    if (trials < 1 || classes < 1) throw Error("bad-argument", "trials and classes must be positive");
    constexpr double h = 1e-5;
    Rng rng(SeedBuilder(seed).add("grad_check").add(static_cast<std::uint64_t>(loss.kind)).seed());
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
        Eigen::VectorXd z(classes);
        for (auto& v : z) v = 2.0 * rng.normal();
        const int target = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
        const auto analytic = evaluate_loss(loss, z, target).grad;
        Eigen::VectorXd numeric(classes);
        for (int i = 0; i < classes; ++i) {
            Eigen::VectorXd zp = z, zm = z;
            zp(i) += h;
            zm(i) -= h;
            numeric(i) = (evaluate_loss(loss, zp, target).loss - evaluate_loss(loss, zm, target).loss) / (2 * h);
        }
        worst = std::max(worst, relative_error(analytic, numeric));
    }
    return worst;
}

double grad_check_policy(int trials, std::uint64_t seed, const PolicyArch& arch) {
    if (trials < 1) throw Error("bad-argument", "trials must be positive");
    constexpr double h = 1e-5;
    constexpr int coords_per_probe = 96;
    Rng rng(SeedBuilder(seed).add("grad_check_policy").seed());
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
        PolicyParameters params = init_policy(arch, rng.next_u64());
        // Random output layer too, so every block carries gradient.
        for (auto& v : params.theta) v += 0.05 * rng.normal();
        PolicyContext ctx;
        for (auto& tok : ctx.history) tok = static_cast<int>(rng.below(static_cast<std::uint64_t>(arch.vocab_size + 1)));
        for (auto& v : ctx.numeric) v = rng.normal();
        Eigen::VectorXd w(arch.vocab_size);
        for (auto& v : w) v = rng.normal();

        const auto batch = make_batch(std::span(&ctx, 1));
        ForwardCache cache;
        policy_forward(params, batch, &cache);
        const Eigen::VectorXd analytic_full = policy_backward(params, cache, w);
        auto objective = [&](const PolicyParameters& p) { return w.dot(policy_forward(p, batch).col(0)); };

        // Probe coordinates: the embedding columns in use plus a random spread.
        std::vector<Eigen::Index> coords;
        for (int k = 0; k < kHistoryTokens; ++k)
            for (int e = 0; e < arch.embed_dim; ++e)
                coords.push_back(static_cast<Eigen::Index>(ctx.history[static_cast<std::size_t>(k)]) * arch.embed_dim + e);
        for (int i = 0; i < coords_per_probe; ++i)
            coords.push_back(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(params.theta.size()))));

        Eigen::VectorXd analytic(static_cast<Eigen::Index>(coords.size()));
        Eigen::VectorXd numeric(static_cast<Eigen::Index>(coords.size()));
        for (std::size_t i = 0; i < coords.size(); ++i) {
            const auto c = coords[i];
            const double saved = params.theta(c);
            params.theta(c) = saved + h;
            const double up = objective(params);
            params.theta(c) = saved - h;
            const double down = objective(params);
            params.theta(c) = saved;
            analytic(static_cast<Eigen::Index>(i)) = analytic_full(c);
            numeric(static_cast<Eigen::Index>(i)) = (up - down) / (2 * h);
        }
        worst = std::max(worst, relative_error(analytic, numeric));
    }
    return worst;
}

}  // namespace noisesim
