#include "noisesim/policy.hpp"

#include "json_fields.hpp"

#include "noisesim/error.hpp"
#include "noisesim/rng.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace noisesim {

NOISESIM_JSON_FIELDS(PolicyArch, vocab_size, embed_dim, history_tokens, numeric_dim, hidden1,
                                                hidden2, activation)

namespace {

// Feature scales keep inputs roughly unit-sized.
constexpr double kSpeedScale = 30.0;
constexpr double kHeadingScale = 5.0;
constexpr double kLaneOffsetScale = 1.8;
constexpr double kEdgeScale = 5.0;
constexpr double kNeighborLonScale = 50.0;
constexpr double kNeighborLatScale = 5.0;
constexpr double kNeighborSpeedScale = 10.0;

struct Layout {
    Eigen::Index emb, w1, b1, w2, b2, w3, b3, end;

    explicit Layout(const PolicyArch& a) {
        emb = 0;
        w1 = emb + static_cast<Eigen::Index>(a.embed_dim) * (a.vocab_size + 1);
        b1 = w1 + static_cast<Eigen::Index>(a.hidden1) * a.input_dim();
        w2 = b1 + a.hidden1;
        b2 = w2 + static_cast<Eigen::Index>(a.hidden2) * a.hidden1;
        w3 = b2 + a.hidden2;
        b3 = w3 + static_cast<Eigen::Index>(a.vocab_size) * a.hidden2;
        end = b3 + a.vocab_size;
    }
};

template <typename Vector>
struct Views {
    using Scalar = typename std::remove_reference_t<Vector>::Scalar;
    using Mat = std::conditional_t<std::is_const_v<std::remove_reference_t<Vector>>,
                                   Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic>>,
                                   Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic>>>;
    using VecMap = std::conditional_t<std::is_const_v<std::remove_reference_t<Vector>>,
                                      Eigen::Map<const Eigen::VectorXd>, Eigen::Map<Eigen::VectorXd>>;
    Mat emb, w1, w2, w3;
    VecMap b1, b2, b3;

    Views(Vector& theta, const PolicyArch& a, const Layout& l)
        : emb(theta.data() + l.emb, a.embed_dim, a.vocab_size + 1),
          w1(theta.data() + l.w1, a.hidden1, a.input_dim()),
          w2(theta.data() + l.w2, a.hidden2, a.hidden1),
          w3(theta.data() + l.w3, a.vocab_size, a.hidden2),
          b1(theta.data() + l.b1, a.hidden1),
          b2(theta.data() + l.b2, a.hidden2),
          b3(theta.data() + l.b3, a.vocab_size) {}
};

void check_shapes(const PolicyParameters& params) {
    const auto& a = params.arch;
    if (a.vocab_size < 1 || a.embed_dim < 1 || a.hidden1 < 1 || a.hidden2 < 1 || a.history_tokens != kHistoryTokens ||
        a.numeric_dim != kNumericFeatures || a.activation != "tanh")
        throw Error("shape-mismatch", "unsupported architecture");
    if (params.theta.size() != a.parameter_count())
        throw Error("shape-mismatch", "theta has " + std::to_string(params.theta.size()) + " entries, architecture needs " +
                                          std::to_string(a.parameter_count()));
}

}  // namespace

Eigen::Index PolicyArch::parameter_count() const { return Layout(*this).end; }

PolicyParameters init_policy(const PolicyArch& arch, std::uint64_t seed) {
    PolicyParameters params{arch, Eigen::VectorXd::Zero(arch.parameter_count()), 0};
    check_shapes(params);
    const Layout layout(arch);
    Views<Eigen::VectorXd> v(params.theta, arch, layout);
    Rng rng(SeedBuilder(seed).add("init_policy").seed());
    auto fill = [&rng](auto& m, double bound) {
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = rng.uniform(-bound, bound);
    };
    fill(v.emb, 0.1);
    fill(v.w1, std::sqrt(6.0 / (arch.input_dim() + arch.hidden1)));
    fill(v.w2, std::sqrt(6.0 / (arch.hidden1 + arch.hidden2)));
    return params;
}

PolicyContext build_context(std::span<const AgentSnapshot> agents, std::size_t ego, const RoadGeometry& geometry) {
    const auto& me = agents[ego];
    PolicyContext ctx;
    ctx.history = me.history;
    auto& f = ctx.numeric;

    const RoadFrame rf = geometry.frame(me.position);
    f(0) = me.velocity.norm() / kSpeedScale;
    f(1) = wrap_angle(me.heading - rf.lane_heading) * kHeadingScale;
    f(2) = rf.lateral_offset / kLaneOffsetScale;
    f(3) = rf.edge_distance / kEdgeScale;

    std::vector<std::pair<double, std::size_t>> order;
    order.reserve(agents.size());
    for (std::size_t j = 0; j < agents.size(); ++j)
        if (j != ego) order.emplace_back((agents[j].position - me.position).norm(), j);
    const auto keep = std::min<std::size_t>(order.size(), kMaxNeighbors);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(), [&](const auto& a, const auto& b) {
        return a.first != b.first ? a.first < b.first : agents[a.second].agent_id < agents[b.second].agent_id;
    });

    const double c = std::cos(me.heading);
    const double s = std::sin(me.heading);
    auto to_ego = [&](const Eigen::Vector2d& w) { return Eigen::Vector2d(c * w.x() + s * w.y(), -s * w.x() + c * w.y()); };
    for (std::size_t k = 0; k < keep; ++k) {
        const auto& other = agents[order[k].second];
        const Eigen::Vector2d rel = to_ego(other.position - me.position);
        const Eigen::Vector2d rel_v = to_ego(other.velocity - me.velocity);
        const auto base = static_cast<Eigen::Index>(kEgoFeatures + k * kNeighborFeatures);
        f(base + 0) = rel.x() / kNeighborLonScale;
        f(base + 1) = rel.y() / kNeighborLatScale;
        f(base + 2) = rel_v.x() / kNeighborSpeedScale;
        f(base + 3) = 1.0;
    }
    return ctx;
}

ContextBatch make_batch(std::span<const PolicyContext> contexts) {
    ContextBatch batch{Eigen::MatrixXi(kHistoryTokens, static_cast<Eigen::Index>(contexts.size())),
                       Eigen::MatrixXd(kNumericFeatures, static_cast<Eigen::Index>(contexts.size()))};
    for (std::size_t i = 0; i < contexts.size(); ++i) {
        const auto col = static_cast<Eigen::Index>(i);
        for (int k = 0; k < kHistoryTokens; ++k) batch.tokens(k, col) = contexts[i].history[static_cast<std::size_t>(k)];
        if (contexts[i].numeric.size() != kNumericFeatures) throw Error("shape-mismatch", "context feature size");
        batch.numeric.col(col) = contexts[i].numeric;
    }
    return batch;
}

Eigen::MatrixXd policy_forward(const PolicyParameters& params, const ContextBatch& batch, ForwardCache* cache) {
    check_shapes(params);
    const auto& a = params.arch;
    if (batch.numeric.rows() != a.numeric_dim || batch.tokens.rows() != a.history_tokens ||
        batch.tokens.cols() != batch.numeric.cols())
        throw Error("shape-mismatch", "context batch");
    const Layout layout(a);
    const Views<const Eigen::VectorXd> v(params.theta, a, layout);
    const Eigen::Index n = batch.size();

    Eigen::MatrixXd input(a.input_dim(), n);
    for (Eigen::Index b = 0; b < n; ++b) {
        for (int k = 0; k < a.history_tokens; ++k) {
            const int tok = batch.tokens(k, b);
            if (tok < 0 || tok > a.vocab_size) throw Error("shape-mismatch", "token " + std::to_string(tok));
            input.col(b).segment(static_cast<Eigen::Index>(k) * a.embed_dim, a.embed_dim) = v.emb.col(tok);
        }
    }
    input.bottomRows(a.numeric_dim) = batch.numeric;

    Eigen::MatrixXd h1 = ((v.w1 * input).colwise() + v.b1).array().tanh().matrix();
    Eigen::MatrixXd h2 = ((v.w2 * h1).colwise() + v.b2).array().tanh().matrix();
    Eigen::MatrixXd logits = (v.w3 * h2).colwise() + v.b3;
    if (cache) {
        cache->input = std::move(input);
        cache->h1 = std::move(h1);
        cache->h2 = std::move(h2);
        cache->tokens = batch.tokens;
    }
    return logits;
}

Eigen::VectorXd policy_backward(const PolicyParameters& params, const ForwardCache& cache, const Eigen::MatrixXd& dlogits) {
    check_shapes(params);
    const auto& a = params.arch;
    if (dlogits.rows() != a.vocab_size || dlogits.cols() != cache.h2.cols()) throw Error("shape-mismatch", "dlogits");
    const Layout layout(a);
    const Views<const Eigen::VectorXd> v(params.theta, a, layout);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(a.parameter_count());
    Views<Eigen::VectorXd> g(grad, a, layout);

    g.w3.noalias() = dlogits * cache.h2.transpose();
    g.b3 = dlogits.rowwise().sum();
    const Eigen::MatrixXd dz2 = ((v.w3.transpose() * dlogits).array() * (1.0 - cache.h2.array().square())).matrix();
    g.w2.noalias() = dz2 * cache.h1.transpose();
    g.b2 = dz2.rowwise().sum();
    const Eigen::MatrixXd dz1 = ((v.w2.transpose() * dz2).array() * (1.0 - cache.h1.array().square())).matrix();
    g.w1.noalias() = dz1 * cache.input.transpose();
    g.b1 = dz1.rowwise().sum();
    const Eigen::MatrixXd dinput = v.w1.leftCols(static_cast<Eigen::Index>(a.history_tokens) * a.embed_dim).transpose() * dz1;
    for (Eigen::Index b = 0; b < dinput.cols(); ++b)
        for (int k = 0; k < a.history_tokens; ++k)
            g.emb.col(cache.tokens(k, b)) += dinput.col(b).segment(static_cast<Eigen::Index>(k) * a.embed_dim, a.embed_dim);
    return grad;
}

Eigen::VectorXd policy_logits(const PolicyParameters& params, const PolicyContext& context) {
    return policy_forward(params, make_batch(std::span(&context, 1))).col(0);
}

int sample_token(const Eigen::Ref<const Eigen::VectorXd>& logits, double temperature, Rng& rng) {
    if (logits.size() == 0) throw Error("bad-logits", "empty");
    if (!logits.allFinite()) throw Error("bad-logits", "non-finite");
    if (temperature <= 0.0) {
        Eigen::Index best = 0;
        for (Eigen::Index i = 1; i < logits.size(); ++i)
            if (logits(i) > logits(best)) best = i;
        return static_cast<int>(best);
    }
    const double m = logits.maxCoeff();
    const Eigen::VectorXd w = ((logits.array() - m) / temperature).exp().matrix();
    const double u = rng.uniform() * w.sum();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        acc += w(i);
        if (u < acc) return static_cast<int>(i);
    }
    // Rounding left u at the very top; take the last token with mass.
    for (Eigen::Index i = w.size() - 1; i >= 0; --i)
        if (w(i) > 0.0) return static_cast<int>(i);
    return 0;
}

void save_policy(const std::filesystem::path& path, const PolicyParameters& params) {
    check_shapes(params);
    std::ostringstream hash;
    hash << std::hex << params.vocab_hash;
    const nlohmann::json header = {{"format", "noisesim-policy"},
                                   {"version", 1},
                                   {"arch", params.arch},
                                   {"vocab_hash", hash.str()},
                                   {"parameter_count", params.theta.size()}};
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("io", "cannot write " + path.string());
    out << header.dump() << '\n';
    static_assert(std::endian::native == std::endian::little, "checkpoint writer assumes a little-endian host");
    out.write(reinterpret_cast<const char*>(params.theta.data()), static_cast<std::streamsize>(params.theta.size() * sizeof(double)));
    if (!out) throw Error("io", "write failed " + path.string());
}

PolicyParameters load_policy(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("io", "cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw Error("bad-checkpoint", e.what());
    }
    if (header.value("format", "") != "noisesim-policy" || header.value("version", 0) != 1) throw Error("bad-checkpoint", "header");
    PolicyParameters params;
    params.arch = header.at("arch").get<PolicyArch>();
    params.vocab_hash = std::stoull(header.at("vocab_hash").get<std::string>(), nullptr, 16);
    const auto n = header.at("parameter_count").get<Eigen::Index>();
    params.theta.resize(n);
    in.read(reinterpret_cast<char*>(params.theta.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (in.gcount() != static_cast<std::streamsize>(n * sizeof(double))) throw Error("bad-checkpoint", "truncated parameters");
    check_shapes(params);
    if (!params.theta.allFinite()) throw Error("bad-checkpoint", "non-finite parameters");
    return params;
}

}  // namespace noisesim
