#pragma once

#include "noisesim/error.hpp"

#include <Eigen/Core>

#include <cmath>
#include <string>
#include <string_view>

#include <json.hpp>

namespace noisesim {

enum class LossKind { ce, ce_label_smoothing, focal, symmetric_ce };

std::string_view to_string(LossKind k);
/// Accepts the long names and the CLI short forms ce|ls|focal|sce.
LossKind parse_loss_kind(std::string_view s);

struct LossSpec {
    LossKind kind = LossKind::ce;
    double epsilon_smooth = 0.1;
    double gamma = 2.0;
    double alpha = 1.0;
    double beta = 0.13;
    double eta = 0.0004;

    bool valid() const { return epsilon_smooth >= 0 && epsilon_smooth <= 1 && gamma >= 0 && eta > 0; }
};

void to_json(nlohmann::json& j, const LossSpec& s);
void from_json(const nlohmann::json& j, LossSpec& s);

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct LossResult {
    Scalar loss;
    Vec<Scalar> grad;  // d loss / d logits
};

/// Numerically stable softmax (max subtracted).
template <typename Derived>
Vec<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& logits) {
    using Scalar = typename Derived::Scalar;
    Vec<Scalar> p = (logits.array() - logits.maxCoeff()).exp().matrix();
    p /= p.sum();
    return p;
}

/// log softmax, computed without forming probabilities first.
template <typename Derived>
Vec<typename Derived::Scalar> log_softmax(const Eigen::MatrixBase<Derived>& logits) {
    using Scalar = typename Derived::Scalar;
    const Scalar m = logits.maxCoeff();
    const Scalar lse = m + std::log((logits.array() - m).exp().sum());
    return (logits.array() - lse).matrix();
}

namespace detail {
template <typename Derived>
void check_target(const Eigen::MatrixBase<Derived>& logits, int target) {
    if (target < 0 || target >= logits.size()) throw Error("bad-target", std::to_string(target));
}
}  // namespace detail

/// -log p_target; gradient p - onehot.
template <typename Derived>
LossResult<typename Derived::Scalar> loss_ce(const Eigen::MatrixBase<Derived>& logits, int target) {
    detail::check_target(logits, target);
    auto logp = log_softmax(logits);
    auto p = logp.array().exp().matrix().eval();
    p(target) -= 1;
    return {-logp(target), std::move(p)};
}

/// Cross-entropy against (1 - eps) onehot + eps / C.
template <typename Derived>
LossResult<typename Derived::Scalar> loss_label_smoothing(const Eigen::MatrixBase<Derived>& logits, int target,
                                                          typename Derived::Scalar epsilon) {
    using Scalar = typename Derived::Scalar;
    detail::check_target(logits, target);
    const auto C = static_cast<Scalar>(logits.size());
    const auto logp = log_softmax(logits);
    Vec<Scalar> y = Vec<Scalar>::Constant(logits.size(), epsilon / C);
    y(target) += Scalar(1) - epsilon;
    // Gradient is p - y because y sums to one.
    return {-y.dot(logp), (logp.array().exp().matrix() - y).eval()};
}

/// (1 - p_t)^gamma * (-log p_t).
template <typename Derived>
LossResult<typename Derived::Scalar> loss_focal(const Eigen::MatrixBase<Derived>& logits, int target,
                                                typename Derived::Scalar gamma) {
    using Scalar = typename Derived::Scalar;
    detail::check_target(logits, target);
    const auto logp = log_softmax(logits);
    const Vec<Scalar> p = logp.array().exp().matrix();
    const Scalar pt = p(target);
    const Scalar ce = -logp(target);
    const Scalar q = Scalar(1) - pt;
    // q^gamma and its derivative; q^0 == 1 even at q == 0.
    const Scalar w = gamma == Scalar(0) ? Scalar(1) : std::pow(q, gamma);
    const Scalar dw_dq = gamma == Scalar(0) ? Scalar(0) : (q > Scalar(0) ? gamma * std::pow(q, gamma - 1) : Scalar(0));

    // dL/dp_t = -dw/dq * ce - w / p_t;  dp_t/dz_j = p_t (onehot_j - p_j)
    // => dL/dz_j = (dw/dq * ce * p_t + w) (p_j - onehot_j)
    const Scalar coeff = dw_dq * ce * pt + w;
    Vec<Scalar> grad = coeff * p;
    grad(target) -= coeff;
    return {w * ce, std::move(grad)};
}

/// alpha * CE + beta * RCE, RCE = -sum_i p_i log(y_i + eta) with y = onehot.
template <typename Derived>
LossResult<typename Derived::Scalar> loss_symmetric_ce(const Eigen::MatrixBase<Derived>& logits, int target,
                                                       typename Derived::Scalar alpha, typename Derived::Scalar beta,
                                                       typename Derived::Scalar eta) {
    using Scalar = typename Derived::Scalar;
    detail::check_target(logits, target);
    const auto logp = log_softmax(logits);
    const Vec<Scalar> p = logp.array().exp().matrix();
    const Scalar log_on = std::log(Scalar(1) + eta);
    const Scalar log_off = std::log(eta);
    Vec<Scalar> r = Vec<Scalar>::Constant(logits.size(), -log_off);
    r(target) = -log_on;
    const Scalar rce = p.dot(r);
    // d rce / dz_j = p_j (r_j - rce)
    Vec<Scalar> grad = alpha * p + beta * (p.array() * (r.array() - rce)).matrix();
    grad(target) -= alpha;
    return {-alpha * logp(target) + beta * rce, std::move(grad)};
}

template <typename Derived>
LossResult<typename Derived::Scalar> evaluate_loss(const LossSpec& spec, const Eigen::MatrixBase<Derived>& logits,
                                                   int target) {
    using Scalar = typename Derived::Scalar;
    switch (spec.kind) {
        case LossKind::ce: return loss_ce(logits, target);
        case LossKind::ce_label_smoothing: return loss_label_smoothing(logits, target, Scalar(spec.epsilon_smooth));
        case LossKind::focal: return loss_focal(logits, target, Scalar(spec.gamma));
        case LossKind::symmetric_ce:
            return loss_symmetric_ce(logits, target, Scalar(spec.alpha), Scalar(spec.beta), Scalar(spec.eta));
    }
    throw Error("bad-loss");
}

}  // namespace noisesim
