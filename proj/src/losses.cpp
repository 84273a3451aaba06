#include "noisesim/losses.hpp"

namespace noisesim {

std::string_view to_string(LossKind k) {
    switch (k) {
        case LossKind::ce: return "ce";
        case LossKind::ce_label_smoothing: return "ce_label_smoothing";
        case LossKind::focal: return "focal";
        case LossKind::symmetric_ce: return "symmetric_ce";
    }
    return "ce";
}

LossKind parse_loss_kind(std::string_view s) {
    if (s == "ce") return LossKind::ce;
    if (s == "ls" || s == "ce_label_smoothing") return LossKind::ce_label_smoothing;
    if (s == "focal") return LossKind::focal;
    if (s == "sce" || s == "symmetric_ce") return LossKind::symmetric_ce;
    throw Error("bad-loss", std::string(s));
}

void to_json(nlohmann::json& j, const LossSpec& s) {
    j = {{"kind", to_string(s.kind)}, {"epsilon_smooth", s.epsilon_smooth}, {"gamma", s.gamma},
         {"alpha", s.alpha},          {"beta", s.beta},                     {"eta", s.eta}};
}

void from_json(const nlohmann::json& j, LossSpec& s) {
    const LossSpec d;
    s.kind = parse_loss_kind(j.value("kind", std::string(to_string(d.kind))));
    s.epsilon_smooth = j.value("epsilon_smooth", d.epsilon_smooth);
    s.gamma = j.value("gamma", d.gamma);
    s.alpha = j.value("alpha", d.alpha);
    s.beta = j.value("beta", d.beta);
    s.eta = j.value("eta", d.eta);
}

}  // namespace noisesim
