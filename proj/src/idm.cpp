#include "noisesim/idm.hpp"

#include "noisesim/error.hpp"

#include <algorithm>

namespace noisesim {

double idm_accel(double v, const std::optional<LeadVehicle>& lead, const IdmParams& p) {
    const double free_term = std::pow(v / p.v0, p.delta);
    double interaction = 0.0;
    if (lead) {
        if (!(lead->gap > 0.0)) throw Error("nonpositive-gap", std::to_string(lead->gap));
        const double dv = v - lead->v_lead;
        const double s_star = p.s0 + std::max(0.0, v * p.T + v * dv / (2.0 * std::sqrt(p.a * p.b)));
        interaction = (s_star / lead->gap) * (s_star / lead->gap);
    }
    return p.a * (1.0 - free_term - interaction);
}

}  // namespace noisesim
