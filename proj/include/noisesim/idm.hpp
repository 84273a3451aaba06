#pragma once

#include <cmath>
#include <optional>

namespace noisesim {

/// Intelligent Driver Model parameters.
struct IdmParams {
    double v0 = 30.0;    // desired speed, m/s
    double T = 1.5;      // time headway, s
    double a = 1.0;      // max acceleration, m/s^2
    double b = 1.5;      // comfortable deceleration, m/s^2
    double s0 = 2.0;     // jam distance, m
    double delta = 4.0;  // free-road exponent

    bool valid() const { return v0 > 0 && T > 0 && a > 0 && b > 0 && s0 > 0 && delta > 0; }
    friend bool operator==(const IdmParams&, const IdmParams&) = default;
};

struct LeadVehicle {
    double v_lead = 0.0;  // m/s
    double gap = 0.0;     // bumper-to-bumper, m
};

/// a * [1 - (v/v0)^delta - (s*/s)^2], s* = s0 + vT + v*dv / (2 sqrt(ab)).
/// Throws Error("nonpositive-gap") when a lead is present with gap <= 0.
double idm_accel(double v, const std::optional<LeadVehicle>& lead, const IdmParams& p);

/// Steady-state gap at speed v behind a leader at the same speed
/// (closed form; infinite for v >= v0).
inline double idm_equilibrium_gap(double v, const IdmParams& p) {
    const double free = 1.0 - std::pow(v / p.v0, p.delta);
    if (free <= 0.0) return INFINITY;
    return (p.s0 + v * p.T) / std::sqrt(free);
}

}  // namespace noisesim
