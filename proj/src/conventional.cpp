#include "gridmpc/conventional.hpp"

#include <algorithm>
#include <cmath>

#include "gridmpc/linalg.hpp"

namespace gridmpc {

void ConventionalParams::validate() const {
    if (!(std::isfinite(droop_s) && droop_s > 0.0)) {
        throw Error("conventional: droop S must be > 0");
    }
    if (!(std::isfinite(t_n) && t_n > 0.0)) {
        throw Error("conventional: t_n must be > 0");
    }
    if (!(std::isfinite(c_p) && c_p >= 0.0)) {
        throw Error("conventional: c_p must be >= 0");
    }
    if (!(std::isfinite(bias_b) && bias_b > 0.0)) {
        throw Error("conventional: bias B must be > 0");
    }
    if (!(secondary_limit > 0.0)) {
        throw Error("conventional: secondary_limit must be > 0");
    }
}

double droop_per_unit(double delta_f_hz, double delta_p_mw, double base_power_mw) {
    if (!(delta_p_mw > 0.0 && base_power_mw > 0.0 && delta_f_hz > 0.0)) {
        throw Error("droop_per_unit: arguments must be > 0");
    }
    return delta_f_hz / (delta_p_mw / base_power_mw);
}

double natural_bias(double load_damping, double droop_s) { return 1.0 / load_damping + 1.0 / droop_s; }

double primary_power(double delta_f_hz, const ConventionalParams& params) { return -delta_f_hz / params.droop_s; }

double area_control_error(double delta_f_hz, double tie_deviation, const ConventionalParams& params) {
    return tie_deviation + params.bias_b * delta_f_hz;
}

SecondaryOutput secondary_step(const ConventionalState& state, double ace, double dt, const ConventionalParams& params) {
    if (!(dt > 0.0)) {
        throw Error("secondary_step: dt must be > 0");
    }
    SecondaryOutput out;
    out.state.ace_integral = state.ace_integral + ace * dt;
    double u = -params.c_p * ace - out.state.ace_integral / params.t_n;
    if (std::abs(u) > params.secondary_limit) {
        out.saturated = true;
        out.state = state;
        u = -params.c_p * ace - out.state.ace_integral / params.t_n;
    }
    out.u = std::clamp(u, -params.secondary_limit, params.secondary_limit);
    return out;
}

}  // namespace gridmpc
