#pragma once

namespace gridmpc {

// Primary droop plus secondary PI on the area control error, all in the
// area's per-unit frame.
struct ConventionalParams {
    double droop_s = 0.2 / (3000.0 / 370000.0);  // S [Hz per p.u.]
    double t_n = 240.0;                           // integral time [s]
    double c_p = 0.17;                            // proportional gain
    double bias_b = 1.0 / 66.67 + 3000.0 / 370000.0 / 0.2;  // B [p.u. per Hz]
    double secondary_limit = 0.2;                 // |u_secondary| band [p.u.]
    bool primary_enabled = true;
    bool secondary_enabled = true;

    void validate() const;
};

struct ConventionalState {
    double ace_integral = 0.0;  // [p.u. s]
};

// Droop S from a "delta_f per delta_P" rating given in Hz and MW.
double droop_per_unit(double delta_f_hz, double delta_p_mw, double base_power_mw);
// Bias matching the area's natural response: 1/D_l + 1/S.
double natural_bias(double load_damping, double droop_s);

double primary_power(double delta_f_hz, const ConventionalParams& params);

// tie_deviation is actual minus scheduled export, positive when exporting more.
double area_control_error(double delta_f_hz, double tie_deviation, const ConventionalParams& params);

struct SecondaryOutput {
    double u = 0.0;
    ConventionalState state;
    bool saturated = false;
};

// Integrates ace over dt and returns u = -c_p ace - integral / t_n, clamped to
// the secondary band. The integrator is frozen on steps where the output
// saturates.
SecondaryOutput secondary_step(const ConventionalState& state, double ace, double dt, const ConventionalParams& params);

}  // namespace gridmpc
