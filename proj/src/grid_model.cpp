#include "gridmpc/grid_model.hpp"

#include <cmath>
#include <numbers>

namespace gridmpc {

namespace {

void check(bool ok, const std::string& msg) {
    if (!ok) {
        throw Error(msg);
    }
}

}  // namespace

void AreaParams::validate() const {
    check(std::isfinite(f0) && f0 > 0.0, "area: f0 must be > 0");
    check(std::isfinite(inertia_h) && inertia_h > 0.0, "area: H must be > 0");
    check(std::isfinite(base_power) && base_power > 0.0, "area: S_B must be > 0");
    check(std::isfinite(load_damping) && load_damping > 0.0, "area: D_l must be > 0");
}

void BatteryParams::validate() const {
    check(std::isfinite(capacity) && capacity > 0.0, "battery: capacity must be > 0");
    check(std::isfinite(self_discharge), "battery: self_discharge must be finite");
    check(power_min < 0.0 && 0.0 < power_max, "battery: need power_min < 0 < power_max");
    check(soc_min < 0.0 && 0.0 < soc_max, "battery: need soc_min < 0 < soc_max");
    check(soc_min >= -1.0 && soc_max <= 1.0, "battery: SoC bounds must lie in [-1, 1]");
    check(std::isfinite(ramp_per_step) && ramp_per_step > 0.0, "battery: ramp_per_step must be > 0");
}

void TieLineParams::validate() const { check(std::isfinite(p_hat_t) && p_hat_t >= 0.0, "tie: p_hat_t must be >= 0"); }

void PlantParams::validate() const {
    check(areas.size() == 1 || areas.size() == 2, "plant: one or two areas supported");
    check(batteries.size() == areas.size(), "plant: one battery per area required");
    for (const auto& a : areas) {
        a.validate();
    }
    for (const auto& b : batteries) {
        b.validate();
    }
    tie.validate();
    if (areas.size() == 2) {
        check(areas[0].f0 == areas[1].f0, "plant: both areas must share f0");
    }
}

Matrix DiscreteModel::control_matrix() const {
    std::vector<std::size_t> rows(b_d.rows());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        rows[i] = i;
    }
    return b_d.select(rows, control_inputs);
}

ContinuousModel build_one_area(const AreaParams& area, const BatteryParams& battery, FrequencyUnits units) {
    area.validate();
    battery.validate();
    const double scale = units == FrequencyUnits::Normalized ? 1.0 / area.f0 : 1.0;

    ContinuousModel m;
    m.units = units;
    m.a = Matrix{{area.a_freq(), 0.0}, {0.0, -battery.self_discharge / battery.capacity}};
    m.b = Matrix{{area.b_freq() * scale, area.b_freq() * scale}, {0.0, -1.0 / battery.capacity}};
    m.state_labels = {units == FrequencyUnits::Normalized ? "df/f0" : "df_hz", "soc"};
    m.input_labels = {"dP", "u"};
    m.frequency_states = {0};
    m.soc_states = {1};
    m.control_inputs = {1};
    m.disturbance_inputs = {0};
    return m;
}

ContinuousModel build_two_area_coupled(const AreaParams& a1, const AreaParams& a2, const BatteryParams& b1,
                                       const BatteryParams& b2, const TieLineParams& tie, FrequencyUnits units) {
    a1.validate();
    a2.validate();
    b1.validate();
    b2.validate();
    tie.validate();
    if (a1.f0 != a2.f0) {
        throw Error("build_two_area_coupled: areas must share f0");
    }
    const double f0 = a1.f0;
    const double scale = units == FrequencyUnits::Normalized ? 1.0 / f0 : 1.0;
    const double two_pi = 2.0 * std::numbers::pi;

    ContinuousModel m;
    m.units = units;
    m.a = Matrix(5, 5);
    m.a(0, 0) = a1.a_freq();
    m.a(1, 1) = -b1.self_discharge / b1.capacity;
    m.a(2, 2) = a2.a_freq();
    m.a(3, 3) = -b2.self_discharge / b2.capacity;
    m.a(0, 4) = a1.a_freq() * a1.load_damping * tie.p_hat_t * scale;
    m.a(2, 4) = -a2.a_freq() * a2.load_damping * tie.p_hat_t * scale;
    // d(dphi)/dt = 2*pi*(df1 - df2) = 2*pi*f0*(x1 - x2)
    m.a(4, 0) = two_pi / scale;
    m.a(4, 2) = -two_pi / scale;

    m.b = Matrix(5, 4);
    m.b(0, 0) = a1.b_freq() * scale;
    m.b(0, 1) = a1.b_freq() * scale;
    m.b(1, 1) = -1.0 / b1.capacity;
    m.b(2, 2) = a2.b_freq() * scale;
    m.b(2, 3) = a2.b_freq() * scale;
    m.b(3, 3) = -1.0 / b2.capacity;

    const char* f1 = units == FrequencyUnits::Normalized ? "df1/f0" : "df1_hz";
    const char* f2 = units == FrequencyUnits::Normalized ? "df2/f0" : "df2_hz";
    m.state_labels = {f1, "soc1", f2, "soc2", "dphi"};
    m.input_labels = {"dP1", "u1", "dP2", "u2"};
    m.frequency_states = {0, 2};
    m.soc_states = {1, 3};
    m.angle_state = 4;
    m.control_inputs = {1, 3};
    m.disturbance_inputs = {0, 2};
    return m;
}

DiscreteModel discretize(const ContinuousModel& model, double ts) {
    if (!(ts > 0.0) || !std::isfinite(ts)) {
        throw Error("discretize: ts must be > 0");
    }
    const std::size_t n = model.a.rows();
    const std::size_t m = model.b.cols();
    if (!model.a.square() || model.b.rows() != n) {
        throw DimensionError("discretize: inconsistent model dimensions");
    }
    Matrix aug(n + m, n + m);
    aug.set_block(0, 0, ts * model.a);
    aug.set_block(0, n, ts * model.b);
    const Matrix e = matrix_exponential(aug);

    DiscreteModel d;
    d.a_d = e.block(0, 0, n, n);
    d.b_d = e.block(0, n, n, m);
    d.ts = ts;
    d.state_labels = model.state_labels;
    d.input_labels = model.input_labels;
    d.frequency_states = model.frequency_states;
    d.soc_states = model.soc_states;
    d.angle_state = model.angle_state;
    d.control_inputs = model.control_inputs;
    d.disturbance_inputs = model.disturbance_inputs;
    return d;
}

double tie_line_power(double delta_phi, const TieLineParams& tie) { return tie.p_hat_t * std::sin(delta_phi); }

PlantState plant_derivative(std::span<const double> state, std::span<const AreaInput> inputs,
                            const PlantParams& params) {
    const std::size_t areas = params.area_count();
    if (inputs.size() != areas || state.size() != params.state_dim()) {
        throw DimensionError("plant_derivative: state/input size does not match topology");
    }
    PlantState dx(state.size(), 0.0);
    const double tie = areas == 2 ? tie_line_power(state[layout::kAngle], params.tie) : 0.0;
    for (std::size_t i = 0; i < areas; ++i) {
        const AreaParams& ar = params.areas[i];
        const BatteryParams& bat = params.batteries[i];
        const std::size_t fi = layout::freq_index(i);
        const std::size_t si = layout::soc_index(i);
        // Area 1 exports P_T12, area 2 imports it.
        const double exported = i == 0 ? tie : -tie;
        const double injected = inputs[i].power_dev + inputs[i].battery - exported;
        dx[fi] = ar.a_freq() * state[fi] + ar.b_freq() / ar.f0 * injected;
        dx[si] = -(bat.self_discharge + inputs[i].battery) / bat.capacity;
    }
    if (areas == 2) {
        dx[layout::kAngle] =
            2.0 * std::numbers::pi * params.areas[0].f0 * (state[layout::kFreq1] - state[layout::kFreq2]);
    }
    return dx;
}

double wrap_angle(double phi) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double w = std::fmod(phi + std::numbers::pi, two_pi);
    if (w <= 0.0) {
        w += two_pi;
    }
    return w - std::numbers::pi;
}

}  // namespace gridmpc
