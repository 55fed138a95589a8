#include "gridmpc/simulation.hpp"

#include <cmath>
#include <limits>

namespace gridmpc {

namespace {

constexpr double kRunawayLimit = 1e6;

std::size_t integer_ratio(double num, double den, const char* what) {
    const double r = num / den;
    const double rounded = std::round(r);
    if (!(rounded >= 1.0) || std::abs(r - rounded) > 1e-9 * std::max(1.0, r)) {
        throw Error(std::string("scenario: ") + what);
    }
    return static_cast<std::size_t>(rounded);
}

MpcBounds area_bounds(const Scenario& s, std::size_t area) {
    const AreaParams& ar = s.plant.areas[area];
    const BatteryParams& bat = s.plant.batteries[area];
    const double fb = s.mpc.freq_bound_hz / ar.f0;
    MpcBounds b;
    b.x_min = {-fb, bat.soc_min};
    b.x_max = {fb, bat.soc_max};
    b.u_min = {bat.power_min};
    b.u_max = {bat.power_max};
    b.du_min = {-bat.ramp_per_step};
    b.du_max = {bat.ramp_per_step};
    return b;
}

}  // namespace

std::string to_string(ControllerKind k) {
    switch (k) {
    case ControllerKind::None:
        return "none";
    case ControllerKind::Conventional:
        return "conventional";
    case ControllerKind::MpcStandard:
        return "standard";
    case ControllerKind::MpcPassivity:
        return "passivity";
    case ControllerKind::MpcClf:
        return "clf";
    }
    return "unknown";
}

std::optional<ControllerKind> parse_controller_kind(const std::string& s) {
    for (auto k : {ControllerKind::None, ControllerKind::Conventional, ControllerKind::MpcStandard,
                   ControllerKind::MpcPassivity, ControllerKind::MpcClf}) {
        if (to_string(k) == s) {
            return k;
        }
    }
    return std::nullopt;
}

bool is_mpc(ControllerKind k) {
    return k == ControllerKind::MpcStandard || k == ControllerKind::MpcPassivity || k == ControllerKind::MpcClf;
}

MpcKind mpc_kind(ControllerKind k) {
    switch (k) {
    case ControllerKind::MpcPassivity:
        return MpcKind::Passivity;
    case ControllerKind::MpcClf:
        return MpcKind::Clf;
    default:
        return MpcKind::Standard;
    }
}

std::size_t Scenario::substeps() const { return integer_ratio(ts, dt, "ts must be an integer multiple of dt"); }

std::size_t Scenario::steps() const { return integer_ratio(duration, ts, "duration must be an integer multiple of ts"); }

void Scenario::validate() const {
    plant.validate();
    const std::size_t n = area_count();
    if (controllers.size() != n || conventional.size() != n || faults.size() != n) {
        throw Error("scenario: controllers, conventional and faults need one entry per area");
    }
    if (!(ts > 0.0 && dt > 0.0 && duration > 0.0) || !std::isfinite(duration)) {
        throw Error("scenario: ts, dt and duration must be > 0");
    }
    (void)substeps();
    (void)steps();
    for (std::size_t i = 0; i < n; ++i) {
        faults[i].validate();
        if (controllers[i] == ControllerKind::Conventional) {
            conventional[i].validate();
        }
    }
    if (coordinated) {
        if (n != 2) {
            throw Error("scenario: coordinated control needs two areas");
        }
        if (!is_mpc(controllers[0]) || controllers[0] != controllers[1]) {
            throw Error("scenario: coordinated control needs the same MPC mode in both areas");
        }
    }
    if (mpc.horizon < 1) {
        throw Error("scenario: horizon must be >= 1");
    }
    if (!(mpc.freq_bound_hz > 0.0)) {
        throw Error("scenario: freq_bound_hz must be > 0");
    }
    if (initial_state) {
        if (initial_state->size() != plant.state_dim() || !all_finite(*initial_state)) {
            throw Error("scenario: initial_state has wrong size or non-finite entries");
        }
    }
}

PlantState integrate_plant(std::span<const double> state, std::span<const AreaInput> inputs,
                           const PlantParams& params, double dt, std::size_t substeps) {
    PlantState x(state.begin(), state.end());
    const std::size_t n = x.size();
    PlantState tmp(n);
    for (std::size_t s = 0; s < substeps; ++s) {
        const PlantState k1 = plant_derivative(x, inputs, params);
        for (std::size_t i = 0; i < n; ++i) {
            tmp[i] = x[i] + 0.5 * dt * k1[i];
        }
        const PlantState k2 = plant_derivative(tmp, inputs, params);
        for (std::size_t i = 0; i < n; ++i) {
            tmp[i] = x[i] + 0.5 * dt * k2[i];
        }
        const PlantState k3 = plant_derivative(tmp, inputs, params);
        for (std::size_t i = 0; i < n; ++i) {
            tmp[i] = x[i] + dt * k3[i];
        }
        const PlantState k4 = plant_derivative(tmp, inputs, params);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            if (!(std::abs(x[i]) < kRunawayLimit)) {
                throw NonFiniteStateError("plant state " + std::to_string(i) + " left the finite range");
            }
        }
    }
    return x;
}

MpcConfig local_mpc_config(const Scenario& s, std::size_t area, const DiscreteModel& model) {
    MpcConfig cfg;
    cfg.mode.kind = mpc_kind(s.controllers[area]);
    cfg.mode.topology = s.area_count() == 1 ? PassivityTopology::OneArea : PassivityTopology::TwoAreaLocal;
    cfg.horizon = s.mpc.horizon;
    cfg.fallback_gain = s.mpc.fallback_gain;
    cfg.weights.q = s.mpc.q_local;
    cfg.weights.r = s.mpc.r_local;
    cfg.weights.slack_weight = s.mpc.slack_weight;
    if (cfg.mode.kind == MpcKind::Clf) {
        const std::size_t f[] = {0};
        cfg.weights.q_term = s.mpc.q_term_local ? *s.mpc.q_term_local : clf_terminal_cost(model, s.mpc.q_local, f);
    }
    cfg.bounds = area_bounds(s, area);
    return cfg;
}

MpcConfig joint_mpc_config(const Scenario& s, const DiscreteModel& model) {
    MpcConfig cfg;
    cfg.mode.kind = mpc_kind(s.controllers[0]);
    cfg.mode.topology = PassivityTopology::TwoAreaJoint;
    cfg.horizon = s.mpc.horizon;
    cfg.fallback_gain = s.mpc.fallback_gain;
    cfg.weights.q = s.mpc.q_joint;
    cfg.weights.r = s.mpc.r_joint;
    cfg.weights.slack_weight = s.mpc.slack_weight;
    if (cfg.mode.kind == MpcKind::Clf) {
        const std::size_t f[] = {layout::kFreq1, layout::kFreq2};
        const std::size_t c[] = {layout::kAngle};
        cfg.weights.q_term = s.mpc.q_term_joint ? *s.mpc.q_term_joint : clf_terminal_cost(model, s.mpc.q_joint, f, c);
    }
    const MpcBounds b1 = area_bounds(s, 0);
    const MpcBounds b2 = area_bounds(s, 1);
    const double inf = std::numeric_limits<double>::infinity();
    cfg.bounds.x_min = {b1.x_min[0], b1.x_min[1], b2.x_min[0], b2.x_min[1], -inf};
    cfg.bounds.x_max = {b1.x_max[0], b1.x_max[1], b2.x_max[0], b2.x_max[1], inf};
    cfg.bounds.u_min = {b1.u_min[0], b2.u_min[0]};
    cfg.bounds.u_max = {b1.u_max[0], b2.u_max[0]};
    cfg.bounds.du_min = {b1.du_min[0], b2.du_min[0]};
    cfg.bounds.du_max = {b1.du_max[0], b2.du_max[0]};
    return cfg;
}

std::vector<std::vector<std::size_t>> mpc_controller_areas(const Scenario& s) {
    std::vector<std::vector<std::size_t>> out;
    if (s.coordinated) {
        out.push_back({0, 1});
        return out;
    }
    for (std::size_t i = 0; i < s.area_count(); ++i) {
        if (is_mpc(s.controllers[i])) {
            out.push_back({i});
        }
    }
    return out;
}

std::vector<MpcController> make_mpc_controllers(const Scenario& s) {
    std::vector<MpcController> out;
    for (const auto& areas : mpc_controller_areas(s)) {
        if (areas.size() == 2) {
            const auto& p = s.plant;
            const DiscreteModel model = discretize(
                build_two_area_coupled(p.areas[0], p.areas[1], p.batteries[0], p.batteries[1], p.tie), s.ts);
            out.emplace_back(model, joint_mpc_config(s, model));
        } else {
            const std::size_t i = areas.front();
            // Local controllers never model the tie line.
            const DiscreteModel model = discretize(build_one_area(s.plant.areas[i], s.plant.batteries[i]), s.ts);
            out.emplace_back(model, local_mpc_config(s, i, model));
        }
    }
    return out;
}

SimTrace run_closed_loop(const Scenario& scenario) {
    scenario.validate();
    const std::size_t areas = scenario.area_count();
    const PlantParams& plant = scenario.plant;
    const std::size_t steps = scenario.steps();
    const std::size_t substeps = scenario.substeps();
    const double ts = scenario.ts;
    const double dt = scenario.dt;

    std::vector<MpcController> mpcs = make_mpc_controllers(scenario);
    std::vector<ConventionalState> conv_state(areas);

    SimTrace tr;
    tr.areas = areas;
    tr.ts = ts;
    tr.controller_areas = mpc_controller_areas(scenario);
    tr.diagnostics.resize(mpcs.size());
    tr.freq_hz.resize(areas);
    tr.soc.resize(areas);
    tr.u_battery.resize(areas);
    tr.u_conventional.resize(areas);
    tr.fault.resize(areas);
    for (std::size_t i = 0; i < areas; ++i) {
        tr.freq_hz[i].reserve(steps);
        tr.soc[i].reserve(steps);
        tr.u_battery[i].reserve(steps);
        tr.u_conventional[i].reserve(steps);
        tr.fault[i].reserve(steps);
    }
    tr.time.reserve(steps);

    PlantState x = scenario.initial_state ? *scenario.initial_state : PlantState(plant.state_dim(), 0.0);
    std::vector<AreaInput> inputs(areas);
    Vector u_batt(areas);
    Vector u_conv(areas);

    for (std::size_t k = 0; k < steps; ++k) {
        const double t = static_cast<double>(k) * ts;
        std::fill(u_batt.begin(), u_batt.end(), 0.0);
        std::fill(u_conv.begin(), u_conv.end(), 0.0);

        for (std::size_t c = 0; c < mpcs.size(); ++c) {
            const auto& served = tr.controller_areas[c];
            MpcStepResult step;
            if (served.size() == 2) {
                PlantState seen = x;
                seen[layout::kAngle] = wrap_angle(seen[layout::kAngle]);
                step = mpc_step(mpcs[c], seen);
                u_batt[0] = step.u[0];
                u_batt[1] = step.u[1];
            } else {
                const std::size_t i = served.front();
                const double local[] = {x[layout::freq_index(i)], x[layout::soc_index(i)]};
                step = mpc_step(mpcs[c], local);
                u_batt[i] = step.u[0];
            }
            tr.diagnostics[c].push_back(std::move(step.diagnostics));
        }

        const double tie = areas == 2 ? tie_line_power(x[layout::kAngle], plant.tie) : 0.0;
        for (std::size_t i = 0; i < areas; ++i) {
            if (scenario.controllers[i] != ControllerKind::Conventional) {
                continue;
            }
            const ConventionalParams& cp = scenario.conventional[i];
            const double df = plant.areas[i].f0 * x[layout::freq_index(i)];
            double u = cp.primary_enabled ? primary_power(df, cp) : 0.0;
            if (cp.secondary_enabled) {
                const double exported = i == 0 ? tie : -tie;
                const SecondaryOutput sec = secondary_step(conv_state[i], area_control_error(df, exported, cp), ts, cp);
                conv_state[i] = sec.state;
                u += sec.u;
            }
            u_conv[i] = u;
        }

        tr.time.push_back(t);
        for (std::size_t i = 0; i < areas; ++i) {
            tr.freq_hz[i].push_back(plant.areas[i].f0 * x[layout::freq_index(i)]);
            tr.soc[i].push_back(x[layout::soc_index(i)]);
            tr.u_battery[i].push_back(u_batt[i]);
            tr.u_conventional[i].push_back(u_conv[i]);
            tr.fault[i].push_back(generate_fault(scenario.faults[i], t));
        }
        if (areas == 2) {
            tr.delta_phi.push_back(x[layout::kAngle]);
            tr.tie_power.push_back(tie);
        }

        try {
            for (std::size_t s = 0; s < substeps; ++s) {
                const double ti = t + static_cast<double>(s) * dt;
                for (std::size_t i = 0; i < areas; ++i) {
                    inputs[i].power_dev = generate_fault(scenario.faults[i], ti) + u_conv[i];
                    inputs[i].battery = u_batt[i];
                }
                x = integrate_plant(x, inputs, plant, dt, 1);
            }
        } catch (const NonFiniteStateError& e) {
            tr.failure = std::string(e.what()) + " at t = " + std::to_string(t);
            tr.final_state = x;
            tr.final_time = t;
            return tr;
        }
    }
    tr.final_state = x;
    tr.final_time = static_cast<double>(steps) * ts;
    return tr;
}

}  // namespace gridmpc
