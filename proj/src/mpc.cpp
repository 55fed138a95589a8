#include "gridmpc/mpc.hpp"

#include <algorithm>
#include <cmath>

namespace gridmpc {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) {
        throw Error(msg);
    }
}

void check_bound_pair(const Vector& lo, const Vector& hi, std::size_t n, const char* what) {
    require(lo.size() == n && hi.size() == n, std::string("mpc bounds: ") + what + " has wrong dimension");
    for (std::size_t i = 0; i < n; ++i) {
        require(!std::isnan(lo[i]) && !std::isnan(hi[i]), std::string("mpc bounds: ") + what + " is NaN");
        require(lo[i] < hi[i], std::string("mpc bounds: ") + what + " requires min < max");
    }
}

void validate(const DiscreteModel& model, const MpcConfig& cfg) {
    const std::size_t n = model.state_dim();
    const std::size_t m = model.control_inputs.size();
    require(n > 0 && m > 0, "mpc: model has no states or no control inputs");
    require(cfg.horizon >= 1, "mpc: horizon must be >= 1");
    const MpcWeights& w = cfg.weights;
    require(w.q.rows() == n && w.q.cols() == n, "mpc: q must be n x n");
    require(w.r.rows() == m && w.r.cols() == m, "mpc: r must be m x m");
    require(is_positive_semidefinite(w.q), "mpc: q must be symmetric PSD");
    require(is_positive_definite(w.r), "mpc: r must be symmetric positive definite");
    require(std::isfinite(w.slack_weight) && w.slack_weight > 0.0, "mpc: slack_weight must be > 0");
    if (w.q_term) {
        require(w.q_term->rows() == n && w.q_term->cols() == n, "mpc: q_term must be n x n");
        require(is_positive_semidefinite(*w.q_term), "mpc: q_term must be symmetric PSD");
    }
    require(cfg.mode.kind != MpcKind::Clf || w.q_term.has_value(), "mpc: CLF mode needs q_term");
    if (cfg.mode.kind == MpcKind::Passivity) {
        require(model.frequency_states.size() == m, "mpc: passivity needs one frequency state per battery input");
        if (cfg.mode.topology == PassivityTopology::TwoAreaJoint) {
            require(m == 2, "mpc: joint passivity needs a two-area model");
        }
    }
    const MpcBounds& b = cfg.bounds;
    check_bound_pair(b.x_min, b.x_max, n, "x");
    check_bound_pair(b.u_min, b.u_max, m, "u");
    check_bound_pair(b.du_min, b.du_max, m, "du");
    for (std::size_t i = 0; i < m; ++i) {
        require(std::isfinite(b.u_min[i]) && std::isfinite(b.u_max[i]), "mpc bounds: u bounds must be finite");
        require(b.u_min[i] <= 0.0 && 0.0 <= b.u_max[i], "mpc bounds: u range must contain 0");
        require(b.du_min[i] < 0.0 && 0.0 < b.du_max[i], "mpc bounds: du range must straddle 0");
    }
    require(std::isfinite(cfg.fallback_gain) && cfg.fallback_gain >= 0.0, "mpc: fallback_gain must be >= 0");
}

Matrix block_diag_repeat(const Matrix& m, std::size_t count) {
    Matrix out(m.rows() * count, m.cols() * count);
    for (std::size_t k = 0; k < count; ++k) {
        out.set_block(k * m.rows(), k * m.cols(), m);
    }
    return out;
}

}  // namespace

std::string_view to_string(MpcKind k) {
    switch (k) {
    case MpcKind::Standard:
        return "standard";
    case MpcKind::Passivity:
        return "passivity";
    case MpcKind::Clf:
        return "clf";
    }
    return "unknown";
}

std::optional<MpcKind> parse_mpc_kind(std::string_view s) {
    if (s == "standard") {
        return MpcKind::Standard;
    }
    if (s == "passivity") {
        return MpcKind::Passivity;
    }
    if (s == "clf") {
        return MpcKind::Clf;
    }
    return std::nullopt;
}

PredictionMatrices build_prediction_matrices(const DiscreteModel& model, std::size_t n_horizon) {
    if (n_horizon == 0) {
        throw Error("build_prediction_matrices: horizon must be >= 1");
    }
    const std::size_t n = model.state_dim();
    const Matrix b = model.control_matrix();
    const std::size_t m = b.cols();

    // powers[i] = A^i
    std::vector<Matrix> powers;
    powers.reserve(n_horizon + 1);
    powers.push_back(Matrix::identity(n));
    for (std::size_t i = 1; i <= n_horizon; ++i) {
        powers.push_back(model.a_d * powers.back());
    }
    std::vector<Matrix> impulse;  // A^i B
    impulse.reserve(n_horizon);
    for (std::size_t i = 0; i < n_horizon; ++i) {
        impulse.push_back(powers[i] * b);
    }

    PredictionMatrices p;
    p.sx = Matrix(n_horizon * n, n);
    p.su = Matrix(n_horizon * n, n_horizon * m);
    for (std::size_t i = 0; i < n_horizon; ++i) {
        p.sx.set_block(i * n, 0, powers[i + 1]);
        for (std::size_t j = 0; j <= i; ++j) {
            p.su.set_block(i * n, j * m, impulse[i - j]);
        }
    }
    return p;
}

MpcController::MpcController(DiscreteModel model, MpcConfig config)
    : model_(std::move(model)), config_(std::move(config)) {
    validate(model_, config_);
    const std::size_t n = state_dim();
    const std::size_t m = input_dim();
    const std::size_t N = config_.horizon;
    pred_ = build_prediction_matrices(model_, N);

    qb_ = block_diag_repeat(config_.weights.q, N);
    if (config_.mode.kind == MpcKind::Clf) {
        qb_.set_block((N - 1) * n, (N - 1) * n, *config_.weights.q_term);
    }
    const Matrix rb = block_diag_repeat(config_.weights.r, N);
    const Matrix sut = pred_.su.transpose();
    const Matrix sut_qb = sut * qb_;

    for (std::size_t j = 0; j < n; ++j) {
        if (std::isfinite(config_.bounds.x_min[j]) || std::isfinite(config_.bounds.x_max[j])) {
            bounded_.push_back(j);
        }
    }
    const std::size_t nu = N * m;
    const std::size_t ns = 2 * bounded_.size();
    const std::size_t nz = nu + ns;

    hessian_ = Matrix(nz, nz);
    Matrix huu = 2.0 * (sut_qb * pred_.su + rb);
    for (std::size_t i = 0; i < nu; ++i) {
        for (std::size_t j = 0; j < nu; ++j) {
            hessian_(i, j) = 0.5 * (huu(i, j) + huu(j, i));
        }
    }
    linear_map_ = 2.0 * (sut_qb * pred_.sx);

    const std::size_t nb = bounded_.size();
    const std::size_t rows = 4 * nu + 2 * N * nb + ns;
    ineq_a_ = Matrix(rows, nz);
    std::size_t r = 0;
    for (std::size_t i = 0; i < nu; ++i) {
        ineq_a_(r++, i) = 1.0;
    }
    for (std::size_t i = 0; i < nu; ++i) {
        ineq_a_(r++, i) = -1.0;
    }
    for (int sign : {1, -1}) {
        for (std::size_t k = 0; k < N; ++k) {
            for (std::size_t c = 0; c < m; ++c) {
                ineq_a_(r, k * m + c) = sign;
                if (k > 0) {
                    ineq_a_(r, (k - 1) * m + c) = -sign;
                }
                ++r;
            }
        }
    }
    // Soft state bounds: +-x_k[j] - s_{hi/lo}[j] <= ...
    for (int sign : {1, -1}) {
        for (std::size_t k = 0; k < N; ++k) {
            for (std::size_t bi = 0; bi < nb; ++bi) {
                const std::size_t srow = k * n + bounded_[bi];
                for (std::size_t c = 0; c < nu; ++c) {
                    ineq_a_(r, c) = sign * pred_.su(srow, c);
                }
                ineq_a_(r, nu + (sign > 0 ? nb : 0) + bi) = -1.0;
                ++r;
            }
        }
    }
    for (std::size_t i = 0; i < ns; ++i) {
        ineq_a_(r++, nu + i) = -1.0;
    }

    u_prev_.assign(m, 0.0);
}

void MpcController::set_u_prev(std::span<const double> u) {
    if (u.size() != input_dim()) {
        throw DimensionError("MpcController::set_u_prev: wrong input dimension");
    }
    u_prev_.assign(u.begin(), u.end());
}

QpProblem build_condensed_qp(const MpcController& ctrl, std::span<const double> x0) {
    const std::size_t n = ctrl.state_dim();
    if (x0.size() != n) {
        throw DimensionError("build_condensed_qp: x0 dimension does not match the model");
    }
    if (!all_finite(x0)) {
        throw NonFiniteError("build_condensed_qp: non-finite state");
    }
    const std::size_t m = ctrl.input_dim();
    const std::size_t N = ctrl.config_.horizon;
    const std::size_t nu = N * m;
    const std::size_t nb = ctrl.bounded_.size();
    const std::size_t ns = 2 * nb;
    const MpcBounds& bd = ctrl.config_.bounds;

    QpProblem qp;
    qp.hessian = ctrl.hessian_;
    qp.ineq_a = ctrl.ineq_a_;
    qp.linear.assign(nu + ns, 0.0);
    const Vector fu = ctrl.linear_map_ * x0;
    std::copy(fu.begin(), fu.end(), qp.linear.begin());
    std::fill(qp.linear.begin() + static_cast<std::ptrdiff_t>(nu), qp.linear.end(), ctrl.config_.weights.slack_weight);

    Vector& b = qp.ineq_b;
    b.reserve(ctrl.ineq_a_.rows());
    for (std::size_t k = 0; k < N; ++k) {
        for (std::size_t c = 0; c < m; ++c) {
            b.push_back(bd.u_max[c]);
        }
    }
    for (std::size_t k = 0; k < N; ++k) {
        for (std::size_t c = 0; c < m; ++c) {
            b.push_back(-bd.u_min[c]);
        }
    }
    for (std::size_t k = 0; k < N; ++k) {
        for (std::size_t c = 0; c < m; ++c) {
            b.push_back(bd.du_max[c] + (k == 0 ? ctrl.u_prev_[c] : 0.0));
        }
    }
    for (std::size_t k = 0; k < N; ++k) {
        for (std::size_t c = 0; c < m; ++c) {
            b.push_back(-bd.du_min[c] - (k == 0 ? ctrl.u_prev_[c] : 0.0));
        }
    }
    const Vector free = ctrl.pred_.sx * x0;
    // Infinite one-sided bounds become a huge finite right-hand side so the
    // row stays inert without special-casing the matrix layout.
    constexpr double kInert = 1e30;
    for (std::size_t k = 0; k < N; ++k) {
        for (std::size_t bi = 0; bi < nb; ++bi) {
            const std::size_t j = ctrl.bounded_[bi];
            b.push_back(std::isfinite(bd.x_max[j]) ? bd.x_max[j] - free[k * n + j] : kInert);
        }
    }
    for (std::size_t k = 0; k < N; ++k) {
        for (std::size_t bi = 0; bi < nb; ++bi) {
            const std::size_t j = ctrl.bounded_[bi];
            b.push_back(std::isfinite(bd.x_min[j]) ? free[k * n + j] - bd.x_min[j] : kInert);
        }
    }
    for (std::size_t i = 0; i < ns; ++i) {
        b.push_back(0.0);
    }
    return qp;
}

void add_passivity_constraint(QpProblem& qp, const MpcController& ctrl, std::span<const double> x0) {
    const auto& fidx = ctrl.model().frequency_states;
    const std::size_t nz = qp.num_vars();
    Matrix a(qp.ineq_a.rows() + 1, nz);
    a.set_block(0, 0, qp.ineq_a);
    const std::size_t row = qp.ineq_a.rows();
    double rhs = 0.0;
    // The first sample's inputs occupy z[0..m), in the order of fidx.
    for (std::size_t i = 0; i < fidx.size(); ++i) {
        const double xi = x0[fidx[i]];
        a(row, i) = xi;
        rhs -= xi * xi;
    }
    qp.ineq_a = std::move(a);
    qp.ineq_b.push_back(rhs);
}

double predicted_cost(const MpcController& ctrl, std::span<const double> x0, std::span<const double> u_stack) {
    const std::size_t nu = ctrl.config().horizon * ctrl.input_dim();
    if (u_stack.size() < nu) {
        throw DimensionError("predicted_cost: input stack too short");
    }
    const auto u = u_stack.first(nu);
    Vector x = ctrl.prediction().sx * x0;
    const Vector su_u = ctrl.prediction().su * u;
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] += su_u[i];
    }
    const Vector qx = ctrl.stacked_state_weight() * x;
    double cost = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        cost += x[i] * qx[i];
    }
    const Matrix& r = ctrl.config().weights.r;
    const std::size_t m = ctrl.input_dim();
    for (std::size_t k = 0; k < ctrl.config().horizon; ++k) {
        const auto uk = u.subspan(k * m, m);
        const Vector ru = r * uk;
        for (std::size_t c = 0; c < m; ++c) {
            cost += uk[c] * ru[c];
        }
    }
    return cost;
}

Matrix clf_terminal_cost(const DiscreteModel& model, const Matrix& q, std::span<const std::size_t> freq_idx,
                         std::span<const std::size_t> coupling_idx) {
    const std::size_t n = model.state_dim();
    if (q.rows() != n || q.cols() != n) {
        throw DimensionError("clf_terminal_cost: q must match the model dimension");
    }
    std::vector<std::size_t> sub(freq_idx.begin(), freq_idx.end());
    for (std::size_t c : coupling_idx) {
        if (std::find(sub.begin(), sub.end(), c) == sub.end()) {
            sub.push_back(c);
        }
    }
    for (std::size_t i : sub) {
        if (i >= n) {
            throw DimensionError("clf_terminal_cost: index out of range");
        }
    }
    const Matrix a_sub = model.a_d.select(sub, sub);
    const Matrix q_sub = q.select(sub, sub);
    const Matrix x = solve_discrete_lyapunov(a_sub, q_sub);
    Matrix out(n, n);
    for (std::size_t i = 0; i < freq_idx.size(); ++i) {
        for (std::size_t j = 0; j < freq_idx.size(); ++j) {
            out(freq_idx[i], freq_idx[j]) = x(i, j);
        }
    }
    return out;
}

MpcStepResult mpc_step(MpcController& ctrl, std::span<const double> x_measured) {
    const MpcConfig& cfg = ctrl.config();
    const std::size_t m = ctrl.input_dim();
    QpProblem qp = build_condensed_qp(ctrl, x_measured);
    if (cfg.mode.kind == MpcKind::Passivity) {
        add_passivity_constraint(qp, ctrl, x_measured);
    }
    // Slack nonnegativity rows are almost always active; starting there saves
    // the solver one iteration per slack.
    std::vector<std::size_t> warm;
    const std::size_t ns = 2 * ctrl.bounded_states();
    const std::size_t slack_row0 = qp.num_constraints() - ns - (cfg.mode.kind == MpcKind::Passivity ? 1 : 0);
    for (std::size_t i = 0; i < ns; ++i) {
        warm.push_back(slack_row0 + i);
    }
    qp.warm_start = std::move(warm);

    const QpSolution sol = solve_qp(qp);

    MpcStepResult res;
    MpcDiagnostics& d = res.diagnostics;
    d.status = sol.status;
    d.objective = sol.objective;
    d.kkt_stationarity = sol.kkt_stationarity;
    d.kkt_feasibility = sol.kkt_feasibility;
    d.solve_time = sol.solve_time;
    d.iterations = sol.iterations;

    const auto prev = ctrl.u_prev();
    res.u.assign(m, 0.0);
    if (sol.status == QpStatus::Optimal) {
        for (std::size_t c = 0; c < m; ++c) {
            res.u[c] = std::clamp(sol.z[c], cfg.bounds.u_min[c], cfg.bounds.u_max[c]);
        }
    } else {
        d.fallback = true;
        d.note = std::string("fallback: solver returned ") + std::string(to_string(sol.status));
        const auto& fidx = ctrl.model().frequency_states;
        for (std::size_t c = 0; c < m; ++c) {
            const double x = c < fidx.size() ? x_measured[fidx[c]] : 0.0;
            const double lo = std::max(cfg.bounds.u_min[c], prev[c] + cfg.bounds.du_min[c]);
            const double hi = std::min(cfg.bounds.u_max[c], prev[c] + cfg.bounds.du_max[c]);
            res.u[c] = lo <= hi ? std::clamp(-cfg.fallback_gain * x, lo, hi)
                                : std::clamp(-cfg.fallback_gain * x, cfg.bounds.u_min[c], cfg.bounds.u_max[c]);
        }
    }
    ctrl.set_u_prev(res.u);
    return res;
}

}  // namespace gridmpc
