#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gridmpc/grid_model.hpp"
#include "gridmpc/linalg.hpp"
#include "gridmpc/qp_solver.hpp"

namespace gridmpc {

struct MpcWeights {
    Matrix q;
    Matrix r;
    std::optional<Matrix> q_term;
    double slack_weight = 1e6;  // L1 penalty on state-bound violation
};

// Per-state bounds may be +-infinity (unbounded). Input and ramp bounds refer
// to the battery channels only.
struct MpcBounds {
    Vector x_min;
    Vector x_max;
    Vector u_min;
    Vector u_max;
    Vector du_min;
    Vector du_max;
};

enum class MpcKind { Standard, Passivity, Clf };

enum class PassivityTopology {
    OneArea,       // single area, single row
    TwoAreaJoint,  // coordinated: one row summing both areas
    TwoAreaLocal,  // uncoordinated: the local area's row only
};

struct MpcMode {
    MpcKind kind = MpcKind::Standard;
    PassivityTopology topology = PassivityTopology::OneArea;
};

std::string_view to_string(MpcKind k);
std::optional<MpcKind> parse_mpc_kind(std::string_view s);

struct MpcConfig {
    MpcMode mode;
    MpcWeights weights;
    MpcBounds bounds;
    std::size_t horizon = 3;
    double fallback_gain = 1.0;
};

struct PredictionMatrices {
    Matrix sx;  // (N n) x n, block i = A^(i+1)
    Matrix su;  // (N n) x (N m), block (i, j) = A^(i-j) B_ctrl for j <= i
};

PredictionMatrices build_prediction_matrices(const DiscreteModel& model, std::size_t n_horizon);

// Receding-horizon controller for one model. Everything that does not depend
// on the measured state is assembled once at construction; a step only fills
// in the linear term and the right-hand sides.
class MpcController {
  public:
    MpcController(DiscreteModel model, MpcConfig config);

    [[nodiscard]] const DiscreteModel& model() const { return model_; }
    [[nodiscard]] const MpcConfig& config() const { return config_; }
    [[nodiscard]] const PredictionMatrices& prediction() const { return pred_; }
    [[nodiscard]] std::size_t state_dim() const { return model_.state_dim(); }
    [[nodiscard]] std::size_t input_dim() const { return model_.control_inputs.size(); }
    [[nodiscard]] std::size_t bounded_states() const { return bounded_.size(); }
    [[nodiscard]] std::span<const double> u_prev() const { return u_prev_; }
    void set_u_prev(std::span<const double> u);

    // Cost of the stacked stage weights, with the terminal block in CLF mode.
    [[nodiscard]] const Matrix& stacked_state_weight() const { return qb_; }

  private:
    friend QpProblem build_condensed_qp(const MpcController& ctrl, std::span<const double> x0);

    DiscreteModel model_;
    MpcConfig config_;
    PredictionMatrices pred_;
    Matrix qb_;
    Matrix hessian_;
    Matrix linear_map_;  // f = linear_map_ * x0 (input block only)
    Matrix ineq_a_;
    std::vector<std::size_t> bounded_;
    Vector u_prev_;
};

// Decision vector [U; s_lo; s_hi], one slack pair per bounded state shared
// across the horizon. Constraint row order: input upper, input lower, ramp
// upper, ramp lower, state upper, state lower, slack nonnegativity.
QpProblem build_condensed_qp(const MpcController& ctrl, std::span<const double> x0);

// Appends sum_i x_i(0) u_i(0) <= -sum_i x_i(0)^2 over the topology's areas.
void add_passivity_constraint(QpProblem& qp, const MpcController& ctrl, std::span<const double> x0);

// Full predicted cost sum_{k=1..N} x_k'Q_k x_k + u_k'R u_k, including the
// x0-only term the QP objective drops. Slack penalties are not included.
double predicted_cost(const MpcController& ctrl, std::span<const double> x0, std::span<const double> u_stack);

// Solves the discrete Lyapunov equation on the a_d block spanned by
// freq_idx plus coupling_idx and embeds only the frequency block into an
// n x n zero matrix.
Matrix clf_terminal_cost(const DiscreteModel& model, const Matrix& q, std::span<const std::size_t> freq_idx,
                         std::span<const std::size_t> coupling_idx = {});

struct MpcDiagnostics {
    QpStatus status = QpStatus::Optimal;
    bool fallback = false;
    double objective = 0.0;
    double kkt_stationarity = 0.0;
    double kkt_feasibility = 0.0;
    double solve_time = 0.0;
    std::size_t iterations = 0;
    std::string note;
};

struct MpcStepResult {
    Vector u;
    MpcDiagnostics diagnostics;
};

// Builds and solves the QP for x_measured and applies the first input sample.
// Solver failure switches to u = clamp(-fallback_gain * x_freq) within the
// input and ramp bounds and records the event.
MpcStepResult mpc_step(MpcController& ctrl, std::span<const double> x_measured);

}  // namespace gridmpc
