#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "gridmpc/linalg.hpp"

namespace gridmpc {

// minimize 0.5 z'Hz + f'z  subject to  ineq_a z <= ineq_b
struct QpProblem {
    Matrix hessian;
    Vector linear;
    Matrix ineq_a;
    Vector ineq_b;
    // Constraint indices expected to be active at the solution. Only affects
    // the starting point, never the answer.
    std::optional<std::vector<std::size_t>> warm_start;

    [[nodiscard]] std::size_t num_vars() const { return linear.size(); }
    [[nodiscard]] std::size_t num_constraints() const { return ineq_b.size(); }
    void validate() const;
};

enum class QpStatus { Optimal, Infeasible, IterationLimit, Unbounded };

std::string_view to_string(QpStatus s);

struct QpSolution {
    Vector z;
    QpStatus status = QpStatus::IterationLimit;
    double objective = 0.0;
    double kkt_stationarity = 0.0;
    double kkt_feasibility = 0.0;
    double complementarity = 0.0;
    Vector multipliers;  // one per constraint, zero when inactive
    std::vector<std::size_t> active_set;
    std::size_t iterations = 0;
    double solve_time = 0.0;  // seconds
    bool used_phase1 = false;
};

struct QpSettings {
    double feasibility_tol = 1e-9;
    double multiplier_tol = 1e-9;
    // Iteration cap per phase is factor * (n + p).
    std::size_t iteration_factor = 50;
};

// Primal active-set method for convex (PSD) QPs with inequality constraints.
// Infeasible starts go through a phase-1 LP minimizing the largest violation.
QpSolution solve_qp(const QpProblem& problem, const QpSettings& settings = {});

double qp_objective(const QpProblem& problem, std::span<const double> z);

}  // namespace gridmpc
