#include "gridmpc/qp_solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace gridmpc {

namespace {

constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

// Householder QR of the n x w matrix whose columns are the working-set
// constraint normals. q is the full n x n orthogonal factor, so its first w
// columns span the constraint normals and the rest span their null space.
struct NormalFactor {
    Matrix q;
    Matrix r;
    std::size_t w = 0;
    std::vector<std::size_t> dependent;  // positions in the working list
};

NormalFactor factor_normals(const Matrix& a, const std::vector<std::size_t>& working) {
    const std::size_t n = a.cols();
    const std::size_t w = working.size();
    Matrix m(n, w);
    double scale = 0.0;
    for (std::size_t j = 0; j < w; ++j) {
        const auto row = a.row(working[j]);
        for (std::size_t i = 0; i < n; ++i) {
            m(i, j) = row[i];
        }
        scale = std::max(scale, norm_inf(row));
    }
    NormalFactor f;
    f.q = Matrix::identity(n);
    f.w = w;
    std::vector<double> v(n);
    for (std::size_t k = 0; k < w && k < n; ++k) {
        double norm2 = 0.0;
        for (std::size_t i = k; i < n; ++i) {
            norm2 += m(i, k) * m(i, k);
        }
        const double norm = std::sqrt(norm2);
        if (norm <= 1e-12 * std::max(scale, 1e-300)) {
            continue;
        }
        const double alpha = m(k, k) > 0.0 ? -norm : norm;
        std::fill(v.begin(), v.end(), 0.0);
        for (std::size_t i = k; i < n; ++i) {
            v[i] = m(i, k);
        }
        v[k] -= alpha;
        double vnorm2 = 0.0;
        for (std::size_t i = k; i < n; ++i) {
            vnorm2 += v[i] * v[i];
        }
        if (vnorm2 == 0.0) {
            continue;
        }
        const double beta = 2.0 / vnorm2;
        for (std::size_t j = k; j < w; ++j) {
            double s = 0.0;
            for (std::size_t i = k; i < n; ++i) {
                s += v[i] * m(i, j);
            }
            s *= beta;
            for (std::size_t i = k; i < n; ++i) {
                m(i, j) -= s * v[i];
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t c = k; c < n; ++c) {
                s += f.q(i, c) * v[c];
            }
            s *= beta;
            for (std::size_t c = k; c < n; ++c) {
                f.q(i, c) -= s * v[c];
            }
        }
    }
    f.r = Matrix(w, w);
    for (std::size_t i = 0; i < w && i < n; ++i) {
        for (std::size_t j = i; j < w; ++j) {
            f.r(i, j) = m(i, j);
        }
    }
    for (std::size_t k = 0; k < w; ++k) {
        if (k >= n || std::abs(f.r(k, k)) <= 1e-11 * std::max(scale, 1e-300)) {
            f.dependent.push_back(k);
        }
    }
    return f;
}

// Cyclic Jacobi eigen-decomposition of a small symmetric matrix.
void symmetric_eigen(Matrix a, Vector& values, Matrix& vectors) {
    const std::size_t n = a.rows();
    vectors = Matrix::identity(n);
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        double diag = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            diag += a(i, i) * a(i, i);
            for (std::size_t j = i + 1; j < n; ++j) {
                off += a(i, j) * a(i, j);
            }
        }
        if (off <= 1e-30 * std::max(diag, 1e-300)) {
            break;
        }
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (a(p, q) == 0.0) {
                    continue;
                }
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = vectors(k, p);
                    const double vkq = vectors(k, q);
                    vectors(k, p) = c * vkp - s * vkq;
                    vectors(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    values.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        values[i] = a(i, i);
    }
}

struct Step {
    Vector p;
    bool newton = true;  // false: zero-curvature descent, step length unbounded
};

// Minimizes 0.5 p'Hp + g'p over p in range(Z), Z = trailing columns of q.
Step subspace_step(const Matrix& h, bool h_zero, const NormalFactor& fac, std::span<const double> g) {
    const std::size_t n = fac.q.rows();
    const std::size_t w = std::min(fac.w, n);
    const std::size_t nz = n - w;
    Step step;
    step.p.assign(n, 0.0);
    if (nz == 0) {
        return step;
    }
    Matrix z = fac.q.block(0, w, n, nz);
    const Vector gr = z.transpose() * g;

    Vector d(nz, 0.0);
    if (h_zero) {
        for (std::size_t i = 0; i < nz; ++i) {
            d[i] = -gr[i];
        }
        step.newton = false;
    } else {
        const Matrix hz = h * z;
        Matrix hr = z.transpose() * hz;
        for (std::size_t i = 0; i < nz; ++i) {
            for (std::size_t j = i + 1; j < nz; ++j) {
                const double avg = 0.5 * (hr(i, j) + hr(j, i));
                hr(i, j) = avg;
                hr(j, i) = avg;
            }
        }
        double hr_scale = 0.0;
        for (std::size_t i = 0; i < nz; ++i) {
            hr_scale = std::max(hr_scale, std::abs(hr(i, i)));
        }
        const auto l = cholesky(hr);
        bool well_posed = l.has_value();
        if (well_posed) {
            for (std::size_t i = 0; i < nz; ++i) {
                if ((*l)(i, i) * (*l)(i, i) <= 1e-12 * std::max(hr_scale, 1.0)) {
                    well_posed = false;
                    break;
                }
            }
        }
        if (well_posed) {
            // Forward/back substitution with the Cholesky factor.
            Vector y(nz);
            for (std::size_t i = 0; i < nz; ++i) {
                double s = -gr[i];
                for (std::size_t k = 0; k < i; ++k) {
                    s -= (*l)(i, k) * y[k];
                }
                y[i] = s / (*l)(i, i);
            }
            for (std::size_t ii = nz; ii-- > 0;) {
                double s = y[ii];
                for (std::size_t k = ii + 1; k < nz; ++k) {
                    s -= (*l)(k, ii) * d[k];
                }
                d[ii] = s / (*l)(ii, ii);
            }
        } else {
            Vector lam;
            Matrix vec;
            symmetric_eigen(hr, lam, vec);
            double lam_max = 0.0;
            for (double v : lam) {
                lam_max = std::max(lam_max, std::abs(v));
            }
            const double zero_tol = 1e-11 * std::max(1.0, lam_max);
            const double g_tol = 1e-13 * std::max(1.0, norm_inf(g));
            Vector flat(nz, 0.0);
            bool has_flat_descent = false;
            for (std::size_t k = 0; k < nz; ++k) {
                double c = 0.0;
                for (std::size_t i = 0; i < nz; ++i) {
                    c += vec(i, k) * gr[i];
                }
                if (lam[k] <= zero_tol) {
                    if (std::abs(c) > g_tol) {
                        has_flat_descent = true;
                        for (std::size_t i = 0; i < nz; ++i) {
                            flat[i] -= c * vec(i, k);
                        }
                    }
                } else {
                    for (std::size_t i = 0; i < nz; ++i) {
                        d[i] -= c / lam[k] * vec(i, k);
                    }
                }
            }
            if (has_flat_descent) {
                d = flat;
                step.newton = false;
            }
        }
    }
    step.p = z * d;
    return step;
}

// Solves A_W' lambda = -g in the least-squares sense via the QR factors.
Vector working_multipliers(const NormalFactor& fac, std::span<const double> g) {
    const std::size_t w = fac.w;
    const std::size_t n = fac.q.rows();
    Vector rhs(w, 0.0);
    for (std::size_t j = 0; j < w && j < n; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            s += fac.q(i, j) * g[i];
        }
        rhs[j] = -s;
    }
    Vector lam(w, 0.0);
    for (std::size_t ii = w; ii-- > 0;) {
        double s = rhs[ii];
        for (std::size_t k = ii + 1; k < w; ++k) {
            s -= fac.r(ii, k) * lam[k];
        }
        lam[ii] = s / fac.r(ii, ii);
    }
    return lam;
}

enum class CoreStatus { Optimal, IterationLimit, Unbounded };

struct CoreResult {
    Vector z;
    std::vector<std::size_t> working;
    Vector lambda;
    CoreStatus status = CoreStatus::IterationLimit;
    std::size_t iterations = 0;
};

CoreResult run_active_set(const Matrix& h, bool h_zero, const Vector& f, const Matrix& a, const Vector& b, Vector z,
                          std::vector<std::size_t> working, std::size_t max_iter, const QpSettings& settings) {
    const std::size_t p = b.size();
    std::vector<char> in_working(p, 0);
    for (std::size_t i : working) {
        in_working[i] = 1;
    }
    std::vector<double> row_norm(p);
    for (std::size_t i = 0; i < p; ++i) {
        row_norm[i] = norm_inf(a.row(i));
    }

    CoreResult res;
    bool at_subspace_min = false;
    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        res.iterations = iter + 1;
        Vector g = h_zero ? f : h * z;
        if (!h_zero) {
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += f[i];
            }
        }
        NormalFactor fac = factor_normals(a, working);
        if (!fac.dependent.empty()) {
            // Numerically redundant rows carry no information; drop them.
            for (std::size_t k = fac.dependent.size(); k-- > 0;) {
                in_working[working[fac.dependent[k]]] = 0;
                working.erase(working.begin() + static_cast<std::ptrdiff_t>(fac.dependent[k]));
            }
            fac = factor_normals(a, working);
        }

        Step step;
        if (!at_subspace_min) {
            step = subspace_step(h, h_zero, fac, g);
            if (norm_inf(step.p) <= 1e-14 * std::max(1.0, norm_inf(z))) {
                at_subspace_min = true;
            }
        }

        if (at_subspace_min) {
            const Vector lam = working_multipliers(fac, g);
            std::size_t drop = npos;
            double most_negative = -settings.multiplier_tol;
            for (std::size_t k = 0; k < lam.size(); ++k) {
                if (lam[k] < most_negative ||
                    (drop != npos && lam[k] == most_negative && working[k] < working[drop])) {
                    most_negative = lam[k];
                    drop = k;
                }
            }
            if (drop == npos) {
                res.status = CoreStatus::Optimal;
                res.z = std::move(z);
                res.working = std::move(working);
                res.lambda = lam;
                return res;
            }
            in_working[working[drop]] = 0;
            working.erase(working.begin() + static_cast<std::ptrdiff_t>(drop));
            at_subspace_min = false;
            continue;
        }

        double alpha = step.newton ? 1.0 : std::numeric_limits<double>::infinity();
        std::size_t blocking = npos;
        const double pnorm = norm_inf(step.p);
        for (std::size_t i = 0; i < p; ++i) {
            if (in_working[i]) {
                continue;
            }
            const auto ai = a.row(i);
            const double ap = dot(ai, step.p);
            if (ap <= 1e-13 * row_norm[i] * pnorm) {
                continue;
            }
            const double slack = std::max(0.0, b[i] - dot(ai, z));
            const double ratio = slack / ap;
            if (ratio < alpha) {
                alpha = ratio;
                blocking = i;
            }
        }
        if (!std::isfinite(alpha)) {
            res.status = CoreStatus::Unbounded;
            res.z = std::move(z);
            res.working = std::move(working);
            return res;
        }
        for (std::size_t i = 0; i < z.size(); ++i) {
            z[i] += alpha * step.p[i];
        }
        if (blocking != npos) {
            working.push_back(blocking);
            in_working[blocking] = 1;
            at_subspace_min = false;
        } else {
            at_subspace_min = step.newton;
        }
    }
    res.status = CoreStatus::IterationLimit;
    res.z = std::move(z);
    res.working = std::move(working);
    return res;
}

double max_violation(const Matrix& a, const Vector& b, std::span<const double> z) {
    double v = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) {
        v = std::max(v, dot(a.row(i), z) - b[i]);
    }
    return v;
}

// Equality-constrained minimizer on a candidate working set, used as a warm
// starting point when it happens to be feasible.
std::optional<Vector> warm_point(const QpProblem& qp, std::vector<std::size_t>& working) {
    const std::size_t n = qp.num_vars();
    std::sort(working.begin(), working.end());
    working.erase(std::unique(working.begin(), working.end()), working.end());
    if (working.size() > n ||
        std::any_of(working.begin(), working.end(), [&](std::size_t i) { return i >= qp.num_constraints(); })) {
        return std::nullopt;
    }
    NormalFactor fac = factor_normals(qp.ineq_a, working);
    if (!fac.dependent.empty()) {
        return std::nullopt;
    }
    const std::size_t w = working.size();
    // A_W = R' Y'  =>  z_p = Y y with R' y = b_W.
    Vector y(w, 0.0);
    for (std::size_t i = 0; i < w; ++i) {
        double s = qp.ineq_b[working[i]];
        for (std::size_t k = 0; k < i; ++k) {
            s -= fac.r(k, i) * y[k];
        }
        y[i] = s / fac.r(i, i);
    }
    Vector z(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
            z[i] += fac.q(i, j) * y[j];
        }
    }
    Vector g = qp.hessian * z;
    for (std::size_t i = 0; i < n; ++i) {
        g[i] += qp.linear[i];
    }
    const Step step = subspace_step(qp.hessian, false, fac, g);
    if (!step.newton) {
        return std::nullopt;
    }
    for (std::size_t i = 0; i < n; ++i) {
        z[i] += step.p[i];
    }
    return z;
}

}  // namespace

void QpProblem::validate() const {
    const std::size_t n = linear.size();
    if (hessian.rows() != n || hessian.cols() != n) {
        throw DimensionError("QpProblem: hessian must be n x n with n = size(linear)");
    }
    if (ineq_a.rows() != ineq_b.size() || (ineq_a.rows() > 0 && ineq_a.cols() != n)) {
        throw DimensionError("QpProblem: constraint matrix must be p x n with p = size(ineq_b)");
    }
    if (!hessian.is_finite() || !all_finite(linear) || !ineq_a.is_finite() || !all_finite(ineq_b)) {
        throw NonFiniteError("QpProblem: non-finite data");
    }
    if (!is_symmetric(hessian, 1e-12)) {
        throw Error("QpProblem: hessian is not symmetric");
    }
    if (!is_positive_semidefinite(hessian)) {
        throw Error("QpProblem: hessian is not positive semidefinite");
    }
}

std::string_view to_string(QpStatus s) {
    switch (s) {
    case QpStatus::Optimal:
        return "Optimal";
    case QpStatus::Infeasible:
        return "Infeasible";
    case QpStatus::IterationLimit:
        return "IterationLimit";
    case QpStatus::Unbounded:
        return "Unbounded";
    }
    return "Unknown";
}

double qp_objective(const QpProblem& problem, std::span<const double> z) {
    const Vector hz = problem.hessian * z;
    return 0.5 * dot(z, hz) + dot(problem.linear, z);
}

QpSolution solve_qp(const QpProblem& problem, const QpSettings& settings) {
    const auto t0 = std::chrono::steady_clock::now();
    problem.validate();
    const std::size_t n = problem.num_vars();
    const std::size_t p = problem.num_constraints();
    const Matrix a = p > 0 ? problem.ineq_a : Matrix(0, n);
    const bool h_zero = max_abs(problem.hessian) == 0.0;
    const std::size_t max_iter = settings.iteration_factor * (n + p);

    QpSolution sol;
    Vector z(n, 0.0);
    std::vector<std::size_t> working;
    if (problem.warm_start) {
        std::vector<std::size_t> candidate = *problem.warm_start;
        if (auto wz = warm_point(problem, candidate);
            wz && max_violation(a, problem.ineq_b, *wz) <= settings.feasibility_tol) {
            z = std::move(*wz);
            working = std::move(candidate);
        } else {
            // Keep the hinted rows that are already tight at the origin.
            for (std::size_t i : candidate) {
                if (i < p && std::abs(problem.ineq_b[i]) <= settings.feasibility_tol) {
                    working.push_back(i);
                }
            }
        }
    }

    std::size_t iterations = 0;
    const double initial_violation = max_violation(a, problem.ineq_b, z);
    if (initial_violation > settings.feasibility_tol) {
        // Phase 1: minimize t subject to A z - t <= b, t >= 0.
        sol.used_phase1 = true;
        Matrix a1(p + 1, n + 1);
        Vector b1(p + 1, 0.0);
        for (std::size_t i = 0; i < p; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                a1(i, j) = a(i, j);
            }
            a1(i, n) = -1.0;
            b1[i] = problem.ineq_b[i];
        }
        a1(p, n) = -1.0;
        Vector f1(n + 1, 0.0);
        f1[n] = 1.0;
        Vector start(z);
        start.push_back(initial_violation);
        const Matrix h1(n + 1, n + 1);
        CoreResult phase1 = run_active_set(h1, true, f1, a1, b1, std::move(start), {},
                                           settings.iteration_factor * (n + p + 2), settings);
        iterations += phase1.iterations;
        const double t_star = phase1.z[n];
        phase1.z.pop_back();
        z = std::move(phase1.z);
        working.clear();
        if (phase1.status != CoreStatus::Optimal || t_star > settings.feasibility_tol) {
            sol.z = z;
            sol.status = phase1.status == CoreStatus::IterationLimit ? QpStatus::IterationLimit : QpStatus::Infeasible;
            sol.iterations = iterations;
            sol.objective = qp_objective(problem, sol.z);
            sol.kkt_feasibility = max_violation(a, problem.ineq_b, sol.z);
            sol.multipliers.assign(p, 0.0);
            sol.solve_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            return sol;
        }
    }

    CoreResult core = run_active_set(problem.hessian, h_zero, problem.linear, a, problem.ineq_b, std::move(z),
                                     std::move(working), max_iter, settings);
    iterations += core.iterations;

    sol.z = std::move(core.z);
    sol.iterations = iterations;
    sol.status = core.status == CoreStatus::Optimal   ? QpStatus::Optimal
                 : core.status == CoreStatus::Unbounded ? QpStatus::Unbounded
                                                        : QpStatus::IterationLimit;
    sol.multipliers.assign(p, 0.0);
    if (core.status == CoreStatus::Optimal) {
        for (std::size_t k = 0; k < core.working.size(); ++k) {
            sol.multipliers[core.working[k]] = core.lambda[k];
        }
        sol.active_set = core.working;
        std::sort(sol.active_set.begin(), sol.active_set.end());
    }

    Vector residual = problem.hessian * sol.z;
    for (std::size_t i = 0; i < n; ++i) {
        residual[i] += problem.linear[i];
    }
    double comp = 0.0;
    for (std::size_t i = 0; i < p; ++i) {
        const double lam = sol.multipliers[i];
        if (lam == 0.0) {
            continue;
        }
        const auto ai = a.row(i);
        for (std::size_t j = 0; j < n; ++j) {
            residual[j] += lam * ai[j];
        }
        comp = std::max(comp, std::abs(lam * (dot(ai, sol.z) - problem.ineq_b[i])));
    }
    sol.kkt_stationarity = norm_inf(residual);
    sol.kkt_feasibility = max_violation(a, problem.ineq_b, sol.z);
    sol.complementarity = comp;
    sol.objective = qp_objective(problem, sol.z);
    sol.solve_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return sol;
}

}  // namespace gridmpc
