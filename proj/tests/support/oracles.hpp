#pragma once

// Reference computations used only by the tests. They share no code with the
// library: naive elimination, exhaustive active-set enumeration, grid search
// and direct time stepping.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "gridmpc/linalg.hpp"
#include "gridmpc/qp_solver.hpp"

namespace oracle {

using Dense = std::vector<std::vector<double>>;

inline Dense to_dense(const gridmpc::Matrix& m) {
    Dense d(m.rows(), std::vector<double>(m.cols()));
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            d[i][j] = m(i, j);
        }
    }
    return d;
}

// Gauss-Jordan with full pivot search over the remaining column; returns
// nullopt for a (numerically) singular system.
inline std::optional<std::vector<double>> naive_solve(Dense a, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r) {
            if (std::abs(a[r][c]) > std::abs(a[piv][c])) {
                piv = r;
            }
        }
        if (std::abs(a[piv][c]) < 1e-13) {
            return std::nullopt;
        }
        std::swap(a[piv], a[c]);
        std::swap(b[piv], b[c]);
        for (std::size_t r = 0; r < n; ++r) {
            if (r == c) {
                continue;
            }
            const double f = a[r][c] / a[c][c];
            for (std::size_t k = c; k < n; ++k) {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        b[i] /= a[i][i];
    }
    return b;
}

inline double objective(const Dense& h, const std::vector<double>& f, const std::vector<double>& z) {
    double v = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        v += f[i] * z[i];
        for (std::size_t j = 0; j < z.size(); ++j) {
            v += 0.5 * z[i] * h[i][j] * z[j];
        }
    }
    return v;
}

inline double max_violation(const Dense& a, const std::vector<double>& b, const std::vector<double>& z) {
    double v = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) {
        double s = -b[i];
        for (std::size_t j = 0; j < z.size(); ++j) {
            s += a[i][j] * z[j];
        }
        v = std::max(v, s);
    }
    return v;
}

struct QpOracleResult {
    bool feasible = false;
    std::vector<double> z;
    double objective = std::numeric_limits<double>::infinity();
};

// Exhaustive KKT enumeration for a strictly convex QP: every subset S of
// constraints with |S| <= n is tried as the active set, and the best KKT
// point that is primal feasible with nonnegative multipliers wins.
inline QpOracleResult enumerate_active_sets(const gridmpc::QpProblem& qp) {
    const Dense h = to_dense(qp.hessian);
    const Dense a = to_dense(qp.ineq_a);
    const std::size_t n = qp.linear.size();
    const std::size_t p = qp.ineq_b.size();
    QpOracleResult best;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << p); ++mask) {
        std::vector<std::size_t> s;
        for (std::size_t i = 0; i < p; ++i) {
            if (mask & (std::uint64_t{1} << i)) {
                s.push_back(i);
            }
        }
        if (s.size() > n) {
            continue;
        }
        const std::size_t k = n + s.size();
        Dense kkt(k, std::vector<double>(k, 0.0));
        std::vector<double> rhs(k, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                kkt[i][j] = h[i][j];
            }
            rhs[i] = -qp.linear[i];
        }
        for (std::size_t r = 0; r < s.size(); ++r) {
            for (std::size_t j = 0; j < n; ++j) {
                kkt[n + r][j] = a[s[r]][j];
                kkt[j][n + r] = a[s[r]][j];
            }
            rhs[n + r] = qp.ineq_b[s[r]];
        }
        const auto sol = naive_solve(kkt, rhs);
        if (!sol) {
            continue;
        }
        std::vector<double> z(sol->begin(), sol->begin() + static_cast<std::ptrdiff_t>(n));
        bool ok = max_violation(a, qp.ineq_b, z) <= 1e-9;
        for (std::size_t r = 0; r < s.size() && ok; ++r) {
            ok = (*sol)[n + r] >= -1e-9;
        }
        if (!ok) {
            continue;
        }
        const double obj = objective(h, qp.linear, z);
        if (obj < best.objective) {
            best = {true, z, obj};
        }
    }
    return best;
}

// Minimum over the feasible points of a regular grid with the given step,
// centred on `center` and extending `half` steps in each direction.
inline QpOracleResult grid_search(const gridmpc::QpProblem& qp, const std::vector<double>& center, double step,
                                  int half) {
    const Dense h = to_dense(qp.hessian);
    const Dense a = to_dense(qp.ineq_a);
    const std::size_t n = center.size();
    QpOracleResult best;
    std::vector<int> idx(n, -half);
    std::vector<double> z(n);
    while (true) {
        for (std::size_t i = 0; i < n; ++i) {
            z[i] = center[i] + step * idx[i];
        }
        if (max_violation(a, qp.ineq_b, z) <= 1e-9) {
            const double obj = objective(h, qp.linear, z);
            if (obj < best.objective) {
                best = {true, z, obj};
            }
        }
        std::size_t d = 0;
        while (d < n && ++idx[d] > half) {
            idx[d] = -half;
            ++d;
        }
        if (d == n) {
            break;
        }
    }
    return best;
}

// Random strictly convex QP with n variables and p constraints that is
// feasible by construction (a random interior point satisfies every row).
inline gridmpc::QpProblem random_qp(std::mt19937_64& rng, std::size_t n, std::size_t p) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    gridmpc::Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            m(i, j) = u(rng);
        }
    }
    gridmpc::QpProblem qp;
    qp.hessian = m.transpose() * m;
    for (std::size_t i = 0; i < n; ++i) {
        qp.hessian(i, i) += 0.2;
    }
    qp.linear.resize(n);
    for (auto& v : qp.linear) {
        v = 2.0 * u(rng);
    }
    std::vector<double> interior(n);
    for (auto& v : interior) {
        v = 0.5 * u(rng);
    }
    qp.ineq_a = gridmpc::Matrix(p, n);
    qp.ineq_b.resize(p);
    for (std::size_t r = 0; r < p; ++r) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            qp.ineq_a(r, j) = u(rng);
            s += qp.ineq_a(r, j) * interior[j];
        }
        qp.ineq_b[r] = s + 0.3 * (u(rng) + 1.0);
    }
    return qp;
}

// Stable matrix with spectral radius below `radius`: a random matrix scaled
// by its induced infinity norm (an upper bound on the spectral radius).
inline gridmpc::Matrix random_stable(std::mt19937_64& rng, std::size_t n, double radius) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    gridmpc::Matrix a(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            a(i, j) = u(rng);
        }
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            s += std::abs(a(i, j));
        }
        norm = std::max(norm, s);
    }
    a *= radius / norm;
    return a;
}

inline gridmpc::Matrix random_spd(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    gridmpc::Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            m(i, j) = u(rng);
        }
    }
    gridmpc::Matrix q = m * m.transpose();
    for (std::size_t i = 0; i < n; ++i) {
        q(i, i) += 0.1;
    }
    return q;
}

// Finite-horizon cost of an input sequence for x+ = a x + b u, stepping the
// model directly: sum_{k=1..N} x_k'Q_k x_k + u_{k-1}'R u_{k-1}.
inline double rollout_cost(const Dense& a, const Dense& b, const Dense& q, const Dense& r, const Dense& q_last,
                           std::vector<double> x, const std::vector<double>& u_stack) {
    const std::size_t n = x.size();
    const std::size_t m = r.size();
    const std::size_t steps = u_stack.size() / m;
    double cost = 0.0;
    for (std::size_t k = 0; k < steps; ++k) {
        std::vector<double> nx(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                nx[i] += a[i][j] * x[j];
            }
            for (std::size_t j = 0; j < m; ++j) {
                nx[i] += b[i][j] * u_stack[k * m + j];
            }
        }
        x = nx;
        const Dense& w = k + 1 == steps ? q_last : q;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                cost += x[i] * w[i][j] * x[j];
            }
        }
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                cost += u_stack[k * m + i] * r[i][j] * u_stack[k * m + j];
            }
        }
    }
    return cost;
}

}  // namespace oracle
