#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "gridmpc/mpc.hpp"
#include "oracles.hpp"

using namespace gridmpc;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

DiscreteModel one_area_model() { return discretize(build_one_area(AreaParams{}, BatteryParams{}), 0.1); }

// Scalar frequency-only model x+ = a_d x + b u with a hand-picked a_d.
DiscreteModel scalar_model(double a_d, double b) {
    DiscreteModel d;
    d.a_d = Matrix{{a_d}};
    d.b_d = Matrix{{b}};
    d.ts = 0.1;
    d.frequency_states = {0};
    d.control_inputs = {0};
    return d;
}

MpcConfig one_area_config(MpcKind kind, std::size_t horizon) {
    MpcConfig c;
    c.mode.kind = kind;
    c.horizon = horizon;
    c.weights.q = Matrix{{10.0, 0.0}, {0.0, 0.001}};
    c.weights.r = Matrix{{1.0}};
    c.bounds.x_min = {-1.5 / 50.0, -0.75};
    c.bounds.x_max = {1.5 / 50.0, 0.75};
    c.bounds.u_min = {-0.15};
    c.bounds.u_max = {0.15};
    c.bounds.du_min = {-1.0};
    c.bounds.du_max = {1.0};
    if (kind == MpcKind::Clf) {
        const std::vector<std::size_t> f = {0};
        c.weights.q_term = clf_terminal_cost(one_area_model(), c.weights.q, f);
    }
    return c;
}

MpcConfig scalar_config(MpcKind kind, std::size_t horizon, double q, double r, double u_bound) {
    MpcConfig c;
    c.mode.kind = kind;
    c.horizon = horizon;
    c.weights.q = Matrix{{q}};
    c.weights.r = Matrix{{r}};
    c.bounds.x_min = {-kInf};
    c.bounds.x_max = {kInf};
    c.bounds.u_min = {-u_bound};
    c.bounds.u_max = {u_bound};
    c.bounds.du_min = {-2.0 * u_bound};
    c.bounds.du_max = {2.0 * u_bound};
    return c;
}

}  // namespace

TEST_CASE("prediction matrices: scalar closed form") {
    const DiscreteModel d = scalar_model(0.5, 2.0);
    const PredictionMatrices p = build_prediction_matrices(d, 3);
    CHECK(p.sx == Matrix{{0.5}, {0.25}, {0.125}});
    CHECK(p.su == Matrix{{2.0, 0.0, 0.0}, {1.0, 2.0, 0.0}, {0.5, 1.0, 2.0}});
}

TEST_CASE("prediction matrices reproduce a direct rollout") {
    const DiscreteModel d = discretize(
        build_two_area_coupled(AreaParams{}, AreaParams{}, BatteryParams{}, BatteryParams{}, TieLineParams{0.2}), 0.1);
    const std::size_t N = 6;
    const PredictionMatrices p = build_prediction_matrices(d, N);
    const Vector x0 = {2e-3, 0.1, -1e-3, -0.2, 0.4};
    Vector u(2 * N);
    for (std::size_t i = 0; i < u.size(); ++i) {
        u[i] = 0.01 * static_cast<double>(i) - 0.05;
    }
    Vector pred = p.sx * x0;
    const Vector forced = p.su * u;
    const Matrix bc = d.control_matrix();
    Vector x = x0;
    for (std::size_t k = 0; k < N; ++k) {
        Vector nx = d.a_d * x;
        const Vector bu = bc * std::span<const double>(u).subspan(2 * k, 2);
        for (std::size_t i = 0; i < 5; ++i) {
            x[i] = nx[i] + bu[i];
            CHECK(std::abs(pred[5 * k + i] + forced[5 * k + i] - x[i]) <= 1e-14);
        }
    }
}

TEST_CASE("controller validation") {
    MpcConfig c = one_area_config(MpcKind::Standard, 3);
    c.weights.r = Matrix{{0.0}};
    CHECK_THROWS_AS(MpcController(one_area_model(), c), Error);

    c = one_area_config(MpcKind::Standard, 3);
    c.weights.q = Matrix{{1.0, 2.0}, {2.0, 1.0}};
    CHECK_THROWS_AS(MpcController(one_area_model(), c), Error);

    c = one_area_config(MpcKind::Clf, 3);
    c.weights.q_term.reset();
    CHECK_THROWS_AS(MpcController(one_area_model(), c), Error);

    c = one_area_config(MpcKind::Standard, 0);
    CHECK_THROWS_AS(MpcController(one_area_model(), c), Error);

    c = one_area_config(MpcKind::Standard, 3);
    c.bounds.u_min = {0.1};
    CHECK_THROWS_AS(MpcController(one_area_model(), c), Error);
}

TEST_CASE("zero state weight gives zero input") {
    MpcConfig c = one_area_config(MpcKind::Standard, 5);
    c.weights.q = Matrix(2, 2);
    MpcController ctrl(one_area_model(), c);
    const MpcStepResult r = mpc_step(ctrl, Vector{0.01, 0.2});
    CHECK(r.diagnostics.status == QpStatus::Optimal);
    CHECK(std::abs(r.u[0]) <= 1e-12);
}

TEST_CASE("zero state gives zero input and zero cost") {
    for (MpcKind kind : {MpcKind::Standard, MpcKind::Passivity, MpcKind::Clf}) {
        MpcController ctrl(one_area_model(), one_area_config(kind, 4));
        const MpcStepResult r = mpc_step(ctrl, Vector{0.0, 0.0});
        CHECK(r.diagnostics.status == QpStatus::Optimal);
        CHECK(std::abs(r.u[0]) <= 1e-14);
        CHECK(std::abs(r.diagnostics.objective) <= 1e-14);
    }
}

TEST_CASE("optimal input sequence matches a brute-force search") {
    MpcController ctrl(one_area_model(), one_area_config(MpcKind::Standard, 3));
    const Vector x0 = {0.004, 0.0};
    const QpProblem qp = build_condensed_qp(ctrl, x0);
    const QpSolution sol = solve_qp(qp);
    REQUIRE(sol.status == QpStatus::Optimal);
    const Vector u_star(sol.z.begin(), sol.z.begin() + 3);

    const DiscreteModel d = one_area_model();
    const auto a = oracle::to_dense(d.a_d);
    const auto b = oracle::to_dense(d.control_matrix());
    const auto q = oracle::to_dense(ctrl.config().weights.q);
    const auto r = oracle::to_dense(ctrl.config().weights.r);

    // Coarse-to-fine grid over the input box.
    Vector center = {0.0, 0.0, 0.0};
    double step = 0.03;
    double best = std::numeric_limits<double>::infinity();
    Vector best_u = center;
    while (step >= 1e-5) {
        const Vector c = best_u;
        for (int i = -5; i <= 5; ++i) {
            for (int j = -5; j <= 5; ++j) {
                for (int k = -5; k <= 5; ++k) {
                    const Vector u = {std::clamp(c[0] + i * step, -0.15, 0.15),
                                      std::clamp(c[1] + j * step, -0.15, 0.15),
                                      std::clamp(c[2] + k * step, -0.15, 0.15)};
                    const double v = oracle::rollout_cost(a, b, q, r, q, x0, u);
                    if (v < best) {
                        best = v;
                        best_u = u;
                    }
                }
            }
        }
        step /= 4.0;
    }
    const double mpc_cost = predicted_cost(ctrl, x0, u_star);
    CHECK(mpc_cost <= best + 1e-12);
    CHECK(best - mpc_cost <= 1e-9);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(std::abs(u_star[i] - best_u[i]) <= 2e-4);
    }
}

TEST_CASE("QP objective and predicted cost differ only by the x0 term") {
    MpcController ctrl(one_area_model(), one_area_config(MpcKind::Standard, 4));
    const Vector x0 = {0.01, 0.3};
    const QpProblem qp = build_condensed_qp(ctrl, x0);
    const Vector zero(qp.num_vars(), 0.0);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-0.1, 0.1);
    for (int trial = 0; trial < 10; ++trial) {
        Vector z(qp.num_vars(), 0.0);
        for (std::size_t i = 0; i < 4; ++i) {
            z[i] = u(rng);
        }
        const double diff_qp = qp_objective(qp, z) - qp_objective(qp, zero);
        const double diff_cost = predicted_cost(ctrl, x0, z) - predicted_cost(ctrl, x0, zero);
        CHECK(diff_qp == doctest::Approx(diff_cost).epsilon(1e-10));
    }
}

TEST_CASE("passivity row: explicit examples") {
    MpcController ctrl(one_area_model(), one_area_config(MpcKind::Passivity, 3));
    const Vector x0 = {0.01, 0.2};
    QpProblem qp = build_condensed_qp(ctrl, x0);
    const std::size_t rows = qp.num_constraints();
    add_passivity_constraint(qp, ctrl, x0);
    REQUIRE(qp.num_constraints() == rows + 1);
    CHECK(qp.ineq_a(rows, 0) == 0.01);
    CHECK(qp.ineq_a(rows, 1) == 0.0);
    CHECK(qp.ineq_b.back() == doctest::Approx(-1e-4).epsilon(1e-15));

    const DiscreteModel d2 = discretize(
        build_two_area_coupled(AreaParams{}, AreaParams{}, BatteryParams{}, BatteryParams{}, TieLineParams{0.2}), 0.1);
    MpcConfig c2;
    c2.mode = {MpcKind::Passivity, PassivityTopology::TwoAreaJoint};
    c2.horizon = 3;
    c2.weights.q = Matrix::diagonal(std::vector<double>{10.0, 0.001, 10.0, 0.001, 0.1});
    c2.weights.r = Matrix::identity(2);
    c2.bounds.x_min = {-0.03, -0.75, -0.03, -0.75, -kInf};
    c2.bounds.x_max = {0.03, 0.75, 0.03, 0.75, kInf};
    c2.bounds.u_min = {-0.15, -0.15};
    c2.bounds.u_max = {0.15, 0.15};
    c2.bounds.du_min = {-1.0, -1.0};
    c2.bounds.du_max = {1.0, 1.0};
    MpcController joint(d2, c2);
    const Vector x2 = {0.01, 0.0, -0.02, 0.0, 0.3};
    QpProblem q2 = build_condensed_qp(joint, x2);
    add_passivity_constraint(q2, joint, x2);
    const std::size_t last = q2.num_constraints() - 1;
    CHECK(q2.ineq_a(last, 0) == 0.01);
    CHECK(q2.ineq_a(last, 1) == -0.02);
    CHECK(q2.ineq_b.back() == doctest::Approx(-5e-4).epsilon(1e-15));
}

TEST_CASE("passivity step satisfies its certificate") {
    MpcController ctrl(one_area_model(), one_area_config(MpcKind::Passivity, 3));
    for (double x : {-0.02, -0.003, -1e-5, 1e-5, 0.004, 0.025}) {
        ctrl.set_u_prev(Vector{0.0});
        const MpcStepResult r = mpc_step(ctrl, Vector{x, 0.0});
        REQUIRE(r.diagnostics.status == QpStatus::Optimal);
        CHECK(r.u[0] * x + x * x <= 1e-9);
    }
}

TEST_CASE("terminal cost: scalar closed forms") {
    const std::vector<std::size_t> f = {0};
    const double a_d = 0.9937698;
    const Matrix t = clf_terminal_cost(scalar_model(a_d, 0.01), Matrix{{10.0}}, f);
    CHECK(t(0, 0) == doctest::Approx(10.0 / (1.0 - a_d * a_d)).epsilon(1e-12));
    CHECK(std::abs(t(0, 0) - 805.05) <= 0.01);

    // Reference-table model at Ts = 0.1 s with the frequency pole divided by f0.
    const double a_slow = std::exp(-1.25e-3 * 0.1);
    const Matrix slow = clf_terminal_cost(scalar_model(a_slow, 0.01), Matrix{{10.0}}, f);
    CHECK(std::abs(slow(0, 0) - 40005.0) <= 0.5);
}

TEST_CASE("terminal cost embeds only the frequency block") {
    const DiscreteModel d = one_area_model();
    const std::vector<std::size_t> f = {0};
    const Matrix t = clf_terminal_cost(d, Matrix{{10.0, 0.0}, {0.0, 0.001}}, f);
    CHECK(t(0, 0) == doctest::Approx(10.0 / (1.0 - d.a_d(0, 0) * d.a_d(0, 0))).epsilon(1e-12));
    CHECK(t(1, 1) == 0.0);
    CHECK(t(0, 1) == 0.0);

    const DiscreteModel d2 = discretize(
        build_two_area_coupled(AreaParams{}, AreaParams{}, BatteryParams{}, BatteryParams{}, TieLineParams{0.2}), 0.1);
    const std::vector<std::size_t> f2 = {0, 2};
    const std::vector<std::size_t> c2 = {4};
    const Matrix q2 = Matrix::diagonal(std::vector<double>{10.0, 0.001, 10.0, 0.001, 0.1});
    const Matrix t2 = clf_terminal_cost(d2, q2, f2, c2);
    CHECK(is_symmetric(t2, 1e-9 * max_abs(t2)));
    CHECK(is_positive_semidefinite(t2));
    CHECK(t2(1, 1) == 0.0);
    CHECK(t2(4, 4) == 0.0);
    CHECK(t2(0, 0) > 0.0);
    CHECK(t2(0, 2) != 0.0);
}

TEST_CASE("terminal cost rejects unstable frequency dynamics") {
    const std::vector<std::size_t> f = {0};
    CHECK_THROWS_AS(clf_terminal_cost(scalar_model(1.01, 0.01), Matrix{{1.0}}, f), UnstableSystemError);
}

namespace {

DiscreteModel scalar_frequency_subsystem() {
    const double a = AreaParams{}.a_freq();
    const double a_d = std::exp(a * 0.1);
    return scalar_model(a_d, (a_d - 1.0) / a * AreaParams{}.b_freq() / AreaParams{}.f0);
}

double clf_optimal_cost(const DiscreteModel& d, std::size_t n, double x0) {
    MpcConfig c = scalar_config(MpcKind::Clf, n, 10.0, 1.0, 1e3);
    const std::vector<std::size_t> f = {0};
    c.weights.q_term = clf_terminal_cost(d, c.weights.q, f);
    MpcController ctrl(d, c);
    const Vector x = {x0};
    const QpSolution s = solve_qp(build_condensed_qp(ctrl, x));
    REQUIRE(s.status == QpStatus::Optimal);
    return predicted_cost(ctrl, x, s.z);
}

}  // namespace

TEST_CASE("CLF cost decreases with N toward the infinite-horizon optimum") {
    const DiscreteModel d = scalar_frequency_subsystem();
    const double a = d.a_d(0, 0);
    const double b = d.b_d(0, 0);
    // Scalar Riccati fixed point for stage weights q = 10, r = 1.
    double p = 10.0;
    for (int i = 0; i < 200000; ++i) {
        p = 10.0 + a * a * p - (a * b * p) * (a * b * p) / (1.0 + b * b * p);
    }
    const double j_inf = (p - 10.0) * 1e-4;  // x0 = 0.01; the x0 stage is not counted
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t n : {3u, 10u, 50u, 100u, 200u, 400u}) {
        const double j = clf_optimal_cost(d, n, 0.01);
        CHECK(j <= prev * (1.0 + 1e-12));
        CHECK(j >= j_inf * (1.0 - 1e-9));
        prev = j;
    }
    CHECK((prev - j_inf) / j_inf <= 1e-6);
}

// Kept as stated; fails on the reference parameters (gap about 7e-2). Registered
// as a separate ctest entry, see tests/CMakeLists.txt.
TEST_CASE("CLF horizon gap: N = 50 within 1e-3 of N = 200") {
    const DiscreteModel d = scalar_frequency_subsystem();
    const double j50 = clf_optimal_cost(d, 50, 0.01);
    const double j200 = clf_optimal_cost(d, 200, 0.01);
    CHECK(j200 <= j50);
    CHECK((j50 - j200) / j200 <= 1e-3);
}

TEST_CASE("step uses only u_prev as memory") {
    MpcController a(one_area_model(), one_area_config(MpcKind::Standard, 3));
    MpcController b(one_area_model(), one_area_config(MpcKind::Standard, 3));
    const Vector x = {0.005, 0.1};
    for (int i = 0; i < 5; ++i) {
        mpc_step(a, Vector{-0.002 * i, 0.0});
    }
    b.set_u_prev(a.u_prev());
    const MpcStepResult ra = mpc_step(a, x);
    const MpcStepResult rb = mpc_step(b, x);
    CHECK(ra.u == rb.u);
}

TEST_CASE("ramp limit holds across consecutive steps") {
    MpcConfig c = one_area_config(MpcKind::Standard, 3);
    c.bounds.du_min = {-0.01};
    c.bounds.du_max = {0.01};
    MpcController ctrl(one_area_model(), c);
    double prev = 0.0;
    for (double x : {0.02, 0.02, -0.02, -0.02, 0.0}) {
        const MpcStepResult r = mpc_step(ctrl, Vector{x, 0.0});
        REQUIRE(r.diagnostics.status == QpStatus::Optimal);
        CHECK(std::abs(r.u[0] - prev) <= 0.01 + 1e-9);
        prev = r.u[0];
    }
}

TEST_CASE("infeasible passivity row falls back to clamped proportional action") {
    MpcController ctrl(one_area_model(), one_area_config(MpcKind::Passivity, 3));
    // |x| larger than the input range cannot satisfy x u <= -x^2.
    const MpcStepResult r = mpc_step(ctrl, Vector{0.2, 0.0});
    CHECK(r.diagnostics.fallback);
    CHECK(r.diagnostics.status == QpStatus::Infeasible);
    CHECK(r.u[0] == doctest::Approx(-0.15));
    CHECK_FALSE(r.diagnostics.note.empty());
    CHECK(ctrl.u_prev()[0] == r.u[0]);
}

TEST_CASE("passivity closed loop decreases the storage function without coupling") {
    const DiscreteModel d = one_area_model();
    MpcController ctrl(d, one_area_config(MpcKind::Passivity, 3));
    const double beta = AreaParams{}.beta();
    Vector x = {0.02, 0.0};
    double v = 0.5 * beta * 2500.0 * x[0] * x[0];
    const Matrix bc = d.control_matrix();
    for (int k = 0; k < 300; ++k) {
        const MpcStepResult r = mpc_step(ctrl, x);
        REQUIRE(r.diagnostics.status == QpStatus::Optimal);
        Vector nx = d.a_d * x;
        const Vector bu = bc * r.u;
        for (std::size_t i = 0; i < 2; ++i) {
            nx[i] += bu[i];
        }
        x = nx;
        const double v_next = 0.5 * beta * 2500.0 * x[0] * x[0];
        CHECK(v_next <= v + 1e-18);
        v = v_next;
    }
    // The certificate forces at least u = -x, so the decay is no slower than
    // that closed loop.
    const double rho = d.a_d(0, 0) - bc(0, 0);
    CHECK(std::abs(x[0]) <= 0.02 * std::pow(rho, 300) * (1.0 + 1e-9));
}

TEST_CASE("mode names round-trip") {
    for (MpcKind k : {MpcKind::Standard, MpcKind::Passivity, MpcKind::Clf}) {
        CHECK(parse_mpc_kind(to_string(k)) == k);
    }
    CHECK_FALSE(parse_mpc_kind("lqr").has_value());
}
