#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>

#include "gridmpc/metrics.hpp"
#include "scenarios.hpp"

using namespace gridmpc;
namespace ts = testing_scenarios;

namespace {

SimTrace synthetic(std::size_t areas, std::size_t n, const std::function<double(std::size_t, double)>& df) {
    SimTrace tr;
    tr.areas = areas;
    tr.ts = 0.1;
    tr.freq_hz.resize(areas);
    tr.soc.resize(areas);
    tr.u_battery.resize(areas);
    tr.u_conventional.resize(areas);
    tr.fault.resize(areas);
    for (std::size_t k = 0; k < n; ++k) {
        const double t = 0.1 * static_cast<double>(k);
        tr.time.push_back(t);
        for (std::size_t a = 0; a < areas; ++a) {
            tr.freq_hz[a].push_back(df(a, t));
            tr.soc[a].push_back(0.0);
            tr.u_battery[a].push_back(0.0);
            tr.u_conventional[a].push_back(0.0);
            tr.fault[a].push_back(0.0);
        }
        if (areas == 2) {
            tr.delta_phi.push_back(0.0);
            tr.tie_power.push_back(0.0);
        }
    }
    return tr;
}

SweepCell cell_for(const SimTrace& tr, std::string mode, std::size_t n) {
    SweepCell c;
    c.topology = tr.areas == 1 ? "onearea" : "twoarea";
    c.coordination = tr.areas == 1 ? "none" : "uncoordinated";
    c.mode = std::move(mode);
    c.horizon = n;
    c.metrics = compute_metrics(tr);
    return c;
}

std::string drop_columns(const std::string& csv, const std::vector<std::string>& names) {
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    std::vector<std::string> header;
    {
        std::stringstream hs(line);
        for (std::string f; std::getline(hs, f, ',');) {
            header.push_back(f);
        }
    }
    std::vector<bool> keep(header.size(), true);
    for (std::size_t i = 0; i < header.size(); ++i) {
        keep[i] = std::find(names.begin(), names.end(), header[i]) == names.end();
    }
    std::string out;
    for (std::istringstream all(csv); std::getline(all, line);) {
        std::stringstream ls(line);
        std::size_t i = 0;
        for (std::string f; std::getline(ls, f, ','); ++i) {
            if (keep[i]) {
                out += f + ",";
            }
        }
        out += "\n";
    }
    return out;
}

}  // namespace

TEST_CASE("metrics: all-zero trace gives all-zero metrics") {
    const SimTrace tr = synthetic(2, 100, [](std::size_t, double) { return 0.0; });
    const RunMetrics m = compute_metrics(tr);
    CHECK(m.max_abs_freq_dev == std::vector<double>{0.0, 0.0});
    CHECK(m.mean_abs_freq_dev == std::vector<double>{0.0, 0.0});
    CHECK(m.mean_abs_control_input == std::vector<double>{0.0, 0.0});
    CHECK(m.max_abs_angle_diff == 0.0);
    CHECK(m.mean_abs_tie_power == 0.0);
    CHECK(m.mean_solve_time == 0.0);
    CHECK(m.infeasible_step_count == 0);
}

TEST_CASE("metrics: constant deviation") {
    const SimTrace tr = synthetic(1, 50, [](std::size_t, double) { return -0.3; });
    const RunMetrics m = compute_metrics(tr);
    CHECK(m.max_abs_freq_dev[0] == 0.3);
    CHECK(m.mean_abs_freq_dev[0] == doctest::Approx(0.3).epsilon(1e-15));
    CHECK_FALSE(m.max_abs_angle_diff.has_value());
    CHECK_FALSE(m.mean_abs_tie_power.has_value());
}

TEST_CASE("metrics: sine over whole cycles") {
    // 0.05 Hz sine sampled at 10 Hz over 10 cycles.
    const SimTrace tr =
        synthetic(1, 2000, [](std::size_t, double t) { return 0.7 * std::sin(0.1 * std::numbers::pi * t); });
    const RunMetrics m = compute_metrics(tr);
    CHECK(std::abs(m.max_abs_freq_dev[0] - 0.7) <= 1e-3);
    CHECK(std::abs(m.mean_abs_freq_dev[0] - 2.0 * 0.7 / std::numbers::pi) <= 1e-3);
}

TEST_CASE("metrics: window selection and empty windows") {
    const SimTrace tr = synthetic(1, 100, [](std::size_t, double t) { return t < 5.0 ? 1.0 : 0.01; });
    const RunMetrics late = compute_metrics(tr, std::make_pair(6.0, 9.9));
    CHECK(late.max_abs_freq_dev[0] == 0.01);
    const RunMetrics all = compute_metrics(tr);
    CHECK(all.max_abs_freq_dev[0] == 1.0);
    CHECK_THROWS_AS(compute_metrics(tr, std::make_pair(20.0, 30.0)), EmptyWindowError);
}

TEST_CASE("metrics: invariant under time shift and sign flip") {
    const SimTrace run = run_closed_loop(ts::fig2_two_area(ControllerKind::MpcStandard, false));
    SimTrace shifted = run;
    for (double& t : shifted.time) {
        t += 1234.5;
    }
    SimTrace flipped = run;
    for (auto& series : flipped.freq_hz) {
        for (double& v : series) {
            v = -v;
        }
    }
    for (double& v : flipped.delta_phi) {
        v = -v;
    }
    for (double& v : flipped.tie_power) {
        v = -v;
    }
    RunMetrics a = compute_metrics(run);
    RunMetrics b = compute_metrics(shifted);
    RunMetrics c = compute_metrics(flipped);
    CHECK(a == b);
    CHECK(a == c);
    CHECK(compute_metrics(run, std::make_pair(10.0, 50.0)) ==
          compute_metrics(shifted, std::make_pair(1244.5, 1284.5)));
}

TEST_CASE("metrics: solve time and fallbacks come from controller diagnostics") {
    SimTrace tr = synthetic(1, 4, [](std::size_t, double) { return 0.0; });
    tr.diagnostics = {std::vector<MpcDiagnostics>(4)};
    for (std::size_t k = 0; k < 4; ++k) {
        tr.diagnostics[0][k].solve_time = 0.001 * static_cast<double>(k + 1);
    }
    tr.diagnostics[0][2].fallback = true;
    const RunMetrics m = compute_metrics(tr);
    CHECK(m.mean_solve_time == doctest::Approx(0.0025));
    CHECK(m.infeasible_step_count == 1);
}

TEST_CASE("metrics csv: export and re-import round trip") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    SweepResult r;
    r.cells.push_back(cell_for(synthetic(2, 80, [&](std::size_t, double) { return u(rng) * 1e-3; }), "standard", 3));
    r.cells.push_back(cell_for(synthetic(1, 80, [&](std::size_t, double) { return u(rng); }), "clf", 17));
    r.cells.back().metrics->mean_solve_time = 1.234567890123e-5;
    r.cells.back().metrics->infeasible_step_count = 7;
    SweepCell failed;
    failed.topology = "twoarea";
    failed.coordination = "coordinated";
    failed.mode = "passivity";
    failed.horizon = 9;
    failed.error = "boom";
    r.cells.push_back(failed);

    const std::string csv = metrics_csv(r);
    const SweepResult back = parse_metrics_csv(csv);
    REQUIRE(back.cells.size() == 3);
    for (std::size_t i = 0; i < 2; ++i) {
        const RunMetrics& a = *r.cells[i].metrics;
        const RunMetrics& b = *back.cells[i].metrics;
        CHECK(back.cells[i].mode == r.cells[i].mode);
        CHECK(back.cells[i].horizon == r.cells[i].horizon);
        REQUIRE(a.max_abs_freq_dev.size() == b.max_abs_freq_dev.size());
        for (std::size_t k = 0; k < a.max_abs_freq_dev.size(); ++k) {
            CHECK(std::abs(a.max_abs_freq_dev[k] - b.max_abs_freq_dev[k]) <= 1e-12 * std::abs(a.max_abs_freq_dev[k]));
            CHECK(std::abs(a.mean_abs_freq_dev[k] - b.mean_abs_freq_dev[k]) <=
                  1e-12 * std::abs(a.mean_abs_freq_dev[k]));
        }
        CHECK(a.max_abs_angle_diff.has_value() == b.max_abs_angle_diff.has_value());
        CHECK(std::abs(a.mean_solve_time - b.mean_solve_time) <= 1e-12 * std::abs(a.mean_solve_time));
        CHECK(a.infeasible_step_count == b.infeasible_step_count);
    }
    CHECK_FALSE(back.cells[2].metrics.has_value());
    CHECK(csv.find("FAILED") != std::string::npos);
    // Re-export is byte-stable.
    CHECK(metrics_csv(back).substr(0, csv.find("FAILED")) == csv.substr(0, csv.find("FAILED")));
}

TEST_CASE("metrics csv: empty sweep gives a header-only file") {
    const std::string csv = metrics_csv(SweepResult{});
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1);
    CHECK(csv.rfind("topology,coordination,mode,N,", 0) == 0);
    CHECK(parse_metrics_csv(csv).cells.empty());
    CHECK_THROWS_AS(parse_metrics_csv("a,b\n"), Error);
}

TEST_CASE("plot data: one row per cell in every table") {
    SweepResult r;
    r.cells.push_back(cell_for(synthetic(2, 10, [](std::size_t a, double) { return a ? 0.2 : 0.1; }), "clf", 3));
    const auto dir = std::filesystem::temp_directory_path() / "gridmpc_plot_data_test";
    std::filesystem::remove_all(dir);
    const auto files = write_plot_data(r, dir);
    CHECK(files.size() == 6);
    for (const auto& f : files) {
        const std::string text = read_text_file(f);
        CHECK(std::count(text.begin(), text.end(), '\n') == 2);
    }
    const std::string freq = read_text_file(dir / "max_freq_dev.csv");
    CHECK(freq == "topology,coordination,mode,N,area_1,area_2\ntwoarea,uncoordinated,clf,3,0.1,0.2\n");
    CHECK_THROWS_AS(read_text_file(dir / "missing.csv"), IoError);
}

TEST_CASE("sweep: one cell equals a direct run") {
    const Scenario base = ts::fig2_two_area(ControllerKind::MpcStandard, false);
    SweepOptions opt;
    opt.modes = {MpcKind::Passivity};
    opt.horizons = {3};
    const SweepResult r = sweep_horizons(base, opt);
    REQUIRE(r.cells.size() == 2);
    CHECK(r.cells[0].coordination == "uncoordinated");
    CHECK(r.cells[1].coordination == "coordinated");
    RunMetrics direct = compute_metrics(run_closed_loop(with_controller(base, ControllerKind::MpcPassivity, false, 3)));
    RunMetrics swept = *r.cells[0].metrics;
    direct.mean_solve_time = 0.0;
    swept.mean_solve_time = 0.0;
    CHECK(direct == swept);
}

TEST_CASE("sweep: fault series do not depend on the controller") {
    const Scenario base = ts::fig2_two_area(ControllerKind::MpcStandard, false);
    const SimTrace a = run_closed_loop(with_controller(base, ControllerKind::MpcStandard, false, 4));
    const SimTrace b = run_closed_loop(with_controller(base, ControllerKind::MpcClf, true, 7));
    CHECK(a.fault == b.fault);
}

TEST_CASE("sweep: output order and bytes are independent of worker count") {
    Scenario base = ts::fig2_two_area(ControllerKind::MpcStandard, false);
    base.duration = 20.0;
    SweepOptions opt;
    opt.modes = {MpcKind::Clf, MpcKind::Standard};
    opt.horizons = {2, 4};
    opt.workers = 1;
    const SweepResult serial = sweep_horizons(base, opt);
    opt.workers = 3;
    const SweepResult parallel = sweep_horizons(base, opt);
    REQUIRE(serial.cells.size() == 8);
    CHECK(serial.cells[0].mode == "clf");
    CHECK(serial.cells[0].horizon == 2);
    CHECK(serial.cells[3].horizon == 4);
    CHECK(serial.cells[4].coordination == "coordinated");
    CHECK(drop_columns(metrics_csv(serial), kNonDeterministicColumns) ==
          drop_columns(metrics_csv(parallel), kNonDeterministicColumns));
}

TEST_CASE("compare: three MPC modes plus conventional") {
    Scenario base = ts::fig2_two_area(ControllerKind::MpcStandard, false);
    base.duration = 10.0;
    const SweepResult r = compare_controllers(base, 2);
    REQUIRE(r.cells.size() == 4);
    CHECK(r.cells[0].mode == "standard");
    CHECK(r.cells[1].mode == "passivity");
    CHECK(r.cells[2].mode == "clf");
    CHECK(r.cells[3].mode == "conventional");
    CHECK(r.cells[3].horizon == 0);
    CHECK(r.cells[3].coordination == "uncoordinated");
    for (const auto& c : r.cells) {
        CHECK(c.metrics.has_value());
    }
}

TEST_CASE("format_number keeps 13 significant digits") {
    CHECK(format_number(0.1) == "0.1");
    CHECK(format_number(1.0 / 3.0) == "0.3333333333333");
    CHECK(format_number(-2.5e-7) == "-2.5e-07");
    const double v = 0.123456789012345678;
    CHECK(std::abs(std::stod(format_number(v)) - v) <= 1e-12 * v);
}
