#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gridmpc/simulation.hpp"

namespace gridmpc {

class EmptyWindowError : public Error {
  public:
    using Error::Error;
};

class IoError : public Error {
  public:
    using Error::Error;
};

struct RunMetrics {
    std::vector<double> max_abs_freq_dev;        // per area [Hz]
    std::vector<double> mean_abs_freq_dev;       // per area [Hz]
    std::optional<double> max_abs_angle_diff;    // [rad], two areas only
    std::optional<double> mean_abs_tie_power;    // [p.u.], two areas only
    std::vector<double> mean_abs_control_input;  // per area, battery plus conventional [p.u.]
    double mean_solve_time = 0.0;                // [s], over optimizer-bearing steps
    std::size_t infeasible_step_count = 0;       // steps that fell back

    friend bool operator==(const RunMetrics&, const RunMetrics&) = default;
};

// Max and mean of absolute values over samples with t0 <= time <= t1.
RunMetrics compute_metrics(const SimTrace& trace, std::optional<std::pair<double, double>> window = std::nullopt);

// One row of a sweep or comparison table. mode is an MPC mode name or
// "conventional"; coordination is "none" for one-area runs.
struct SweepCell {
    std::string topology;
    std::string coordination;
    std::string mode;
    std::size_t horizon = 0;
    std::optional<RunMetrics> metrics;  // empty when the cell failed
    std::string error;
};

struct SweepResult {
    std::vector<SweepCell> cells;
};

struct SweepOptions {
    std::vector<MpcKind> modes;
    std::vector<std::size_t> horizons;
    std::size_t workers = 1;
    std::optional<std::pair<double, double>> window;
};

// Runs every (coordination, mode, N) cell; two-area templates run both
// uncoordinated and coordinated. Output order is fixed by the loop nest
// (coordination, mode, N) whatever order the workers finish in.
SweepResult sweep_horizons(const Scenario& base, const SweepOptions& options);

// Scenario with every area switched to the given controller.
Scenario with_controller(const Scenario& base, ControllerKind kind, bool coordinated, std::size_t horizon);

// The three MPC modes plus conventional control at the base scenario's
// horizon and coordination.
SweepResult compare_controllers(const Scenario& base, std::size_t workers = 1,
                                std::optional<std::pair<double, double>> window = std::nullopt);

// Columns that vary between identical runs.
inline const std::vector<std::string> kNonDeterministicColumns = {"mean_solve_time"};

std::vector<std::string> metrics_csv_header();
std::string metrics_csv(const SweepResult& result);
SweepResult parse_metrics_csv(const std::string& text);
std::string trace_csv(const SimTrace& trace);

// Long-format tables, one per performance measure, written into dir.
// Returns the files written.
std::vector<std::filesystem::path> write_plot_data(const SweepResult& result, const std::filesystem::path& dir);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

// Number formatting shared by every CSV writer.
std::string format_number(double v);

}  // namespace gridmpc
