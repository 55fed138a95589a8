#include "gridmpc/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>

namespace gridmpc {

namespace {

constexpr const char* kNa = "NA";
constexpr const char* kFailed = "FAILED";

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

std::string join(const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) {
            out.push_back(',');
        }
        out += fields[i];
    }
    return out;
}

double parse_number(const std::string& s, const std::string& where) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) {
        throw Error("metrics csv: bad number '" + s + "' in " + where);
    }
    return v;
}

std::string area_value(const std::vector<double>& v, std::size_t i) {
    return i < v.size() ? format_number(v[i]) : kNa;
}

std::string opt_value(const std::optional<double>& v) { return v ? format_number(*v) : kNa; }

struct CellPlan {
    SweepCell cell;
    Scenario scenario;
};

void run_plans(std::vector<CellPlan>& plans, std::size_t workers,
               const std::optional<std::pair<double, double>>& window) {
    std::atomic<std::size_t> next{0};
    auto work = [&]() {
        for (std::size_t i = next.fetch_add(1); i < plans.size(); i = next.fetch_add(1)) {
            CellPlan& p = plans[i];
            try {
                const SimTrace trace = run_closed_loop(p.scenario);
                if (trace.failure) {
                    p.cell.error = *trace.failure;
                } else {
                    p.cell.metrics = compute_metrics(trace, window);
                }
            } catch (const std::exception& e) {
                p.cell.error = e.what();
            }
        }
    };
    const std::size_t n = std::max<std::size_t>(1, std::min(workers, plans.size()));
    if (n == 1) {
        work();
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        pool.emplace_back(work);
    }
    for (auto& t : pool) {
        t.join();
    }
}

ControllerKind controller_for(MpcKind k) {
    switch (k) {
    case MpcKind::Passivity:
        return ControllerKind::MpcPassivity;
    case MpcKind::Clf:
        return ControllerKind::MpcClf;
    case MpcKind::Standard:
        break;
    }
    return ControllerKind::MpcStandard;
}

std::string topology_name(const Scenario& s) { return s.area_count() == 1 ? "onearea" : "twoarea"; }

}  // namespace

std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.13g", v);
    return buf;
}

RunMetrics compute_metrics(const SimTrace& trace, std::optional<std::pair<double, double>> window) {
    std::vector<std::size_t> idx;
    for (std::size_t k = 0; k < trace.size(); ++k) {
        const double t = trace.time[k];
        if (!window || (t >= window->first && t <= window->second)) {
            idx.push_back(k);
        }
    }
    if (idx.empty()) {
        throw EmptyWindowError("compute_metrics: no samples in the requested window");
    }
    const double count = static_cast<double>(idx.size());
    RunMetrics m;
    for (std::size_t a = 0; a < trace.areas; ++a) {
        double mx = 0.0;
        double sum = 0.0;
        double usum = 0.0;
        for (std::size_t k : idx) {
            const double f = std::abs(trace.freq_hz[a][k]);
            mx = std::max(mx, f);
            sum += f;
            usum += std::abs(trace.u_battery[a][k] + trace.u_conventional[a][k]);
        }
        m.max_abs_freq_dev.push_back(mx);
        m.mean_abs_freq_dev.push_back(sum / count);
        m.mean_abs_control_input.push_back(usum / count);
    }
    if (trace.areas == 2) {
        double mx = 0.0;
        double sum = 0.0;
        for (std::size_t k : idx) {
            mx = std::max(mx, std::abs(trace.delta_phi[k]));
            sum += std::abs(trace.tie_power[k]);
        }
        m.max_abs_angle_diff = mx;
        m.mean_abs_tie_power = sum / count;
    }
    double solve = 0.0;
    std::size_t solves = 0;
    for (const auto& series : trace.diagnostics) {
        for (std::size_t k : idx) {
            if (k >= series.size()) {
                continue;
            }
            solve += series[k].solve_time;
            ++solves;
            if (series[k].fallback) {
                ++m.infeasible_step_count;
            }
        }
    }
    m.mean_solve_time = solves ? solve / static_cast<double>(solves) : 0.0;
    return m;
}

Scenario with_controller(const Scenario& base, ControllerKind kind, bool coordinated, std::size_t horizon) {
    Scenario s = base;
    std::fill(s.controllers.begin(), s.controllers.end(), kind);
    s.coordinated = coordinated && s.area_count() == 2 && is_mpc(kind);
    s.mpc.horizon = horizon;
    return s;
}

SweepResult sweep_horizons(const Scenario& base, const SweepOptions& options) {
    std::vector<std::pair<std::string, bool>> coordinations;
    if (base.area_count() == 1) {
        coordinations.emplace_back("none", false);
    } else {
        coordinations.emplace_back("uncoordinated", false);
        coordinations.emplace_back("coordinated", true);
    }
    std::vector<CellPlan> plans;
    for (const auto& [cname, coord] : coordinations) {
        for (MpcKind mode : options.modes) {
            for (std::size_t n : options.horizons) {
                CellPlan p;
                p.cell.topology = topology_name(base);
                p.cell.coordination = cname;
                p.cell.mode = std::string(to_string(mode));
                p.cell.horizon = n;
                p.scenario = with_controller(base, controller_for(mode), coord, n);
                plans.push_back(std::move(p));
            }
        }
    }
    run_plans(plans, options.workers, options.window);
    SweepResult r;
    for (auto& p : plans) {
        r.cells.push_back(std::move(p.cell));
    }
    return r;
}

SweepResult compare_controllers(const Scenario& base, std::size_t workers,
                                std::optional<std::pair<double, double>> window) {
    const bool two = base.area_count() == 2;
    std::vector<CellPlan> plans;
    for (ControllerKind k : {ControllerKind::MpcStandard, ControllerKind::MpcPassivity, ControllerKind::MpcClf,
                             ControllerKind::Conventional}) {
        CellPlan p;
        p.scenario = with_controller(base, k, base.coordinated, base.mpc.horizon);
        p.cell.topology = topology_name(base);
        p.cell.coordination = !two ? "none" : (p.scenario.coordinated ? "coordinated" : "uncoordinated");
        p.cell.mode = to_string(k);
        p.cell.horizon = is_mpc(k) ? base.mpc.horizon : 0;
        plans.push_back(std::move(p));
    }
    run_plans(plans, workers, window);
    SweepResult r;
    for (auto& p : plans) {
        r.cells.push_back(std::move(p.cell));
    }
    return r;
}

std::vector<std::string> metrics_csv_header() {
    return {"topology",
            "coordination",
            "mode",
            "N",
            "max_abs_freq_dev_1",
            "max_abs_freq_dev_2",
            "mean_abs_freq_dev_1",
            "mean_abs_freq_dev_2",
            "max_abs_angle_diff",
            "mean_abs_tie_power",
            "mean_abs_control_input_1",
            "mean_abs_control_input_2",
            "mean_solve_time",
            "infeasible_step_count"};
}

std::string metrics_csv(const SweepResult& result) {
    std::string out = join(metrics_csv_header()) + "\n";
    for (const auto& c : result.cells) {
        std::vector<std::string> f = {c.topology, c.coordination, c.mode, std::to_string(c.horizon)};
        if (!c.metrics) {
            f.resize(metrics_csv_header().size(), kFailed);
        } else {
            const RunMetrics& m = *c.metrics;
            f.push_back(area_value(m.max_abs_freq_dev, 0));
            f.push_back(area_value(m.max_abs_freq_dev, 1));
            f.push_back(area_value(m.mean_abs_freq_dev, 0));
            f.push_back(area_value(m.mean_abs_freq_dev, 1));
            f.push_back(opt_value(m.max_abs_angle_diff));
            f.push_back(opt_value(m.mean_abs_tie_power));
            f.push_back(area_value(m.mean_abs_control_input, 0));
            f.push_back(area_value(m.mean_abs_control_input, 1));
            f.push_back(format_number(m.mean_solve_time));
            f.push_back(std::to_string(m.infeasible_step_count));
        }
        out += join(f) + "\n";
    }
    return out;
}

SweepResult parse_metrics_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || split(line, ',') != metrics_csv_header()) {
        throw Error("metrics csv: unexpected header");
    }
    SweepResult r;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") {
            continue;
        }
        const auto f = split(line, ',');
        const std::string where = "line " + std::to_string(lineno);
        if (f.size() != metrics_csv_header().size()) {
            throw Error("metrics csv: wrong field count on " + where);
        }
        SweepCell c;
        c.topology = f[0];
        c.coordination = f[1];
        c.mode = f[2];
        c.horizon = static_cast<std::size_t>(parse_number(f[3], where));
        if (f[4] == kFailed) {
            c.error = "failed";
            r.cells.push_back(std::move(c));
            continue;
        }
        RunMetrics m;
        auto per_area = [&](std::size_t col, std::vector<double>& dst) {
            dst.push_back(parse_number(f[col], where));
            if (f[col + 1] != kNa) {
                dst.push_back(parse_number(f[col + 1], where));
            }
        };
        auto optional_field = [&](std::size_t col) -> std::optional<double> {
            if (f[col] == kNa) {
                return std::nullopt;
            }
            return parse_number(f[col], where);
        };
        per_area(4, m.max_abs_freq_dev);
        per_area(6, m.mean_abs_freq_dev);
        m.max_abs_angle_diff = optional_field(8);
        m.mean_abs_tie_power = optional_field(9);
        per_area(10, m.mean_abs_control_input);
        m.mean_solve_time = parse_number(f[12], where);
        m.infeasible_step_count = static_cast<std::size_t>(parse_number(f[13], where));
        c.metrics = std::move(m);
        r.cells.push_back(std::move(c));
    }
    return r;
}

std::string trace_csv(const SimTrace& tr) {
    std::vector<std::string> header = {"time"};
    for (int a = 1; a <= 2; ++a) {
        for (const char* name : {"df_hz_", "soc_", "u_battery_", "u_conventional_", "fault_"}) {
            header.push_back(name + std::to_string(a));
        }
    }
    header.insert(header.end(), {"delta_phi", "tie_power"});
    for (int c = 1; c <= 2; ++c) {
        header.push_back("qp_status_" + std::to_string(c));
        header.push_back("fallback_" + std::to_string(c));
        header.push_back("solve_time_" + std::to_string(c));
    }
    std::string out = join(header) + "\n";
    for (std::size_t k = 0; k < tr.size(); ++k) {
        std::vector<std::string> f = {format_number(tr.time[k])};
        for (std::size_t a = 0; a < 2; ++a) {
            if (a < tr.areas) {
                f.push_back(format_number(tr.freq_hz[a][k]));
                f.push_back(format_number(tr.soc[a][k]));
                f.push_back(format_number(tr.u_battery[a][k]));
                f.push_back(format_number(tr.u_conventional[a][k]));
                f.push_back(format_number(tr.fault[a][k]));
            } else {
                f.insert(f.end(), 5, kNa);
            }
        }
        if (tr.areas == 2) {
            f.push_back(format_number(tr.delta_phi[k]));
            f.push_back(format_number(tr.tie_power[k]));
        } else {
            f.insert(f.end(), 2, kNa);
        }
        for (std::size_t c = 0; c < 2; ++c) {
            if (c < tr.diagnostics.size() && k < tr.diagnostics[c].size()) {
                const auto& d = tr.diagnostics[c][k];
                f.emplace_back(to_string(d.status));
                f.push_back(d.fallback ? "1" : "0");
                f.push_back(format_number(d.solve_time));
            } else {
                f.insert(f.end(), 3, kNa);
            }
        }
        out += join(f) + "\n";
    }
    return out;
}

std::vector<std::filesystem::path> write_plot_data(const SweepResult& result, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
    }
    using Getter = std::function<std::vector<std::string>(const RunMetrics&)>;
    auto per_area = [](std::vector<double> RunMetrics::*field) -> Getter {
        return [field](const RunMetrics& m) {
            return std::vector<std::string>{area_value(m.*field, 0), area_value(m.*field, 1)};
        };
    };
    auto scalar = [](std::function<std::string(const RunMetrics&)> g) -> Getter {
        return [g](const RunMetrics& m) { return std::vector<std::string>{g(m)}; };
    };
    const std::vector<std::pair<std::string, Getter>> tables = {
        {"max_freq_dev", per_area(&RunMetrics::max_abs_freq_dev)},
        {"mean_freq_dev", per_area(&RunMetrics::mean_abs_freq_dev)},
        {"max_angle_diff", scalar([](const RunMetrics& m) { return opt_value(m.max_abs_angle_diff); })},
        {"mean_tie_power", scalar([](const RunMetrics& m) { return opt_value(m.mean_abs_tie_power); })},
        {"mean_control_input", per_area(&RunMetrics::mean_abs_control_input)},
        {"solve_time", scalar([](const RunMetrics& m) { return format_number(m.mean_solve_time); })},
    };
    std::vector<std::filesystem::path> written;
    for (const auto& [name, getter] : tables) {
        const bool two_cols = name == "max_freq_dev" || name == "mean_freq_dev" || name == "mean_control_input";
        std::vector<std::string> header = {"topology", "coordination", "mode", "N"};
        if (two_cols) {
            header.insert(header.end(), {"area_1", "area_2"});
        } else {
            header.push_back("value");
        }
        std::string text = join(header) + "\n";
        for (const auto& c : result.cells) {
            std::vector<std::string> f = {c.topology, c.coordination, c.mode, std::to_string(c.horizon)};
            if (c.metrics) {
                const auto vals = getter(*c.metrics);
                f.insert(f.end(), vals.begin(), vals.end());
            } else {
                f.insert(f.end(), two_cols ? 2 : 1, kFailed);
            }
            text += join(f) + "\n";
        }
        const auto path = dir / (name + ".csv");
        write_text_file(path, text);
        written.push_back(path);
    }
    return written;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot open '" + path.string() + "' for writing");
    }
    out << text;
    if (!out) {
        throw IoError("write failed for '" + path.string() + "'");
    }
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path.string() + "' for reading");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace gridmpc
