#include "gridmpc/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <thread>

#include "gridmpc/config.hpp"
#include "gridmpc/metrics.hpp"

namespace gridmpc {

namespace {

class UsageError : public Error {
  public:
    using Error::Error;
};

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != ' ') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

std::size_t parse_count(const std::string& s) {
    if (s.empty() || !std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        throw UsageError("expected a positive integer, got '" + s + "'");
    }
    return static_cast<std::size_t>(std::stoul(s));
}

std::vector<MpcKind> parse_modes(const std::string& text) {
    std::vector<MpcKind> out;
    for (const auto& m : split_list(text)) {
        const auto k = parse_mpc_kind(m);
        if (!k) {
            throw UsageError("unknown mode '" + m + "' (standard, passivity, clf)");
        }
        if (std::find(out.begin(), out.end(), *k) == out.end()) {
            out.push_back(*k);
        }
    }
    return out;
}

std::optional<std::pair<double, double>> parse_window(const std::string& text) {
    if (text.empty()) {
        return std::nullopt;
    }
    const auto parts = split_list(text);
    if (parts.size() != 2) {
        throw UsageError("window must be 't0,t1'");
    }
    try {
        const double t0 = std::stod(parts[0]);
        const double t1 = std::stod(parts[1]);
        if (!(t0 <= t1)) {
            throw UsageError("window needs t0 <= t1");
        }
        return std::make_pair(t0, t1);
    } catch (const std::invalid_argument&) {
        throw UsageError("window must be two numbers 't0,t1'");
    }
}

void ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
    }
}

void print_table(const SweepResult& r, std::ostream& out) {
    out << std::left << std::setw(14) << "coordination" << std::setw(13) << "mode" << std::setw(4) << "N"
        << std::right << std::setw(12) << "max|df| Hz" << std::setw(13) << "mean|df| Hz" << std::setw(12)
        << "max|dphi|" << std::setw(12) << "mean|u|" << std::setw(10) << "fallback" << "\n";
    out << std::setprecision(4);
    for (const auto& c : r.cells) {
        out << std::left << std::setw(14) << c.coordination << std::setw(13) << c.mode << std::setw(4)
            << (c.horizon ? std::to_string(c.horizon) : "-") << std::right;
        if (!c.metrics) {
            out << "  FAILED: " << c.error << "\n";
            continue;
        }
        const RunMetrics& m = *c.metrics;
        const double max_f = *std::max_element(m.max_abs_freq_dev.begin(), m.max_abs_freq_dev.end());
        const double mean_f = *std::max_element(m.mean_abs_freq_dev.begin(), m.mean_abs_freq_dev.end());
        const double mean_u = *std::max_element(m.mean_abs_control_input.begin(), m.mean_abs_control_input.end());
        out << std::setw(12) << max_f << std::setw(13) << mean_f << std::setw(12)
            << (m.max_abs_angle_diff ? format_number(*m.max_abs_angle_diff).substr(0, 10) : "-") << std::setw(12)
            << mean_u << std::setw(10) << m.infeasible_step_count << "\n";
    }
}

std::size_t default_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

int run_simulate(const std::string& config, const std::string& out_dir, std::ostream& out) {
    const ScenarioConfig cfg = load_config(config);
    const std::filesystem::path dir(out_dir);
    ensure_dir(dir);
    write_text_file(dir / "manifest.json", build_manifest(cfg).dump(2) + "\n");
    const SimTrace trace = run_closed_loop(cfg.scenario);
    write_text_file(dir / "trace.csv", trace_csv(trace));
    if (trace.failure) {
        throw Error("simulation halted: " + *trace.failure + " (partial trace written)");
    }
    SweepResult r;
    SweepCell cell;
    cell.topology = cfg.scenario.area_count() == 1 ? "onearea" : "twoarea";
    cell.coordination =
        cfg.scenario.area_count() == 1 ? "none" : (cfg.scenario.coordinated ? "coordinated" : "uncoordinated");
    cell.mode = to_string(cfg.scenario.controllers[0]);
    cell.horizon = is_mpc(cfg.scenario.controllers[0]) ? cfg.scenario.mpc.horizon : 0;
    cell.metrics = compute_metrics(trace);
    r.cells.push_back(cell);
    write_text_file(dir / "metrics.csv", metrics_csv(r));
    print_table(r, out);
    out << "wrote " << (dir / "trace.csv").string() << ", " << (dir / "metrics.csv").string() << ", "
        << (dir / "manifest.json").string() << "\n";
    return 0;
}

int run_sweep(const std::string& config, const std::string& n_text, const std::string& modes_text,
              std::size_t workers, const std::string& window_text, const std::string& out_dir, std::ostream& out,
              std::ostream& err) {
    SweepOptions opt;
    opt.horizons = parse_horizon_list(n_text);
    opt.modes = parse_modes(modes_text);
    opt.workers = workers;
    opt.window = parse_window(window_text);
    const ScenarioConfig cfg = load_config(config);
    const std::filesystem::path dir(out_dir);
    ensure_dir(dir);
    nlohmann::json manifest = build_manifest(cfg);
    manifest["manifest"]["sweep"] = {{"horizons", opt.horizons}, {"modes", split_list(modes_text)},
                                     {"workers", workers}};
    write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
    const SweepResult r = sweep_horizons(cfg.scenario, opt);
    write_text_file(dir / "sweep_metrics.csv", metrics_csv(r));
    write_plot_data(r, dir / "plot_data");
    std::size_t failed = 0;
    for (const auto& c : r.cells) {
        if (!c.metrics) {
            ++failed;
            err << "cell " << c.coordination << "/" << c.mode << "/N=" << c.horizon << " failed: " << c.error << "\n";
        }
    }
    out << r.cells.size() << " cells (" << failed << " failed) -> " << (dir / "sweep_metrics.csv").string() << "\n";
    return 0;
}

int run_compare(const std::string& config, std::size_t workers, const std::string& window_text,
                const std::string& out_dir, std::ostream& out) {
    const auto window = parse_window(window_text);
    const ScenarioConfig cfg = load_config(config);
    const std::filesystem::path dir(out_dir);
    ensure_dir(dir);
    write_text_file(dir / "manifest.json", build_manifest(cfg).dump(2) + "\n");
    const SweepResult r = compare_controllers(cfg.scenario, workers, window);
    write_text_file(dir / "compare_metrics.csv", metrics_csv(r));
    print_table(r, out);
    return 0;
}

}  // namespace

std::vector<std::size_t> parse_horizon_list(const std::string& text) {
    std::vector<std::size_t> out;
    const auto dots = text.find("..");
    if (dots != std::string::npos) {
        const std::size_t a = parse_count(text.substr(0, dots));
        const std::size_t b = parse_count(text.substr(dots + 2));
        if (a > b) {
            throw UsageError("horizon range '" + text + "' is empty");
        }
        for (std::size_t n = a; n <= b; ++n) {
            out.push_back(n);
        }
    } else {
        for (const auto& part : split_list(text)) {
            out.push_back(parse_count(part));
        }
    }
    for (std::size_t n : out) {
        if (n < 2 || n > 50) {
            throw UsageError("horizon " + std::to_string(n) + " outside [2, 50]");
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

int main_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Grid-frequency MPC simulation toolkit", "gridmpc"};
    app.require_subcommand(1);
    app.set_version_flag("--version", software_version());

    std::string config;
    std::string out_dir = "out";
    std::string n_text = "2..50";
    std::string modes_text = "standard,passivity,clf";
    std::string window_text;
    std::size_t workers = default_workers();

    auto* sim = app.add_subcommand("simulate", "run one scenario; writes trace.csv, metrics.csv, manifest.json");
    sim->add_option("config", config, "config file or preset name")->required();
    sim->add_option("--out", out_dir, "output directory");

    auto* sweep = app.add_subcommand("sweep", "horizon sweep over MPC modes; writes sweep_metrics.csv and plot data");
    sweep->add_option("config", config, "config file or preset name")->required();
    sweep->add_option("--n", n_text, "horizons: a..b or a,b,c");
    sweep->add_option("--modes", modes_text, "comma list of standard, passivity, clf");
    sweep->add_option("--workers", workers, "parallel simulations")->check(CLI::PositiveNumber);
    sweep->add_option("--window", window_text, "metrics window 't0,t1' in seconds");
    sweep->add_option("--out", out_dir, "output directory");

    auto* cmp = app.add_subcommand("compare", "standard, passivity, CLF and conventional side by side");
    cmp->add_option("config", config, "config file or preset name")->required();
    cmp->add_option("--workers", workers, "parallel simulations")->check(CLI::PositiveNumber);
    cmp->add_option("--window", window_text, "metrics window 't0,t1' in seconds");
    cmp->add_option("--out", out_dir, "output directory");

    auto* presets = app.add_subcommand("presets", "list built-in presets");

    std::vector<const char*> argv;
    argv.push_back("gridmpc");
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return 2;
    }

    try {
        if (*presets) {
            for (const auto& p : list_presets()) {
                out << std::left << std::setw(30) << p.name << p.description << "\n";
            }
            return 0;
        }
        if (*sim) {
            return run_simulate(config, out_dir, out);
        }
        if (*sweep) {
            return run_sweep(config, n_text, modes_text, workers, window_text, out_dir, out, err);
        }
        if (*cmp) {
            return run_compare(config, workers, window_text, out_dir, out);
        }
    } catch (const UsageError& e) {
        err << "gridmpc: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        err << "gridmpc: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "gridmpc: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

int main_dispatch(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) {
        args.emplace_back(argv[i]);
    }
    return main_dispatch(args, std::cout, std::cerr);
}

}  // namespace gridmpc
