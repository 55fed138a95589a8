#include "gridmpc/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "gridmpc/metrics.hpp"

#ifndef GRIDMPC_VERSION
#define GRIDMPC_VERSION "dev"
#endif

namespace gridmpc {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kMinHorizon = 2;
constexpr std::size_t kMaxHorizon = 50;

[[noreturn]] void fail(const std::string& where, const std::string& msg) {
    throw ConfigError("config: " + where + ": " + msg);
}

// Strict accessor over one JSON object: every key must be consumed or the
// object is rejected, naming the stray key.
class Reader {
  public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) {
            fail(path_, "expected an object");
        }
    }

    [[nodiscard]] const std::string& path() const { return path_; }
    [[nodiscard]] std::string at(const std::string& key) const { return path_ + "." + key; }

    bool has(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key) && !j_.at(key).is_null();
    }

    const json& raw(const std::string& key) {
        seen_.insert(key);
        return j_.at(key);
    }

    double number(const std::string& key, double fallback) {
        if (!has(key)) {
            return fallback;
        }
        const json& v = j_.at(key);
        if (!v.is_number()) {
            fail(at(key), "expected a number");
        }
        const double d = v.get<double>();
        if (!std::isfinite(d)) {
            fail(at(key), "must be finite");
        }
        return d;
    }

    // null means +infinity.
    double number_or_inf(const std::string& key, double fallback) {
        seen_.insert(key);
        if (!j_.contains(key)) {
            return fallback;
        }
        if (j_.at(key).is_null()) {
            return kInf;
        }
        return number(key, fallback);
    }

    bool boolean(const std::string& key, bool fallback) {
        if (!has(key)) {
            return fallback;
        }
        if (!j_.at(key).is_boolean()) {
            fail(at(key), "expected true or false");
        }
        return j_.at(key).get<bool>();
    }

    std::string string(const std::string& key, const std::string& fallback) {
        if (!has(key)) {
            return fallback;
        }
        if (!j_.at(key).is_string()) {
            fail(at(key), "expected a string");
        }
        return j_.at(key).get<std::string>();
    }

    void finish() const {
        for (const auto& [key, value] : j_.items()) {
            if (!seen_.count(key)) {
                fail(at(key), "unknown key");
            }
        }
    }

  private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

Matrix read_matrix(const json& j, const std::string& where) {
    if (j.is_number()) {
        return Matrix{{j.get<double>()}};
    }
    if (!j.is_array() || j.empty()) {
        fail(where, "expected a matrix (array of rows)");
    }
    // A flat array is read as a diagonal.
    if (j.front().is_number()) {
        std::vector<double> d;
        for (const auto& v : j) {
            if (!v.is_number()) {
                fail(where, "expected numbers");
            }
            d.push_back(v.get<double>());
        }
        return Matrix::diagonal(d);
    }
    const std::size_t rows = j.size();
    const std::size_t cols = j.front().is_array() ? j.front().size() : 0;
    if (cols == 0) {
        fail(where, "expected non-empty rows");
    }
    Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        if (!j[r].is_array() || j[r].size() != cols) {
            fail(where, "ragged matrix");
        }
        for (std::size_t c = 0; c < cols; ++c) {
            if (!j[r][c].is_number()) {
                fail(where, "expected numbers");
            }
            m(r, c) = j[r][c].get<double>();
        }
    }
    if (!m.is_finite()) {
        fail(where, "non-finite entry");
    }
    return m;
}

json matrix_json(const Matrix& m) {
    json rows = json::array();
    for (std::size_t r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (std::size_t c = 0; c < m.cols(); ++c) {
            row.push_back(m(r, c));
        }
        rows.push_back(row);
    }
    return rows;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

// Objects merge recursively; everything else replaces.
void merge_into(json& base, const json& over) {
    if (!base.is_object() || !over.is_object()) {
        base = over;
        return;
    }
    for (const auto& [key, value] : over.items()) {
        if (base.contains(key) && base[key].is_object() && value.is_object()) {
            merge_into(base[key], value);
        } else {
            base[key] = value;
        }
    }
}

// A single object (or one-element array) applies to every area.
std::vector<json> per_area(const json& j, std::size_t n, const std::string& where, bool broadcast) {
    std::vector<json> out;
    if (j.is_object() || j.is_string()) {
        out.assign(broadcast ? n : 1, j);
    } else if (j.is_array()) {
        out.assign(j.begin(), j.end());
        if (out.size() == 1 && broadcast) {
            out.assign(n, out.front());
        }
    } else {
        fail(where, "expected an object or an array");
    }
    if (out.size() > n) {
        fail(where, "has " + std::to_string(out.size()) + " entries for " + std::to_string(n) + " area(s)");
    }
    if (broadcast && out.size() != n) {
        fail(where, "needs one entry per area");
    }
    return out;
}

void check_pair(double lo, double hi, const std::string& lo_key, const std::string& hi_key) {
    if (!(lo < hi)) {
        std::ostringstream os;
        os << lo_key << " (" << lo << ") must be < " << hi_key << " (" << hi << ")";
        throw ConfigError("config: " + os.str());
    }
}

AreaParams read_area(const json& j, const std::string& where) {
    Reader r(j, where);
    AreaParams a;
    a.f0 = r.number("f0", a.f0);
    a.inertia_h = r.number("inertia_h", a.inertia_h);
    a.base_power = r.number("base_power", a.base_power);
    a.load_damping = r.number("load_damping", a.load_damping);
    r.finish();
    try {
        a.validate();
    } catch (const Error& e) {
        fail(where, e.what());
    }
    return a;
}

BatteryParams read_battery(const json& j, const std::string& where) {
    Reader r(j, where);
    BatteryParams b;
    b.capacity = r.number("capacity", b.capacity);
    b.self_discharge = r.number("self_discharge", b.self_discharge);
    b.power_min = r.number("power_min", b.power_min);
    b.power_max = r.number("power_max", b.power_max);
    b.soc_min = r.number("soc_min", b.soc_min);
    b.soc_max = r.number("soc_max", b.soc_max);
    b.ramp_per_step = r.number("ramp_per_step", b.ramp_per_step);
    r.finish();
    check_pair(b.power_min, b.power_max, r.at("power_min"), r.at("power_max"));
    check_pair(b.soc_min, b.soc_max, r.at("soc_min"), r.at("soc_max"));
    try {
        b.validate();
    } catch (const Error& e) {
        fail(where, e.what());
    }
    return b;
}

ConventionalParams read_conventional(const json& j, const std::string& where, const AreaParams& area,
                                     json& raw) {
    Reader r(j, where);
    ConventionalParams c;
    const bool has_s = r.has("droop_s");
    const bool has_rating = r.has("droop_hz") || r.has("droop_mw");
    const bool has_base = r.has("base_power_mw");
    if (has_s && has_rating) {
        fail(where, "give either droop_s or droop_hz/droop_mw, not both");
    }
    const double base_mw = r.number("base_power_mw", 0.0);
    if (has_base) {
        raw["base_power_mw"] = base_mw;
    }
    if (has_rating) {
        if (!has_base) {
            fail(where, "droop_hz/droop_mw need base_power_mw for the per-unit conversion");
        }
        const double hz = r.number("droop_hz", 0.0);
        const double mw = r.number("droop_mw", 0.0);
        if (!(hz > 0.0 && mw > 0.0 && base_mw > 0.0)) {
            fail(where, "droop_hz, droop_mw and base_power_mw must be > 0");
        }
        c.droop_s = droop_per_unit(hz, mw, base_mw);
        raw["droop_hz"] = hz;
        raw["droop_mw"] = mw;
    } else {
        c.droop_s = r.number("droop_s", c.droop_s);
    }
    if (!(c.droop_s > 0.0)) {
        fail(r.at("droop_s"), "must be > 0");
    }
    c.t_n = r.number("t_n", c.t_n);
    c.c_p = r.number("c_p", c.c_p);
    const bool has_b = r.has("bias_b");
    const bool has_b_mw = r.has("bias_mw_per_hz");
    if (has_b && has_b_mw) {
        fail(where, "give either bias_b or bias_mw_per_hz, not both");
    }
    if (has_b_mw) {
        if (!has_base) {
            fail(where, "bias_mw_per_hz needs base_power_mw for the per-unit conversion");
        }
        const double b_mw = r.number("bias_mw_per_hz", 0.0);
        raw["bias_mw_per_hz"] = b_mw;
        c.bias_b = b_mw / base_mw;
    } else if (has_b && r.raw("bias_b").is_string()) {
        if (r.raw("bias_b").get<std::string>() != "auto") {
            fail(r.at("bias_b"), "expected a number or \"auto\"");
        }
        c.bias_b = natural_bias(area.load_damping, c.droop_s);
    } else if (has_b) {
        c.bias_b = r.number("bias_b", c.bias_b);
    } else {
        c.bias_b = natural_bias(area.load_damping, c.droop_s);
    }
    c.secondary_limit = r.number("secondary_limit", c.secondary_limit);
    c.primary_enabled = r.boolean("primary", c.primary_enabled);
    c.secondary_enabled = r.boolean("secondary", c.secondary_enabled);
    r.finish();
    try {
        c.validate();
    } catch (const Error& e) {
        fail(where, e.what());
    }
    return c;
}

FaultKind parse_fault_kind(const std::string& s, const std::string& where) {
    for (auto k : {FaultKind::None, FaultKind::AsymmetricChirp, FaultKind::Step, FaultKind::Ramp,
                   FaultKind::Composite, FaultKind::FromFile}) {
        if (to_string(k) == s) {
            return k;
        }
    }
    fail(where, "unknown fault kind '" + s + "'");
}

FaultSpec read_fault(const json& j, const std::string& where, const std::filesystem::path& base_dir) {
    if (j.is_null()) {
        return {};
    }
    if (j.is_string()) {
        if (j.get<std::string>() == "paper-fig2") {
            return paper_fig2_fault();
        }
        if (j.get<std::string>() == "none") {
            return {};
        }
        fail(where, "unknown fault preset '" + j.get<std::string>() + "'");
    }
    Reader r(j, where);
    FaultSpec f;
    if (r.has("preset")) {
        const std::string p = r.string("preset", "");
        if (p != "paper-fig2") {
            fail(r.at("preset"), "unknown fault preset '" + p + "'");
        }
        f = paper_fig2_fault();
    }
    if (r.has("kind")) {
        f.kind = parse_fault_kind(r.string("kind", ""), r.at("kind"));
    }
    f.t_on = r.number("t_on", f.t_on);
    f.t_off = r.number_or_inf("t_off", f.t_off);
    switch (f.kind) {
    case FaultKind::AsymmetricChirp:
        f.amplitude = r.number("amplitude", f.amplitude);
        f.f_start = r.number("f_start", f.f_start);
        f.f_end = r.number("f_end", f.f_end);
        f.duty_asymmetry = r.number("duty_asymmetry", f.duty_asymmetry);
        f.dc_drift = r.number("dc_drift", f.dc_drift);
        break;
    case FaultKind::Step:
    case FaultKind::Ramp:
        f.magnitude = r.number("magnitude", f.magnitude);
        break;
    case FaultKind::Composite:
        if (!r.has("components") || !r.raw("components").is_array()) {
            fail(where, "composite fault needs a components array");
        }
        for (std::size_t i = 0; i < r.raw("components").size(); ++i) {
            f.components.push_back(
                read_fault(r.raw("components")[i], r.at("components") + "[" + std::to_string(i) + "]", base_dir));
        }
        break;
    case FaultKind::FromFile: {
        const std::string p = r.string("path", "");
        if (p.empty()) {
            fail(where, "file fault needs a path");
        }
        std::filesystem::path fp(p);
        if (fp.is_relative() && !base_dir.empty()) {
            fp = base_dir / fp;
        }
        f.path = fp.string();
        try {
            load_fault_file(f);
        } catch (const Error& e) {
            fail(where, e.what());
        }
        break;
    }
    case FaultKind::None:
        break;
    }
    r.finish();
    try {
        f.validate();
    } catch (const Error& e) {
        fail(where, e.what());
    }
    return f;
}

json fault_json(const FaultSpec& f) {
    json j;
    j["kind"] = to_string(f.kind);
    if (f.kind == FaultKind::None) {
        return j;
    }
    j["t_on"] = f.t_on;
    j["t_off"] = number_or_null(f.t_off);
    switch (f.kind) {
    case FaultKind::AsymmetricChirp:
        j["amplitude"] = f.amplitude;
        j["f_start"] = f.f_start;
        j["f_end"] = f.f_end;
        j["duty_asymmetry"] = f.duty_asymmetry;
        j["dc_drift"] = f.dc_drift;
        break;
    case FaultKind::Step:
    case FaultKind::Ramp:
        j["magnitude"] = f.magnitude;
        break;
    case FaultKind::Composite:
        j["components"] = json::array();
        for (const auto& c : f.components) {
            j["components"].push_back(fault_json(c));
        }
        break;
    case FaultKind::FromFile:
        j["path"] = f.path;
        break;
    case FaultKind::None:
        break;
    }
    return j;
}

MpcSetup read_mpc(const json& j, const std::string& where) {
    Reader r(j, where);
    MpcSetup m;
    const double n = r.number("horizon", static_cast<double>(m.horizon));
    if (n != std::floor(n) || n < static_cast<double>(kMinHorizon) || n > static_cast<double>(kMaxHorizon)) {
        fail(r.at("horizon"), "must be an integer in [2, 50]");
    }
    m.horizon = static_cast<std::size_t>(n);
    if (r.has("q_local")) {
        m.q_local = read_matrix(r.raw("q_local"), r.at("q_local"));
    }
    if (r.has("r_local")) {
        m.r_local = read_matrix(r.raw("r_local"), r.at("r_local"));
    }
    if (r.has("q_joint")) {
        m.q_joint = read_matrix(r.raw("q_joint"), r.at("q_joint"));
    }
    if (r.has("r_joint")) {
        m.r_joint = read_matrix(r.raw("r_joint"), r.at("r_joint"));
    }
    if (r.has("q_term_local")) {
        m.q_term_local = read_matrix(r.raw("q_term_local"), r.at("q_term_local"));
    }
    if (r.has("q_term_joint")) {
        m.q_term_joint = read_matrix(r.raw("q_term_joint"), r.at("q_term_joint"));
    }
    m.slack_weight = r.number("slack_weight", m.slack_weight);
    m.freq_bound_hz = r.number("freq_bound_hz", m.freq_bound_hz);
    m.fallback_gain = r.number("fallback_gain", m.fallback_gain);
    r.finish();
    if (m.q_local.rows() != 2 || m.q_local.cols() != 2) {
        fail(r.at("q_local"), "must be 2 x 2");
    }
    if (m.r_local.rows() != 1 || m.r_local.cols() != 1) {
        fail(r.at("r_local"), "must be 1 x 1");
    }
    if (m.q_joint.rows() != 5 || m.q_joint.cols() != 5) {
        fail(r.at("q_joint"), "must be 5 x 5");
    }
    if (m.r_joint.rows() != 2 || m.r_joint.cols() != 2) {
        fail(r.at("r_joint"), "must be 2 x 2");
    }
    if (m.q_term_local && (m.q_term_local->rows() != 2 || m.q_term_local->cols() != 2)) {
        fail(r.at("q_term_local"), "must be 2 x 2");
    }
    if (m.q_term_joint && (m.q_term_joint->rows() != 5 || m.q_term_joint->cols() != 5)) {
        fail(r.at("q_term_joint"), "must be 5 x 5");
    }
    if (!(m.slack_weight > 0.0)) {
        fail(r.at("slack_weight"), "must be > 0");
    }
    if (!(m.freq_bound_hz > 0.0)) {
        fail(r.at("freq_bound_hz"), "must be > 0");
    }
    if (!(m.fallback_gain >= 0.0)) {
        fail(r.at("fallback_gain"), "must be >= 0");
    }
    return m;
}

Scenario default_scenario(std::size_t areas, bool coordinated) {
    Scenario s;
    s.plant.areas.assign(areas, AreaParams{});
    s.plant.batteries.assign(areas, BatteryParams{});
    s.plant.tie.p_hat_t = areas == 2 ? 0.2 : 0.0;
    s.controllers.assign(areas, ControllerKind::MpcPassivity);
    s.conventional.assign(areas, ConventionalParams{});
    s.coordinated = coordinated;
    s.faults.assign(areas, FaultSpec{});
    s.faults[0] = paper_fig2_fault();
    return s;
}

json paper_conventional_raw() {
    return json{{"droop_hz", 0.2},  {"droop_mw", 3000.0},         {"base_power_mw", 370000.0},
                {"t_n", 240.0},     {"c_p", 0.17},                {"bias_mw_per_hz", 20550.0},
                {"secondary_limit", 0.2}, {"primary", true},      {"secondary", true}};
}

}  // namespace

std::string software_version() { return GRIDMPC_VERSION; }

std::vector<PresetInfo> list_presets() {
    return {
        {"paper-onearea", "one area with battery, passivity MPC, N = 3, chirp fault"},
        {"paper-twoarea-uncoordinated", "two areas, tie line 0.2 p.u., one local MPC per area"},
        {"paper-twoarea-coordinated", "two areas, tie line 0.2 p.u., one joint MPC with full state"},
    };
}

json preset_json(const std::string& name) {
    Scenario s;
    if (name == "paper-onearea") {
        s = default_scenario(1, false);
    } else if (name == "paper-twoarea-uncoordinated") {
        s = default_scenario(2, false);
    } else if (name == "paper-twoarea-coordinated") {
        s = default_scenario(2, true);
    } else {
        throw ConfigError("config: unknown preset '" + name + "'");
    }
    json j = scenario_json(s);
    j["conventional"] = json::array();
    for (std::size_t i = 0; i < s.area_count(); ++i) {
        j["conventional"].push_back(paper_conventional_raw());
    }
    return j;
}

json scenario_json(const Scenario& s) {
    json j;
    j["topology"] = s.area_count() == 1 ? "onearea" : "twoarea";
    j["controllers"] = json::array();
    for (auto k : s.controllers) {
        j["controllers"].push_back(to_string(k));
    }
    j["coordinated"] = s.coordinated;
    j["duration"] = s.duration;
    j["ts"] = s.ts;
    j["dt"] = s.dt;
    j["seed"] = s.seed;
    j["areas"] = json::array();
    for (const auto& a : s.plant.areas) {
        j["areas"].push_back(
            {{"f0", a.f0}, {"inertia_h", a.inertia_h}, {"base_power", a.base_power}, {"load_damping", a.load_damping}});
    }
    j["batteries"] = json::array();
    for (const auto& b : s.plant.batteries) {
        j["batteries"].push_back({{"capacity", b.capacity},
                                  {"self_discharge", b.self_discharge},
                                  {"power_min", b.power_min},
                                  {"power_max", b.power_max},
                                  {"soc_min", b.soc_min},
                                  {"soc_max", b.soc_max},
                                  {"ramp_per_step", b.ramp_per_step}});
    }
    j["tie"] = {{"p_hat_t", s.plant.tie.p_hat_t}};
    json m;
    m["horizon"] = s.mpc.horizon;
    m["q_local"] = matrix_json(s.mpc.q_local);
    m["r_local"] = matrix_json(s.mpc.r_local);
    m["q_joint"] = matrix_json(s.mpc.q_joint);
    m["r_joint"] = matrix_json(s.mpc.r_joint);
    m["q_term_local"] = s.mpc.q_term_local ? matrix_json(*s.mpc.q_term_local) : json(nullptr);
    m["q_term_joint"] = s.mpc.q_term_joint ? matrix_json(*s.mpc.q_term_joint) : json(nullptr);
    m["slack_weight"] = s.mpc.slack_weight;
    m["freq_bound_hz"] = s.mpc.freq_bound_hz;
    m["fallback_gain"] = s.mpc.fallback_gain;
    j["mpc"] = m;
    j["conventional"] = json::array();
    for (const auto& c : s.conventional) {
        j["conventional"].push_back({{"droop_s", c.droop_s},
                                     {"t_n", c.t_n},
                                     {"c_p", c.c_p},
                                     {"bias_b", c.bias_b},
                                     {"secondary_limit", c.secondary_limit},
                                     {"primary", c.primary_enabled},
                                     {"secondary", c.secondary_enabled}});
    }
    j["faults"] = json::array();
    for (const auto& f : s.faults) {
        j["faults"].push_back(fault_json(f));
    }
    if (s.initial_state) {
        j["initial_state"] = *s.initial_state;
    } else {
        j["initial_state"] = nullptr;
    }
    return j;
}

ScenarioConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
    json user;
    try {
        user = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    if (!user.is_object()) {
        throw ConfigError("config: $: expected an object");
    }
    ScenarioConfig out;
    json doc = json::object();
    if (user.contains("preset")) {
        if (!user["preset"].is_string()) {
            fail("$.preset", "expected a string");
        }
        out.preset = user["preset"].get<std::string>();
        doc = preset_json(out.preset);
    }
    user.erase("preset");
    user.erase("manifest");
    merge_into(doc, user);

    Reader r(doc, "$");
    const std::string topo = r.string("topology", "onearea");
    std::size_t n = 0;
    if (topo == "onearea") {
        n = 1;
    } else if (topo == "twoarea") {
        n = 2;
    } else {
        fail(r.at("topology"), "expected \"onearea\" or \"twoarea\"");
    }
    Scenario s = default_scenario(n, false);
    s.coordinated = r.boolean("coordinated", false);
    s.duration = r.number("duration", s.duration);
    s.ts = r.number("ts", s.ts);
    s.dt = r.number("dt", s.dt);
    const double seed = r.number("seed", 0.0);
    if (seed < 0.0 || seed != std::floor(seed)) {
        fail(r.at("seed"), "must be a non-negative integer");
    }
    s.seed = static_cast<std::uint64_t>(seed);

    if (r.has("controllers")) {
        const auto list = per_area(r.raw("controllers"), n, r.at("controllers"), true);
        for (std::size_t i = 0; i < n; ++i) {
            const std::string where = r.at("controllers") + "[" + std::to_string(i) + "]";
            if (!list[i].is_string()) {
                fail(where, "expected a controller name");
            }
            const auto k = parse_controller_kind(list[i].get<std::string>());
            if (!k) {
                fail(where, "unknown controller '" + list[i].get<std::string>() +
                                "' (none, conventional, standard, passivity, clf)");
            }
            s.controllers[i] = *k;
        }
    }
    if (r.has("areas")) {
        const auto list = per_area(r.raw("areas"), n, r.at("areas"), true);
        for (std::size_t i = 0; i < n; ++i) {
            s.plant.areas[i] = read_area(list[i], r.at("areas") + "[" + std::to_string(i) + "]");
        }
    }
    if (r.has("batteries")) {
        const auto list = per_area(r.raw("batteries"), n, r.at("batteries"), true);
        for (std::size_t i = 0; i < n; ++i) {
            s.plant.batteries[i] = read_battery(list[i], r.at("batteries") + "[" + std::to_string(i) + "]");
        }
    }
    if (r.has("tie")) {
        Reader t(r.raw("tie"), r.at("tie"));
        s.plant.tie.p_hat_t = t.number("p_hat_t", s.plant.tie.p_hat_t);
        t.finish();
        if (!(s.plant.tie.p_hat_t >= 0.0)) {
            fail(t.at("p_hat_t"), "must be >= 0");
        }
    }
    if (n == 1) {
        s.plant.tie.p_hat_t = 0.0;
    }
    if (r.has("mpc")) {
        s.mpc = read_mpc(r.raw("mpc"), r.at("mpc"));
    }
    out.raw_units = json::array();
    if (r.has("conventional")) {
        const auto list = per_area(r.raw("conventional"), n, r.at("conventional"), true);
        for (std::size_t i = 0; i < n; ++i) {
            json raw = json::object();
            s.conventional[i] = read_conventional(list[i], r.at("conventional") + "[" + std::to_string(i) + "]",
                                                  s.plant.areas[i], raw);
            out.raw_units.push_back(raw);
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            s.conventional[i].bias_b = natural_bias(s.plant.areas[i].load_damping, s.conventional[i].droop_s);
        }
    }
    if (r.has("faults")) {
        const auto list = per_area(r.raw("faults"), n, r.at("faults"), false);
        for (std::size_t i = 0; i < n; ++i) {
            s.faults[i] = i < list.size()
                              ? read_fault(list[i], r.at("faults") + "[" + std::to_string(i) + "]", base_dir)
                              : FaultSpec{};
        }
    }
    if (r.has("initial_state")) {
        const json& v = r.raw("initial_state");
        if (!v.is_array() || v.size() != s.plant.state_dim()) {
            fail(r.at("initial_state"), "expected " + std::to_string(s.plant.state_dim()) + " numbers");
        }
        PlantState x;
        for (const auto& e : v) {
            if (!e.is_number()) {
                fail(r.at("initial_state"), "expected numbers");
            }
            x.push_back(e.get<double>());
        }
        s.initial_state = x;
    }
    r.finish();

    if (s.coordinated && n != 2) {
        fail(r.at("coordinated"), "coordinated control needs topology \"twoarea\"");
    }
    try {
        s.validate();
    } catch (const Error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    out.scenario = std::move(s);
    return out;
}

ScenarioConfig load_config(const std::string& path_or_preset) {
    for (const auto& p : list_presets()) {
        if (p.name == path_or_preset) {
            return parse_config(json{{"preset", p.name}}.dump());
        }
    }
    const std::filesystem::path path(path_or_preset);
    std::string text;
    try {
        text = read_text_file(path);
    } catch (const IoError& e) {
        throw ConfigError(std::string("config: ") + e.what() + " (not a preset name either)");
    }
    return parse_config(text, path.parent_path());
}

json build_manifest(const ScenarioConfig& cfg) {
    const Scenario& s = cfg.scenario;
    json j = scenario_json(s);
    json m;
    m["software"] = "gridmpc";
    m["version"] = software_version();
    if (!cfg.preset.empty()) {
        m["preset"] = cfg.preset;
    }
    json derived;
    derived["areas"] = json::array();
    for (std::size_t i = 0; i < s.area_count(); ++i) {
        const AreaParams& a = s.plant.areas[i];
        derived["areas"].push_back({{"a_freq", a.a_freq()}, {"b_freq", a.b_freq()}, {"beta", a.beta()}});
    }
    derived["conventional"] = json::array();
    for (std::size_t i = 0; i < s.area_count(); ++i) {
        const ConventionalParams& c = s.conventional[i];
        json e = {{"droop_s_hz_per_pu", c.droop_s}, {"bias_b_pu_per_hz", c.bias_b},
                  {"natural_bias_pu_per_hz", natural_bias(s.plant.areas[i].load_damping, c.droop_s)}};
        if (i < cfg.raw_units.size()) {
            e["raw"] = cfg.raw_units[i];
            if (cfg.raw_units[i].contains("base_power_mw")) {
                e["bias_mw_per_hz"] = c.bias_b * cfg.raw_units[i]["base_power_mw"].get<double>();
            }
        }
        derived["conventional"].push_back(e);
    }
    try {
        const DiscreteModel local = discretize(build_one_area(s.plant.areas[0], s.plant.batteries[0]), s.ts);
        const std::size_t f[] = {0};
        derived["q_term_local"] = matrix_json(
            s.mpc.q_term_local ? *s.mpc.q_term_local : clf_terminal_cost(local, s.mpc.q_local, f));
        if (s.area_count() == 2) {
            const auto& p = s.plant;
            const DiscreteModel joint = discretize(
                build_two_area_coupled(p.areas[0], p.areas[1], p.batteries[0], p.batteries[1], p.tie), s.ts);
            const std::size_t fj[] = {layout::kFreq1, layout::kFreq2};
            const std::size_t cj[] = {layout::kAngle};
            derived["q_term_joint"] = matrix_json(
                s.mpc.q_term_joint ? *s.mpc.q_term_joint : clf_terminal_cost(joint, s.mpc.q_joint, fj, cj));
        }
    } catch (const Error& e) {
        derived["q_term_error"] = e.what();
    }
    m["derived"] = derived;
    m["reference_values"] = {
        {"q_term_onearea", 40005.0},
        {"q_term_coordinated", json::array({json::array({22137.0, 17868.0}), json::array({17868.0, 22137.0})})},
        {"bias_mw_per_hz", 20550.0},
        {"note", "published values kept for comparison; not used by the simulation"}};
    m["conventions"] = {{"frequency_states", "df/f0 (dimensionless)"},
                        {"initial_state_layout", s.area_count() == 1 ? "[df/f0, soc]"
                                                                     : "[df1/f0, soc1, df2/f0, soc2, dphi_rad]"},
                        {"mean_metrics", "mean of absolute values"},
                        {"angle_metric", "unwrapped angle difference"},
                        {"controller_angle", "wrapped to (-pi, pi]"},
                        {"t_off_null", "no end time"}};
    j["manifest"] = m;
    return j;
}

}  // namespace gridmpc
