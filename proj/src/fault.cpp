#include "gridmpc/fault.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "gridmpc/linalg.hpp"

namespace gridmpc {

std::string to_string(FaultKind k) {
    switch (k) {
    case FaultKind::None:
        return "none";
    case FaultKind::AsymmetricChirp:
        return "asymmetric_chirp";
    case FaultKind::Step:
        return "step";
    case FaultKind::Ramp:
        return "ramp";
    case FaultKind::Composite:
        return "composite";
    case FaultKind::FromFile:
        return "file";
    }
    return "unknown";
}

void FaultSpec::validate() const {
    if (kind == FaultKind::None) {
        return;
    }
    if (std::isnan(t_on) || std::isnan(t_off) || !(t_on < t_off) || t_on < 0.0) {
        throw Error("fault: need 0 <= t_on < t_off");
    }
    switch (kind) {
    case FaultKind::AsymmetricChirp:
        if (!(amplitude >= 0.0) || !std::isfinite(amplitude)) {
            throw Error("fault: amplitude must be >= 0");
        }
        if (!(duty_asymmetry > 0.0 && duty_asymmetry < 1.0)) {
            throw Error("fault: duty_asymmetry must lie in (0, 1)");
        }
        if (!std::isfinite(t_off)) {
            throw Error("fault: chirp needs a finite t_off to define the sweep");
        }
        if (!(f_start >= 0.0 && f_end >= 0.0) || !std::isfinite(dc_drift)) {
            throw Error("fault: chirp frequencies must be >= 0 and drift finite");
        }
        break;
    case FaultKind::Step:
        if (!std::isfinite(magnitude)) {
            throw Error("fault: magnitude must be finite");
        }
        break;
    case FaultKind::Ramp:
        if (!std::isfinite(magnitude) || !std::isfinite(t_off)) {
            throw Error("fault: ramp needs finite magnitude and t_off");
        }
        break;
    case FaultKind::Composite:
        for (const auto& c : components) {
            c.validate();
        }
        break;
    case FaultKind::FromFile:
        if (sample_t.empty() || sample_t.size() != sample_p.size()) {
            throw Error("fault: file samples not loaded (" + path + ")");
        }
        break;
    case FaultKind::None:
        break;
    }
}

double generate_fault(const FaultSpec& spec, double t) {
    if (spec.kind == FaultKind::None || spec.kind == FaultKind::Composite) {
        double sum = 0.0;
        for (const auto& c : spec.components) {
            sum += generate_fault(c, t);
        }
        return spec.kind == FaultKind::None ? 0.0 : sum;
    }
    if (t < spec.t_on || t > spec.t_off) {
        return 0.0;
    }
    const double tau = t - spec.t_on;
    switch (spec.kind) {
    case FaultKind::AsymmetricChirp: {
        const double span = spec.t_off - spec.t_on;
        const double cycles = spec.f_start * tau + 0.5 * (spec.f_end - spec.f_start) * tau * tau / span;
        const double p = cycles - std::floor(cycles);
        const double d = spec.duty_asymmetry;
        const double wave = p < d ? std::sin(std::numbers::pi * p / d) : -std::sin(std::numbers::pi * (p - d) / (1.0 - d));
        return spec.amplitude * wave + spec.dc_drift * tau;
    }
    case FaultKind::Step:
        return spec.magnitude;
    case FaultKind::Ramp:
        return spec.magnitude * tau / (spec.t_off - spec.t_on);
    case FaultKind::FromFile: {
        const auto& ts = spec.sample_t;
        if (ts.empty() || t < ts.front() || t > ts.back()) {
            return 0.0;
        }
        const auto it = std::upper_bound(ts.begin(), ts.end(), t);
        if (it == ts.end()) {
            return spec.sample_p.back();
        }
        const std::size_t hi = static_cast<std::size_t>(it - ts.begin());
        const std::size_t lo = hi - 1;
        const double w = (t - ts[lo]) / (ts[hi] - ts[lo]);
        return (1.0 - w) * spec.sample_p[lo] + w * spec.sample_p[hi];
    }
    default:
        return 0.0;
    }
}

void load_fault_file(FaultSpec& spec) {
    std::ifstream in(spec.path);
    if (!in) {
        throw Error("fault file: cannot open '" + spec.path + "'");
    }
    spec.sample_t.clear();
    spec.sample_p.clear();
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ls(line);
        std::vector<std::string> fields;
        for (std::string f; ls >> f;) {
            fields.push_back(f);
        }
        if (fields.empty()) {
            continue;
        }
        const auto where = spec.path + ":" + std::to_string(lineno);
        if (fields.size() != 2) {
            throw Error("fault file: expected 2 columns at " + where);
        }
        double t = 0.0;
        double p = 0.0;
        try {
            std::size_t used_t = 0;
            std::size_t used_p = 0;
            t = std::stod(fields[0], &used_t);
            p = std::stod(fields[1], &used_p);
            if (used_t != fields[0].size() || used_p != fields[1].size()) {
                throw std::invalid_argument("trailing characters");
            }
        } catch (const std::exception&) {
            if (spec.sample_t.empty() && lineno == 1) {
                continue;  // header
            }
            throw Error("fault file: non-numeric value at " + where);
        }
        if (!std::isfinite(t) || !std::isfinite(p)) {
            throw Error("fault file: non-finite value at " + where);
        }
        if (!spec.sample_t.empty() && !(t > spec.sample_t.back())) {
            throw Error("fault file: time must be strictly increasing at " + where);
        }
        spec.sample_t.push_back(t);
        spec.sample_p.push_back(p);
    }
    if (spec.sample_t.empty()) {
        throw Error("fault file: no samples in '" + spec.path + "'");
    }
}

FaultSpec paper_fig2_fault() {
    FaultSpec f;
    f.kind = FaultKind::AsymmetricChirp;
    f.t_on = 0.0;
    f.t_off = 60.0;
    f.amplitude = 0.3;
    f.f_start = 0.05;
    f.f_end = 0.5;
    f.duty_asymmetry = 0.4;
    f.dc_drift = -0.001;
    return f;
}

}  // namespace gridmpc
