#pragma once

#include <limits>
#include <string>
#include <vector>

namespace gridmpc {

enum class FaultKind { None, AsymmetricChirp, Step, Ramp, Composite, FromFile };

std::string to_string(FaultKind k);

// External power deviation injected into one area [p.u.]. Every kind is
// zero outside its active window [t_on, t_off].
struct FaultSpec {
    FaultKind kind = FaultKind::None;
    double t_on = 0.0;
    double t_off = std::numeric_limits<double>::infinity();

    // AsymmetricChirp
    double amplitude = 0.0;
    double f_start = 0.05;  // [Hz]
    double f_end = 0.5;     // [Hz], reached at t_off
    double duty_asymmetry = 0.5;  // fraction of each period in the positive half-wave
    double dc_drift = 0.0;        // [p.u./s], added as dc_drift * (t - t_on)

    // Step: constant magnitude. Ramp: rises linearly from 0 at t_on to
    // magnitude at t_off.
    double magnitude = 0.0;

    // Composite
    std::vector<FaultSpec> components;

    // FromFile: samples loaded eagerly, linearly interpolated, zero outside.
    std::string path;
    std::vector<double> sample_t;
    std::vector<double> sample_p;

    void validate() const;
};

double generate_fault(const FaultSpec& spec, double t);

// Two columns (time, power), whitespace or comma separated, optional header
// line. Throws on missing file, ragged rows or non-increasing time.
void load_fault_file(FaultSpec& spec);

FaultSpec paper_fig2_fault();

}  // namespace gridmpc
