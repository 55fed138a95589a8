#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gridmpc/linalg.hpp"

namespace gridmpc {

// Physical parameters of one control area, all in the area's per-unit base.
struct AreaParams {
    double f0 = 50.0;            // nominal frequency [Hz]
    double inertia_h = 6.0;      // H [s]
    double base_power = 1.0;     // S_B [p.u.]
    double load_damping = 66.67; // D_l [Hz per p.u.], reciprocal of self-regulation

    [[nodiscard]] double a_freq() const { return -f0 / (2.0 * inertia_h * base_power * load_damping); }
    [[nodiscard]] double b_freq() const { return f0 / (2.0 * inertia_h * base_power); }
    // Storage-function weight 2*H*S_B / f0^2.
    [[nodiscard]] double beta() const { return 2.0 * inertia_h * base_power / (f0 * f0); }
    void validate() const;
};

struct BatteryParams {
    double capacity = 50.0;       // C_bat [p.u. s]
    double self_discharge = 0.0;  // v [p.u.]
    double power_min = -0.15;
    double power_max = 0.15;
    double soc_min = -0.75;
    double soc_max = 0.75;
    double ramp_per_step = 1.0;   // max |u(k) - u(k-1)| [p.u.]

    void validate() const;
};

struct TieLineParams {
    double p_hat_t = 0.0;  // maximum transmittable power [p.u.]; 0 decouples the areas

    void validate() const;
};

enum class FrequencyUnits {
    Normalized,  // frequency states are df / f0
    Hertz,       // frequency states are df in Hz (the un-normalized textbook form)
};

struct ContinuousModel {
    Matrix a;
    Matrix b;
    std::vector<std::string> state_labels;
    std::vector<std::string> input_labels;
    std::vector<std::size_t> frequency_states;
    std::vector<std::size_t> soc_states;
    std::optional<std::size_t> angle_state;
    std::vector<std::size_t> control_inputs;      // battery power channels
    std::vector<std::size_t> disturbance_inputs;  // dP channels
    FrequencyUnits units = FrequencyUnits::Normalized;

    [[nodiscard]] std::size_t state_dim() const { return a.rows(); }
    [[nodiscard]] std::size_t input_dim() const { return b.cols(); }
};

struct DiscreteModel {
    Matrix a_d;
    Matrix b_d;
    double ts = 0.0;
    std::vector<std::string> state_labels;
    std::vector<std::string> input_labels;
    std::vector<std::size_t> frequency_states;
    std::vector<std::size_t> soc_states;
    std::optional<std::size_t> angle_state;
    std::vector<std::size_t> control_inputs;
    std::vector<std::size_t> disturbance_inputs;

    [[nodiscard]] std::size_t state_dim() const { return a_d.rows(); }
    // b_d restricted to the battery columns.
    [[nodiscard]] Matrix control_matrix() const;
};

// Plant state layouts.
namespace layout {
inline constexpr std::size_t kFreq1 = 0;
inline constexpr std::size_t kSoc1 = 1;
inline constexpr std::size_t kFreq2 = 2;
inline constexpr std::size_t kSoc2 = 3;
inline constexpr std::size_t kAngle = 4;
inline constexpr std::size_t kOneAreaDim = 2;
inline constexpr std::size_t kTwoAreaDim = 5;

inline std::size_t freq_index(std::size_t area) { return 2 * area; }
inline std::size_t soc_index(std::size_t area) { return 2 * area + 1; }
}  // namespace layout

using PlantState = Vector;

ContinuousModel build_one_area(const AreaParams& area, const BatteryParams& battery,
                               FrequencyUnits units = FrequencyUnits::Normalized);

ContinuousModel build_two_area_coupled(const AreaParams& a1, const AreaParams& a2, const BatteryParams& b1,
                                       const BatteryParams& b2, const TieLineParams& tie,
                                       FrequencyUnits units = FrequencyUnits::Normalized);

// Exact zero-order hold via the exponential of [[a, b], [0, 0]] * ts.
DiscreteModel discretize(const ContinuousModel& model, double ts);

struct PlantParams {
    std::vector<AreaParams> areas;
    std::vector<BatteryParams> batteries;
    TieLineParams tie;

    [[nodiscard]] std::size_t area_count() const { return areas.size(); }
    [[nodiscard]] std::size_t state_dim() const {
        return areas.size() == 1 ? layout::kOneAreaDim : layout::kTwoAreaDim;
    }
    void validate() const;
};

// Inputs held by one area over an integration step.
struct AreaInput {
    double power_dev = 0.0;  // non-battery power deviation (fault + conventional units) [p.u.]
    double battery = 0.0;    // battery injection u [p.u.]
};

double tie_line_power(double delta_phi, const TieLineParams& tie);

// Nonlinear plant right-hand side: sine-coupled swing equations in
// normalized frequency, constant-loss SoC dynamics, unwrapped angle.
PlantState plant_derivative(std::span<const double> state, std::span<const AreaInput> inputs,
                            const PlantParams& params);

double wrap_angle(double phi);

}  // namespace gridmpc
