#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gridmpc/conventional.hpp"
#include "gridmpc/fault.hpp"
#include "gridmpc/grid_model.hpp"
#include "gridmpc/mpc.hpp"

namespace gridmpc {

class NonFiniteStateError : public Error {
  public:
    using Error::Error;
};

enum class ControllerKind { None, Conventional, MpcStandard, MpcPassivity, MpcClf };

std::string to_string(ControllerKind k);
std::optional<ControllerKind> parse_controller_kind(const std::string& s);
bool is_mpc(ControllerKind k);
MpcKind mpc_kind(ControllerKind k);

// MPC settings shared by every MPC controller of a scenario. Local weights
// apply to the one-area model (single area or uncoordinated), joint weights
// to the coordinated two-area model.
struct MpcSetup {
    std::size_t horizon = 3;
    Matrix q_local = Matrix{{10.0, 0.0}, {0.0, 0.001}};
    Matrix r_local = Matrix{{1.0}};
    Matrix q_joint = Matrix::diagonal(std::vector<double>{10.0, 0.001, 10.0, 0.001, 0.1});
    Matrix r_joint = Matrix::identity(2);
    // Terminal weights; computed from the Lyapunov equation when absent.
    std::optional<Matrix> q_term_local;
    std::optional<Matrix> q_term_joint;
    double slack_weight = 1e6;
    double freq_bound_hz = 1.5;
    double fallback_gain = 1.0;
};

struct Scenario {
    PlantParams plant;
    std::vector<ControllerKind> controllers;         // one per area
    std::vector<ConventionalParams> conventional;    // one per area
    bool coordinated = false;                        // two-area MPC: one joint controller
    MpcSetup mpc;
    std::vector<FaultSpec> faults;                   // one per area
    double duration = 100.0;
    double ts = 0.1;
    double dt = 0.01;
    std::uint64_t seed = 0;
    std::optional<PlantState> initial_state;

    [[nodiscard]] std::size_t area_count() const { return plant.area_count(); }
    [[nodiscard]] std::size_t substeps() const;
    [[nodiscard]] std::size_t steps() const;
    void validate() const;
};

struct SimTrace {
    std::size_t areas = 1;
    double ts = 0.1;
    // Sample k holds the state measured at time[k] and the inputs held over
    // [time[k], time[k] + ts).
    Vector time;
    std::vector<Vector> freq_hz;         // [area][k]
    std::vector<Vector> soc;             // [area][k]
    std::vector<Vector> u_battery;       // [area][k]
    std::vector<Vector> u_conventional;  // [area][k]
    std::vector<Vector> fault;           // [area][k], value at time[k]
    Vector delta_phi;                    // unwrapped [rad]; empty for one area
    Vector tie_power;                    // [p.u.], exported by area 1
    PlantState final_state;
    double final_time = 0.0;

    std::vector<std::vector<std::size_t>> controller_areas;  // areas served by each MPC controller
    std::vector<std::vector<MpcDiagnostics>> diagnostics;    // [controller][k]

    std::optional<std::string> failure;  // set when the run halted early

    [[nodiscard]] std::size_t size() const { return time.size(); }
};

// Classical RK4 with inputs held over all substeps.
PlantState integrate_plant(std::span<const double> state, std::span<const AreaInput> inputs,
                           const PlantParams& params, double dt, std::size_t substeps);

// Controllers for a scenario in the order SimTrace::controller_areas lists.
std::vector<MpcController> make_mpc_controllers(const Scenario& scenario);
std::vector<std::vector<std::size_t>> mpc_controller_areas(const Scenario& scenario);

MpcConfig local_mpc_config(const Scenario& scenario, std::size_t area, const DiscreteModel& model);
MpcConfig joint_mpc_config(const Scenario& scenario, const DiscreteModel& model);

// Runs the closed loop. Numerical runaway stops the run and is reported via
// SimTrace::failure with the samples recorded so far.
SimTrace run_closed_loop(const Scenario& scenario);

}  // namespace gridmpc
