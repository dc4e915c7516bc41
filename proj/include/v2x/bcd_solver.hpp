#pragma once

// Joint trajectory / margin / transmit-power planner.
//
// The joint problem alternates two blocks until the objective settles:
//   * trajectory block: the ego's states, controls and the extra margin m_d,
//     solved by a log-barrier interior-point method over the dynamics
//     linearized at the previous iterate;
//   * power block: one projected-gradient solve per surrounding vehicle, each
//     over its own budget set {P >= 0, sum P <= P_max}.

#include "v2x/comm_model.hpp"
#include "v2x/vehicle_model.hpp"

#include <array>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace v2x {

struct SolverConfig {
    int bcd_max_iter = 20;
    double bcd_tol = 1e-4;  // relative objective change
    // the next linearization point moves this fraction of the way to the new trajectory iterate
    double relinearization_step = 0.7;

    double barrier_t0 = 1.0;
    double barrier_mu = 10.0;
    double barrier_eps = 1e-6;  // stop when (#inequalities)/t < eps
    double newton_tol = 1e-9;   // half squared Newton decrement
    int newton_max_iter = 200;

    int pg_max_iter = 500;
    double pg_tol = 1e-9;  // fixed-point residual, relative to the budget
    double armijo_initial = 1.0;
    double armijo_sigma = 1e-4;
    double armijo_shrink = 0.5;
    int armijo_max_backtracks = 50;

    double md_floor = 1e-6;       // [m]
    double md_report_floor = 1e-3;  // reported margins below this are 0
    double bisection_tol = 1e-12;

    bool parallel_power_block = true;

    void validate() const;
};

/// Transmit powers of LV, TV and FV per slot.
struct PowerSchedule {
    std::array<std::vector<double>, 3> powers;
    double budget = 1.0;  // P_max per vehicle [W]

    static PowerSchedule uniform(int horizon, double budget);

    std::vector<double>& of(Vehicle v) { return powers[static_cast<std::size_t>(v)]; }
    const std::vector<double>& of(Vehicle v) const { return powers[static_cast<std::size_t>(v)]; }

    double total(Vehicle v) const;

    /// Non-negativity and sum <= budget + tol for every vehicle.
    bool feasible(double tol) const;
};

using LinkCsi = std::array<std::vector<CsiEstimate>, 3>;

struct JointProblem {
    PlanningProblem planning;
    ChannelParams channel;
    LinkCsi csi;              // per vehicle, per slot
    double power_budget = 1.0;

    void validate() const;
};

class InfeasibleProblem : public std::runtime_error {
public:
    InfeasibleProblem(int constraint_index, std::string constraint, double violation);

    int constraint_index() const { return index_; }
    const std::string& constraint() const { return constraint_; }
    double violation() const { return violation_; }

private:
    int index_;
    std::string constraint_;
    double violation_;
};

/// sum_k rho_k sum_i p_out(P_ik): the weight of the margin regularizer.
double outage_weight(const JointProblem& problem, const PowerSchedule& powers);

/// Joint objective: tracking cost plus outage_weight / (1 - exp(-m_d)).
double joint_objective(const JointProblem& problem, const Trajectory& traj, const PowerSchedule& powers);

struct TrajectoryBlockResult {
    Trajectory trajectory;
    double tracking = 0.0;
    double regularizer = 0.0;
    double objective = 0.0;
    double duality_gap = 0.0;
    double kkt_residual = 0.0;  // centering residual (half squared Newton decrement) at the last stage
    int newton_steps = 0;
};

/// Trajectory block for a given regularizer weight eta. With eta == 0 or a
/// fixed margin the margin is not a decision variable (it is pinned to
/// md_floor or to the given value respectively).
TrajectoryBlockResult solve_trajectory_block(const PlanningProblem& problem, double eta,
                                             const Trajectory& linearization, const SolverConfig& config,
                                             std::optional<double> fixed_margin = std::nullopt);

/// Trajectory block with eta taken from the current powers.
TrajectoryBlockResult solve_d1(const JointProblem& problem, const PowerSchedule& powers,
                               const Trajectory& linearization, const SolverConfig& config,
                               std::optional<double> fixed_margin = std::nullopt);

/// Euclidean projection onto {P >= 0, sum P <= budget}.
std::vector<double> project_budget(std::span<const double> raw, double budget, double bisection_tol = 1e-12);

/// sum_k rho_k p_out(P_k) / (1 - exp(-m_d)) for one vehicle.
double power_objective(const ChannelParams& channel, std::span<const CsiEstimate> csi, std::span<const double> rho,
                       std::span<const double> powers, double m_d);

struct PowerBlockResult {
    std::vector<double> powers;
    std::vector<double> objective_trace;  // one entry per accepted iterate, starting at the initial point
    double stationarity = 0.0;
    int iterations = 0;
};

/// Projected gradient with Armijo backtracking along the projection arc for
/// one vehicle's powers.
PowerBlockResult solve_q1_single(const ChannelParams& channel, std::span<const CsiEstimate> csi,
                                 std::span<const double> rho, double m_d, double budget,
                                 std::span<const double> initial, const SolverConfig& config);

struct BcdIteration {
    int iteration = 0;
    double objective = 0.0;
    double tracking = 0.0;
    double regularizer = 0.0;
    double m_d = 0.0;
    double d1_seconds = 0.0;
    double q1_seconds = 0.0;
};

struct BcdTrace {
    std::vector<BcdIteration> iterations;
    bool converged = false;
};

struct BcdOptions {
    bool optimize_power = true;
    std::optional<double> fixed_margin;
    std::optional<PowerSchedule> initial_powers;
    std::optional<Trajectory> initial_linearization;  // default: straight line to the targets
};

struct BcdResult {
    Trajectory trajectory;
    PowerSchedule powers;
    BcdTrace trace;
};

/// Block coordinate descent from the straight-line reference (or the given
/// linearization point) and uniform powers. Propagates InfeasibleProblem from the trajectory block.
BcdResult run_bcd(const JointProblem& problem, const SolverConfig& config, const BcdOptions& options = {});

}  // namespace v2x
