#pragma once

// Four-vehicle lane-change experiment: the ego vehicle (EV) moves from the
// ego lane into the target lane between a fast target vehicle (TV) and a
// following vehicle (FV), behind a slow leading vehicle (LV). Positions of the
// surrounding vehicles reach the planner through the uplink and carry a
// position error whose support grows with the outage probability.

#include "v2x/bcd_solver.hpp"
#include "v2x/comm_model.hpp"
#include "v2x/vehicle_model.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace v2x {

enum class Policy { Proposed, BaselineNoUncertainty, BaselineConstantPower };
enum class PlanningMode { OneShot, RecedingHorizon };
// Sampled: uniform on the support. Lag: every report lags by the full delay, so
// each vehicle appears one bound behind its true position.
enum class ErrorMode { Sampled, Lag };

std::string_view to_string(Policy p);
std::string_view to_string(PlanningMode m);
std::string_view to_string(ErrorMode m);
std::optional<Policy> parse_policy(std::string_view s);
std::optional<PlanningMode> parse_mode(std::string_view s);
std::optional<ErrorMode> parse_error_mode(std::string_view s);

double kmh_to_ms(double kmh);

struct ScenarioConfig {
    double lane_width = 3.72;  // ego lane is y in [0, lane_width)
    Eigen::Vector2d ego_start{20.0, 1.85};
    Eigen::Vector2d lv_start{30.0, 1.85};
    Eigen::Vector2d tv_start{40.0, 5.55};
    Eigen::Vector2d fv_start{13.0, 5.55};
    double ego_speed_kmh = 7.2;
    double lv_speed_kmh = 5.0;
    double tv_speed_kmh = 25.0;
    double fv_speed_kmh = 7.9;
    double accel = 1.0;  // surrounding vehicles [m/s^2]
    // the planner extrapolates neighbors with their acceleration (true) or at constant speed (false)
    bool predict_acceleration = true;

    int horizon = 6;
    double dt = 1.0;
    ChannelParams channel;
    double budget = 1.0;  // P_max per vehicle [W]
    // When set, mu^2 is chosen so that the mean outage at the uniform power
    // split equals this value.
    std::optional<double> target_outage = 0.3;

    double safety_distance = 8.7;     // D
    double collision_distance = 8.7;  // gap below which a slot counts as a collision
    std::vector<double> rho{1.0, 10.0, 10.0, 10.0, 10.0, 10.0};
    ControlBounds bounds;
    Eigen::Matrix2d w_track = Eigen::Matrix2d::Identity();
    Eigen::Matrix2d w_control = Eigen::Matrix2d::Identity();
    int turn_start_slot = 2;  // last slot whose target is the ego lane center
    int turn_end_slot = 3;    // first slot whose target is the target lane center

    int trials = 100;
    Policy policy = Policy::Proposed;
    PlanningMode mode = PlanningMode::RecedingHorizon;
    ErrorMode error_mode = ErrorMode::Sampled;
    std::uint64_t seed = 1;

    void validate() const;
};

/// Ground truth of the surrounding vehicles at time t = slot * dt.
struct NeighborKinematics {
    NeighborPositions start;
    NeighborPositions speed;  // [m/s]
    double accel = 0.0;

    NeighborPositions position_at(double t) const;
    NeighborPositions speed_at(double t) const;
};

struct Scenario {
    ScenarioConfig config;
    ChannelParams channel;  // after mu^2 calibration
    VehicleState ego_start;
    double ego_speed = 0.0;  // [m/s]
    NeighborKinematics neighbors;
    double lane_boundary = 0.0;
    double ego_lane_center = 0.0;
    double target_lane_center = 0.0;

    /// Reference waypoint for absolute slot k >= 1.
    Eigen::Vector2d target(int slot) const;
    /// Penalty for absolute slot k >= 1; slots past the configured list reuse its last entry.
    double rho(int slot) const;
};

Scenario build_scenario(const ScenarioConfig& config);

struct PlanRecord {
    int decision_slot = 0;  // slot at which the plan was made
    std::vector<NeighborPositions> predicted;    // error-free prediction per horizon slot
    std::vector<NeighborPositions> error_bound;  // support half-width per horizon slot
    std::vector<std::array<double, 3>> outage;   // per horizon slot
    PlanningProblem problem;                     // neighbors = prediction + position error
    Trajectory trajectory;
    PowerSchedule powers;
};

struct TrialResult {
    std::uint64_t seed = 0;
    std::vector<VehicleState> ego;                  // slots 0..K
    std::vector<ControlInput> controls;             // applied in slots 1..K
    std::vector<NeighborPositions> truth;           // slots 0..K
    // per executed slot 1..K, taken from the plan in force
    std::vector<NeighborPositions> delivered;       // neighbor positions the plan used for this slot
    std::vector<std::array<double, 3>> power;
    std::vector<std::array<double, 3>> outage;
    std::vector<double> margin;                     // m_d of the plan in force (0 after a fallback)
    std::vector<PlanRecord> plans;
    std::vector<BcdIteration> objective_trace;      // first plan of the trial
    int infeasible_slots = 0;
    bool collision = false;
    std::optional<int> collision_slot;
    std::optional<Vehicle> collision_vehicle;
};

/// Error-free prediction of the neighbors over the horizon of a decision at
/// `decision_slot`, from their current positions, speeds and (optionally)
/// acceleration.
std::vector<NeighborPositions> predict_neighbors(const Scenario& scenario, int decision_slot);

/// Planning problem for a decision at absolute slot `decision_slot` with the
/// given neighbor positions per horizon slot.
PlanningProblem planning_problem_at(const Scenario& scenario, int decision_slot, const VehicleState& ego,
                                    const ControlInput& prev_control, std::vector<NeighborPositions> neighbors);

/// Per-link CSI for the slots covered by a decision at `decision_slot`.
LinkCsi csi_at(const Scenario& scenario, std::uint64_t trial_seed, int decision_slot);

struct PolicySetup {
    PlanningProblem problem;
    BcdOptions options;
};

/// Applies the policy's modifications to a planning problem.
PolicySetup baseline_policy(Policy policy, PlanningProblem problem, int horizon, double budget);

struct Decision {
    PlanRecord record;  // prediction, bounds and outage filled; plan not yet solved
    std::vector<NeighborPositions> delivered;
    PowerSchedule proposal;  // powers used for the outage of the delivered positions
    PolicySetup setup;
    JointProblem joint;
};

/// Everything the planner sees at absolute slot `decision_slot` of a trial.
/// `last_plan`, when given, is shifted one slot and used as the linearization point.
Decision prepare_decision(const Scenario& scenario, const SolverConfig& solver, std::uint64_t trial_seed,
                          int decision_slot, const VehicleState& ego, const ControlInput& prev_control,
                          const std::optional<Trajectory>& last_plan = std::nullopt);

TrialResult run_trial(const ScenarioConfig& config, const SolverConfig& solver, std::uint64_t trial_seed);

struct CollisionStats {
    int trials = 0;
    int collisions = 0;
    double ratio = 0.0;
    double confidence_halfwidth = 0.0;  // 95 %, normal approximation
};

CollisionStats collision_stats(int trials, int collisions);

struct MonteCarloResult {
    CollisionStats stats;
    double mean_outage = 0.0;    // over all delivered updates
    double mean_margin = 0.0;    // over all plans
    std::vector<TrialResult> trials;
};

/// Seed of trial i of a run.
std::uint64_t trial_seed(std::uint64_t run_seed, int trial);

/// Runs config.trials trials on at most `jobs` threads (0 = hardware concurrency).
MonteCarloResult run_monte_carlo(const ScenarioConfig& config, const SolverConfig& solver, int jobs = 0);

}  // namespace v2x
