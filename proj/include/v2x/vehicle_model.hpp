#pragma once

// Unicycle kinematics of the ego vehicle, the longitudinal safety constraints
// against the three surrounding vehicles, and the quadratic tracking cost.

#include "v2x/comm_model.hpp"

#include <Eigen/Core>

#include <optional>
#include <vector>

namespace v2x {

/// Wraps an angle into [0, 2 pi).
double normalize_angle(double theta);

/// Wraps an angle into (-pi, pi].
double wrap_to_pi(double theta);

struct VehicleState {
    double x = 0.0;      // longitudinal [m]
    double y = 0.0;      // lateral [m]
    double theta = 0.0;  // yaw [rad], kept in [0, 2 pi)
};

struct ControlInput {
    double v = 0.0;      // [m/s]
    double omega = 0.0;  // [rad/s]
};

struct ControlBounds {
    double v_min = 0.0;
    double v_max = 12.0;
    double omega_min = -1.0;
    double omega_max = 1.0;

    bool contains(const ControlInput& u) const {
        return u.v >= v_min && u.v <= v_max && u.omega >= omega_min && u.omega <= omega_max;
    }
};

enum class Lane { Ego, Target };

/// Longitudinal positions of the surrounding vehicles at one slot.
struct NeighborPositions {
    double lv = 0.0;
    double tv = 0.0;
    double fv = 0.0;

    double& operator[](Vehicle v);
    double operator[](Vehicle v) const;
};

struct PlanningProblem {
    int horizon = 6;
    double dt = 1.0;
    Eigen::Matrix2d w_track = Eigen::Matrix2d::Identity();    // W_e
    Eigen::Matrix2d w_control = Eigen::Matrix2d::Identity();  // W_u
    std::vector<Eigen::Vector2d> targets;                     // slots 1..K
    ControlBounds bounds;
    double safety_distance = 8.7;                             // D
    std::vector<double> rho;                                  // penalty per slot
    std::vector<Lane> lanes;                                  // scheduled lane per slot
    std::vector<NeighborPositions> neighbors;                 // delivered positions per slot
    VehicleState initial_state;
    ControlInput prev_control;

    /// Throws std::invalid_argument when sizes or weights are inconsistent.
    void validate() const;
};

/// states[0] is the initial state; states[k] and controls[k-1] belong to slot k.
struct Trajectory {
    std::vector<VehicleState> states;
    std::vector<ControlInput> controls;
    double m_d = 0.0;

    int horizon() const { return static_cast<int>(controls.size()); }
};

VehicleState step_dynamics(const VehicleState& state, const ControlInput& control, double dt);

/// Applies the controls through the nonlinear model starting at `initial`.
Trajectory rollout(const VehicleState& initial, const std::vector<ControlInput>& controls, double dt,
                   double m_d = 0.0);

/// First-order expansion of one slot of the kinematics around (v_ref, theta_ref):
///   x_k - x_{k-1} = dt (cx_v v_k + cx_theta theta_k + cx_0)
///   y_k - y_{k-1} = dt (cy_v v_k + cy_theta theta_k + cy_0)
///   theta_k - theta_{k-1} = dt omega_k
/// theta_ref is unwrapped relative to the initial heading.
struct SlotLinearization {
    double v_ref = 0.0;
    double theta_ref = 0.0;
    double cx_v = 1.0, cx_theta = 0.0, cx_0 = 0.0;
    double cy_v = 0.0, cy_theta = 0.0, cy_0 = 0.0;

    double dx(double v, double theta) const { return cx_v * v + cx_theta * theta + cx_0; }
    double dy(double v, double theta) const { return cy_v * v + cy_theta * theta + cy_0; }
};

std::vector<SlotLinearization> linearize_dynamics(const Trajectory& reference, double dt);

/// Headings of the trajectory's states unwrapped into a continuous sequence
/// starting at states[0].theta.
std::vector<double> unwrapped_headings(const Trajectory& traj);

/// Piecewise-straight path through the targets, used as the first
/// linearization point.
Trajectory straight_line_reference(const PlanningProblem& problem);

/// sum_k u_k' W_e u_k + c_k' W_u c_k. Throws std::invalid_argument on a size
/// mismatch.
double tracking_cost(const PlanningProblem& problem, const Trajectory& traj);

enum class Bound { Upper, Lower };

/// x_slot <= limit (Upper) or x_slot >= limit (Lower).
struct SafetyConstraint {
    int slot = 1;
    Vehicle vehicle = Vehicle::LV;
    Bound bound = Bound::Upper;
    double limit = 0.0;

    bool satisfied(double x, double tol = 0.0) const {
        return bound == Bound::Upper ? x <= limit + tol : x >= limit - tol;
    }
};

/// One LV constraint per ego-lane slot, TV and FV constraints per target-lane
/// slot, each with distance D + m_d.
std::vector<SafetyConstraint> safety_constraints(const PlanningProblem& problem, double m_d);

/// Target lane from the first slot whose lateral target reaches the boundary.
std::vector<Lane> lane_schedule_from_targets(const std::vector<Eigen::Vector2d>& targets,
                                             double lane_boundary);

struct CollisionResult {
    bool collision = false;
    std::optional<int> slot;
    std::optional<Vehicle> vehicle;
};

/// Checks slots 1..K of `ego` against the true neighbor positions (index k
/// for slot k; index 0 is ignored). The ego's lane comes from its lateral
/// position; LV occupies the ego lane and TV/FV the target lane.
CollisionResult detect_collision(const std::vector<VehicleState>& ego,
                                 const std::vector<NeighborPositions>& neighbors_truth,
                                 double lane_boundary, double collision_distance);

}  // namespace v2x
