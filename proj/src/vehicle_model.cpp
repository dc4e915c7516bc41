#include "v2x/vehicle_model.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace v2x {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

bool positive_definite(const Eigen::Matrix2d& w) {
    if (!w.isApprox(w.transpose(), 1e-12)) return false;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(w);
    return eig.eigenvalues().minCoeff() > 0.0;
}

}  // namespace

double normalize_angle(double theta) {
    double r = std::fmod(theta, kTwoPi);
    if (r < 0.0) r += kTwoPi;
    if (r >= kTwoPi) r = 0.0;
    return r;
}

double wrap_to_pi(double theta) {
    double r = normalize_angle(theta);
    if (r > std::numbers::pi) r -= kTwoPi;
    return r;
}

double& NeighborPositions::operator[](Vehicle v) {
    switch (v) {
        case Vehicle::LV: return lv;
        case Vehicle::TV: return tv;
        case Vehicle::FV: return fv;
    }
    throw std::invalid_argument("unknown vehicle");
}

double NeighborPositions::operator[](Vehicle v) const {
    return const_cast<NeighborPositions&>(*this)[v];
}

void PlanningProblem::validate() const {
    if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
    if (!(dt > 0.0)) throw std::invalid_argument("dt must be > 0");
    if (!positive_definite(w_track)) throw std::invalid_argument("W_e must be symmetric positive definite");
    if (!positive_definite(w_control)) throw std::invalid_argument("W_u must be symmetric positive definite");
    const auto k = static_cast<std::size_t>(horizon);
    if (targets.size() != k || rho.size() != k || lanes.size() != k || neighbors.size() != k) {
        throw std::invalid_argument("targets, rho, lanes and neighbors must have one entry per slot");
    }
    for (double r : rho) {
        if (!(r >= 0.0)) throw std::invalid_argument("rho must be non-negative");
    }
    if (!(safety_distance > 0.0)) throw std::invalid_argument("safety distance D must be > 0");
    if (!(bounds.v_min <= bounds.v_max) || !(bounds.omega_min <= bounds.omega_max)) {
        throw std::invalid_argument("control bounds are inverted");
    }
}

VehicleState step_dynamics(const VehicleState& state, const ControlInput& control, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("step_dynamics: dt must be > 0");
    const double theta = state.theta + control.omega * dt;
    return {state.x + control.v * std::cos(theta) * dt, state.y + control.v * std::sin(theta) * dt,
            normalize_angle(theta)};
}

Trajectory rollout(const VehicleState& initial, const std::vector<ControlInput>& controls, double dt,
                   double m_d) {
    Trajectory traj;
    traj.m_d = m_d;
    traj.controls = controls;
    traj.states.reserve(controls.size() + 1);
    traj.states.push_back({initial.x, initial.y, normalize_angle(initial.theta)});
    for (const auto& u : controls) traj.states.push_back(step_dynamics(traj.states.back(), u, dt));
    return traj;
}

std::vector<double> unwrapped_headings(const Trajectory& traj) {
    std::vector<double> out;
    out.reserve(traj.states.size());
    for (std::size_t k = 0; k < traj.states.size(); ++k) {
        if (k == 0) {
            out.push_back(traj.states[0].theta);
        } else {
            out.push_back(out.back() + wrap_to_pi(traj.states[k].theta - traj.states[k - 1].theta));
        }
    }
    return out;
}

std::vector<SlotLinearization> linearize_dynamics(const Trajectory& reference, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("linearize_dynamics: dt must be > 0");
    if (reference.states.size() != reference.controls.size() + 1) {
        throw std::invalid_argument("linearize_dynamics: reference needs K+1 states and K controls");
    }
    const auto headings = unwrapped_headings(reference);
    std::vector<SlotLinearization> out(reference.controls.size());
    for (std::size_t k = 0; k < out.size(); ++k) {
        auto& lin = out[k];
        lin.v_ref = reference.controls[k].v;
        lin.theta_ref = headings[k + 1];
        const double c = std::cos(lin.theta_ref);
        const double s = std::sin(lin.theta_ref);
        // v cos(theta) ~ v c - v_ref s (theta - theta_ref)
        lin.cx_v = c;
        lin.cx_theta = -lin.v_ref * s;
        lin.cx_0 = lin.v_ref * s * lin.theta_ref;
        // v sin(theta) ~ v s + v_ref c (theta - theta_ref)
        lin.cy_v = s;
        lin.cy_theta = lin.v_ref * c;
        lin.cy_0 = -lin.v_ref * c * lin.theta_ref;
    }
    return out;
}

Trajectory straight_line_reference(const PlanningProblem& problem) {
    problem.validate();
    Trajectory ref;
    ref.m_d = 1.0;
    ref.states.push_back(problem.initial_state);
    double heading = problem.initial_state.theta;
    for (int k = 0; k < problem.horizon; ++k) {
        const auto& prev = ref.states.back();
        const Eigen::Vector2d& target = problem.targets[static_cast<std::size_t>(k)];
        const double dx = target.x() - prev.x;
        const double dy = target.y() - prev.y;
        const double dist = std::hypot(dx, dy);
        const double next_heading = dist > 1e-9 ? heading + wrap_to_pi(std::atan2(dy, dx) - heading) : heading;
        ControlInput u{dist / problem.dt, (next_heading - heading) / problem.dt};
        ref.controls.push_back(u);
        ref.states.push_back({target.x(), target.y(), normalize_angle(next_heading)});
        heading = next_heading;
    }
    return ref;
}

double tracking_cost(const PlanningProblem& problem, const Trajectory& traj) {
    const auto k_slots = static_cast<std::size_t>(problem.horizon);
    if (traj.controls.size() != k_slots || traj.states.size() != k_slots + 1 || problem.targets.size() != k_slots) {
        throw std::invalid_argument("tracking_cost: trajectory does not match the problem horizon");
    }
    double cost = 0.0;
    ControlInput prev = problem.prev_control;
    for (std::size_t k = 0; k < k_slots; ++k) {
        const auto& s = traj.states[k + 1];
        const auto& u = traj.controls[k];
        const Eigen::Vector2d pos_err(s.x - problem.targets[k].x(), s.y - problem.targets[k].y());
        const Eigen::Vector2d ctrl_change(u.v - prev.v, u.omega - prev.omega);
        cost += pos_err.dot(problem.w_track * pos_err) + ctrl_change.dot(problem.w_control * ctrl_change);
        prev = u;
    }
    return cost;
}

std::vector<SafetyConstraint> safety_constraints(const PlanningProblem& problem, double m_d) {
    if (problem.lanes.size() != problem.neighbors.size()) {
        throw std::invalid_argument("safety_constraints: lane schedule and neighbor positions differ in length");
    }
    const double gap = problem.safety_distance + m_d;
    std::vector<SafetyConstraint> out;
    for (std::size_t k = 0; k < problem.lanes.size(); ++k) {
        const int slot = static_cast<int>(k) + 1;
        const auto& n = problem.neighbors[k];
        if (problem.lanes[k] == Lane::Ego) {
            out.push_back({slot, Vehicle::LV, Bound::Upper, n.lv - gap});
        } else {
            out.push_back({slot, Vehicle::TV, Bound::Upper, n.tv - gap});
            out.push_back({slot, Vehicle::FV, Bound::Lower, n.fv + gap});
        }
    }
    return out;
}

std::vector<Lane> lane_schedule_from_targets(const std::vector<Eigen::Vector2d>& targets, double lane_boundary) {
    std::vector<Lane> lanes;
    lanes.reserve(targets.size());
    bool crossed = false;
    for (const auto& t : targets) {
        crossed = crossed || t.y() >= lane_boundary;
        lanes.push_back(crossed ? Lane::Target : Lane::Ego);
    }
    return lanes;
}

CollisionResult detect_collision(const std::vector<VehicleState>& ego,
                                 const std::vector<NeighborPositions>& neighbors_truth,
                                 double lane_boundary, double collision_distance) {
    if (ego.size() != neighbors_truth.size()) {
        throw std::invalid_argument("detect_collision: ego and neighbor sequences are not aligned");
    }
    for (std::size_t k = 1; k < ego.size(); ++k) {
        const auto& s = ego[k];
        const auto& n = neighbors_truth[k];
        const bool in_target_lane = s.y >= lane_boundary;
        auto hit = [&](Vehicle v) -> CollisionResult {
            return {true, static_cast<int>(k), v};
        };
        if (!in_target_lane) {
            if (std::fabs(n.lv - s.x) < collision_distance) return hit(Vehicle::LV);
        } else {
            if (std::fabs(n.tv - s.x) < collision_distance) return hit(Vehicle::TV);
            if (std::fabs(s.x - n.fv) < collision_distance) return hit(Vehicle::FV);
        }
    }
    return {};
}

}  // namespace v2x
