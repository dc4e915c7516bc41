#include "v2x/bcd_solver.hpp"

#include "barrier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace v2x {

namespace {

// z = [x_1 y_1 theta_1 v_1 omega_1 ... x_K ... omega_K (m_d)]
struct Layout {
    int horizon = 0;
    bool free_margin = false;

    int size() const { return 5 * horizon + (free_margin ? 1 : 0); }
    static int x(int k) { return 5 * k; }
    static int y(int k) { return 5 * k + 1; }
    static int theta(int k) { return 5 * k + 2; }
    static int v(int k) { return 5 * k + 3; }
    static int omega(int k) { return 5 * k + 4; }
    int margin() const { return 5 * horizon; }
};

struct Inequalities {
    Eigen::MatrixXd g;
    Eigen::VectorXd h;
    std::vector<std::string> names;
};

// Affine equalities of the linearized kinematics.
void build_dynamics(const PlanningProblem& problem, const std::vector<SlotLinearization>& lin, const Layout& layout,
                    Eigen::MatrixXd& a, Eigen::VectorXd& b) {
    const int k_slots = problem.horizon;
    const double dt = problem.dt;
    a = Eigen::MatrixXd::Zero(3 * k_slots, layout.size());
    b = Eigen::VectorXd::Zero(3 * k_slots);
    const auto& s0 = problem.initial_state;
    for (int k = 0; k < k_slots; ++k) {
        const auto& l = lin[static_cast<std::size_t>(k)];
        const int rx = 3 * k, ry = 3 * k + 1, rt = 3 * k + 2;

        a(rx, Layout::x(k)) = 1.0;
        a(rx, Layout::v(k)) = -dt * l.cx_v;
        a(rx, Layout::theta(k)) = -dt * l.cx_theta;
        b(rx) = dt * l.cx_0;

        a(ry, Layout::y(k)) = 1.0;
        a(ry, Layout::v(k)) = -dt * l.cy_v;
        a(ry, Layout::theta(k)) = -dt * l.cy_theta;
        b(ry) = dt * l.cy_0;

        a(rt, Layout::theta(k)) = 1.0;
        a(rt, Layout::omega(k)) = -dt;

        if (k == 0) {
            b(rx) += s0.x;
            b(ry) += s0.y;
            b(rt) += s0.theta;
        } else {
            a(rx, Layout::x(k - 1)) = -1.0;
            a(ry, Layout::y(k - 1)) = -1.0;
            a(rt, Layout::theta(k - 1)) = -1.0;
        }
    }
}

Inequalities build_inequalities(const PlanningProblem& problem, const Layout& layout, double pinned_margin,
                                double md_floor) {
    std::vector<std::pair<std::vector<std::pair<int, double>>, double>> rows;
    std::vector<std::string> names;
    auto add = [&](std::vector<std::pair<int, double>> coeffs, double rhs, std::string name) {
        rows.emplace_back(std::move(coeffs), rhs);
        names.push_back(std::move(name));
    };

    const auto& bnd = problem.bounds;
    for (int k = 0; k < problem.horizon; ++k) {
        const std::string slot = std::to_string(k + 1);
        add({{Layout::v(k), 1.0}}, bnd.v_max, "v_max slot " + slot);
        add({{Layout::v(k), -1.0}}, -bnd.v_min, "v_min slot " + slot);
        add({{Layout::omega(k), 1.0}}, bnd.omega_max, "omega_max slot " + slot);
        add({{Layout::omega(k), -1.0}}, -bnd.omega_min, "omega_min slot " + slot);
    }

    for (const auto& c : safety_constraints(problem, 0.0)) {
        const int k = c.slot - 1;
        const double sign = c.bound == Bound::Upper ? 1.0 : -1.0;
        std::vector<std::pair<int, double>> coeffs{{Layout::x(k), sign}};
        double rhs = sign * c.limit;
        if (layout.free_margin) {
            coeffs.emplace_back(layout.margin(), 1.0);
        } else {
            rhs -= pinned_margin;
        }
        std::ostringstream name;
        name << "safety slot " << c.slot << ' ' << to_string(c.vehicle);
        add(std::move(coeffs), rhs, name.str());
    }

    if (layout.free_margin) add({{layout.margin(), -1.0}}, -md_floor, "margin floor");

    Inequalities ineq;
    ineq.g = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), layout.size());
    ineq.h.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (const auto& [col, val] : rows[r].first) ineq.g(static_cast<Eigen::Index>(r), col) = val;
        ineq.h(static_cast<Eigen::Index>(r)) = rows[r].second;
    }
    ineq.names = std::move(names);
    return ineq;
}

// 1/(1 - e^{-m}) and its first two derivatives
struct MarginTerm {
    double value, first, second;
};

MarginTerm margin_term(double m) {
    const double e = std::exp(-m);
    const double d = -std::expm1(-m);
    return {1.0 / d, -e / (d * d), e * (1.0 + e) / (d * d * d)};
}

detail::SmoothObjective make_objective(const PlanningProblem& problem, const Layout& layout, double eta) {
    const int n = layout.size();
    Eigen::MatrixXd hq = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd bq = Eigen::VectorXd::Zero(n);
    double cq = 0.0;

    // (S z - t)' W (S z - t) with S picking two coordinates (optionally a difference)
    auto add_term = [&](const Eigen::Matrix2d& w, const Eigen::Matrix<double, 2, Eigen::Dynamic>& s,
                        const Eigen::Vector2d& target) {
        hq += 2.0 * s.transpose() * w * s;
        bq += 2.0 * s.transpose() * w * target;
        cq += target.dot(w * target);
    };

    for (int k = 0; k < problem.horizon; ++k) {
        Eigen::Matrix<double, 2, Eigen::Dynamic> s = Eigen::MatrixXd::Zero(2, n);
        s(0, Layout::x(k)) = 1.0;
        s(1, Layout::y(k)) = 1.0;
        add_term(problem.w_track, s, problem.targets[static_cast<std::size_t>(k)]);

        Eigen::Matrix<double, 2, Eigen::Dynamic> c = Eigen::MatrixXd::Zero(2, n);
        c(0, Layout::v(k)) = 1.0;
        c(1, Layout::omega(k)) = 1.0;
        Eigen::Vector2d offset = Eigen::Vector2d::Zero();
        if (k == 0) {
            offset = {problem.prev_control.v, problem.prev_control.omega};
        } else {
            c(0, Layout::v(k - 1)) = -1.0;
            c(1, Layout::omega(k - 1)) = -1.0;
        }
        add_term(problem.w_control, c, offset);
    }

    const bool with_margin = layout.free_margin && eta > 0.0;
    const int mi = layout.margin();

    detail::SmoothObjective obj;
    obj.value = [=](const Eigen::VectorXd& z) {
        double f = 0.5 * z.dot(hq * z) - bq.dot(z) + cq;
        if (with_margin) {
            if (z(mi) <= 0.0) return std::numeric_limits<double>::infinity();
            f += eta * margin_term(z(mi)).value;
        }
        return f;
    };
    obj.derivatives = [=](const Eigen::VectorXd& z, Eigen::VectorXd& grad, Eigen::MatrixXd& hess) {
        grad = hq * z - bq;
        hess = hq;
        if (with_margin) {
            const auto t = margin_term(z(mi));
            grad(mi) += eta * t.first;
            hess(mi, mi) += eta * t.second;
        }
    };
    return obj;
}

// Rollout of the affine model, so the point satisfies the equalities.
Eigen::VectorXd affine_rollout(const PlanningProblem& problem, const std::vector<SlotLinearization>& lin,
                               const Trajectory& reference, const Layout& layout) {
    Eigen::VectorXd z = Eigen::VectorXd::Zero(layout.size());
    const auto& bnd = problem.bounds;
    double x = problem.initial_state.x, y = problem.initial_state.y, theta = problem.initial_state.theta;
    for (int k = 0; k < problem.horizon; ++k) {
        const auto& ref = reference.controls[static_cast<std::size_t>(k)];
        const double pv = 1e-3 * (bnd.v_max - bnd.v_min);
        const double pw = 1e-3 * (bnd.omega_max - bnd.omega_min);
        const double v = std::clamp(ref.v, bnd.v_min + pv, bnd.v_max - pv);
        const double omega = std::clamp(ref.omega, bnd.omega_min + pw, bnd.omega_max - pw);
        const auto& l = lin[static_cast<std::size_t>(k)];
        theta += omega * problem.dt;
        x += problem.dt * l.dx(v, theta);
        y += problem.dt * l.dy(v, theta);
        z(Layout::x(k)) = x;
        z(Layout::y(k)) = y;
        z(Layout::theta(k)) = theta;
        z(Layout::v(k)) = v;
        z(Layout::omega(k)) = omega;
    }
    if (layout.free_margin) z(layout.margin()) = 1.0;
    return z;
}

// Phase I: min s  s.t.  G z - s <= h,  s >= -1,  A z = b.
Eigen::VectorXd find_interior_point(const Eigen::MatrixXd& a, const Inequalities& ineq,
                                    Eigen::VectorXd z0, const SolverConfig& config) {
    const Eigen::VectorXd viol0 = ineq.g * z0 - ineq.h;
    if (viol0.maxCoeff() < 0.0) return z0;

    const auto n = z0.size();
    const auto m = ineq.g.rows();
    Eigen::MatrixXd a1 = Eigen::MatrixXd::Zero(a.rows(), n + 1);
    a1.leftCols(n) = a;
    Eigen::MatrixXd g1 = Eigen::MatrixXd::Zero(m + 1, n + 1);
    g1.topLeftCorner(m, n) = ineq.g;
    g1.block(0, n, m, 1).setConstant(-1.0);
    g1(m, n) = -1.0;
    Eigen::VectorXd h1(m + 1);
    h1.head(m) = ineq.h;
    h1(m) = 1.0;

    detail::SmoothObjective obj;
    obj.value = [n](const Eigen::VectorXd& w) { return w(n); };
    obj.derivatives = [n](const Eigen::VectorXd& w, Eigen::VectorXd& grad, Eigen::MatrixXd& hess) {
        grad = Eigen::VectorXd::Zero(w.size());
        grad(n) = 1.0;
        hess = Eigen::MatrixXd::Zero(w.size(), w.size());
    };

    Eigen::VectorXd w(n + 1);
    w.head(n) = z0;
    w(n) = std::max(viol0.maxCoeff() + 1.0, -0.5);

    detail::BarrierSolver phase1(a1, g1, h1, obj, config);
    // margin of 1e-3 on every slack is plenty to start the second phase
    const auto out = phase1.solve(w, 1e-8, [n](const Eigen::VectorXd& cur) { return cur(n) < -1e-3; });

    const Eigen::VectorXd z = out.z.head(n);
    const Eigen::VectorXd viol = ineq.g * z - ineq.h;
    Eigen::Index worst = 0;
    const double max_viol = viol.maxCoeff(&worst);
    if (!(max_viol < 0.0)) {
        throw InfeasibleProblem(static_cast<int>(worst), ineq.names[static_cast<std::size_t>(worst)], max_viol);
    }
    return z;
}

}  // namespace

InfeasibleProblem::InfeasibleProblem(int constraint_index, std::string constraint, double violation)
    : std::runtime_error("infeasible trajectory block: " + constraint + " violated by " + std::to_string(violation)),
      index_(constraint_index),
      constraint_(std::move(constraint)),
      violation_(violation) {}

TrajectoryBlockResult solve_trajectory_block(const PlanningProblem& problem, double eta,
                                             const Trajectory& linearization, const SolverConfig& config,
                                             std::optional<double> fixed_margin) {
    problem.validate();
    config.validate();
    if (!(eta >= 0.0) || !std::isfinite(eta)) throw std::invalid_argument("eta must be finite and >= 0");
    if (linearization.horizon() != problem.horizon) {
        throw std::invalid_argument("linearization point does not match the horizon");
    }
    if (!(problem.bounds.v_min < problem.bounds.v_max) || !(problem.bounds.omega_min < problem.bounds.omega_max)) {
        throw std::invalid_argument("control bounds must have a non-empty interior");
    }

    Layout layout{problem.horizon, !fixed_margin.has_value() && eta > 0.0};
    double pinned = 0.0;
    if (fixed_margin) {
        pinned = *fixed_margin;
        if (eta > 0.0 && !(pinned > 0.0)) throw std::domain_error("regularizer pole: fixed m_d must be > 0");
    } else if (!layout.free_margin) {
        pinned = config.md_floor;  // nothing rewards a larger margin
    }

    // unwrap the reference headings from the problem's own initial heading
    Trajectory anchored = linearization;
    anchored.states.front() = problem.initial_state;
    const auto lin = linearize_dynamics(anchored, problem.dt);

    Eigen::MatrixXd a;
    Eigen::VectorXd b;
    build_dynamics(problem, lin, layout, a, b);
    const auto ineq = build_inequalities(problem, layout, pinned, config.md_floor);
    const auto objective = make_objective(problem, layout, eta);

    Eigen::VectorXd z = affine_rollout(problem, lin, linearization, layout);
    z = find_interior_point(a, ineq, std::move(z), config);

    detail::BarrierSolver solver(a, ineq.g, ineq.h, objective, config);
    const auto out = solver.solve(z, config.barrier_eps);

    TrajectoryBlockResult result;
    auto& traj = result.trajectory;
    traj.states.push_back(problem.initial_state);
    for (int k = 0; k < problem.horizon; ++k) {
        traj.states.push_back({out.z(Layout::x(k)), out.z(Layout::y(k)), normalize_angle(out.z(Layout::theta(k)))});
        traj.controls.push_back({out.z(Layout::v(k)), out.z(Layout::omega(k))});
    }
    traj.m_d = layout.free_margin ? out.z(layout.margin()) : pinned;

    result.tracking = tracking_cost(problem, traj);
    result.regularizer = (eta > 0.0) ? eta * margin_term(traj.m_d).value : 0.0;
    result.objective = result.tracking + result.regularizer;
    result.duality_gap = static_cast<double>(ineq.h.size()) / out.t;
    result.kkt_residual = out.kkt_residual;
    result.newton_steps = out.newton_steps;
    return result;
}

double outage_weight(const JointProblem& problem, const PowerSchedule& powers) {
    double eta = 0.0;
    for (int k = 0; k < problem.planning.horizon; ++k) {
        const auto kk = static_cast<std::size_t>(k);
        const double rho = problem.planning.rho[kk];
        if (rho == 0.0) continue;
        for (auto v : kSurrounding) {
            const auto vi = static_cast<std::size_t>(v);
            eta += rho * outage_probability(problem.channel, problem.csi[vi][kk], powers.powers[vi][kk]);
        }
    }
    return eta;
}

TrajectoryBlockResult solve_d1(const JointProblem& problem, const PowerSchedule& powers,
                               const Trajectory& linearization, const SolverConfig& config,
                               std::optional<double> fixed_margin) {
    return solve_trajectory_block(problem.planning, outage_weight(problem, powers), linearization, config,
                                  fixed_margin);
}

}  // namespace v2x
