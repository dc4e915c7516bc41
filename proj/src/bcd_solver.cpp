#include "v2x/bcd_solver.hpp"

#include <chrono>
#include <cmath>
#include <future>
#include <numeric>

namespace v2x {

void SolverConfig::validate() const {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(name) + " must be > 0");
    };
    auto unit = [](double v, const char* name) {
        if (!(v > 0.0 && v < 1.0)) throw std::invalid_argument(std::string(name) + " must be in (0, 1)");
    };
    if (bcd_max_iter < 1) throw std::invalid_argument("bcd_max_iter must be >= 1");
    if (newton_max_iter < 1) throw std::invalid_argument("newton_max_iter must be >= 1");
    if (pg_max_iter < 1) throw std::invalid_argument("pg_max_iter must be >= 1");
    if (armijo_max_backtracks < 1) throw std::invalid_argument("armijo_max_backtracks must be >= 1");
    positive(bcd_tol, "bcd_tol");
    positive(barrier_t0, "barrier_t0");
    if (!(barrier_mu > 1.0) || !std::isfinite(barrier_mu)) throw std::invalid_argument("barrier_mu must be > 1");
    positive(barrier_eps, "barrier_eps");
    positive(newton_tol, "newton_tol");
    positive(pg_tol, "pg_tol");
    positive(armijo_initial, "armijo_initial");
    unit(armijo_sigma, "armijo_sigma");
    unit(armijo_shrink, "armijo_shrink");
    positive(md_floor, "md_floor");
    if (!(md_report_floor >= 0.0)) throw std::invalid_argument("md_report_floor must be >= 0");
    positive(bisection_tol, "bisection_tol");
    if (!(relinearization_step > 0.0 && relinearization_step <= 1.0)) {
        throw std::invalid_argument("relinearization_step must be in (0, 1]");
    }
}

PowerSchedule PowerSchedule::uniform(int horizon, double budget) {
    if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
    if (!(budget >= 0.0)) throw std::invalid_argument("budget must be >= 0");
    PowerSchedule s;
    s.budget = budget;
    for (auto& p : s.powers) p.assign(static_cast<std::size_t>(horizon), budget / horizon);
    return s;
}

double PowerSchedule::total(Vehicle v) const {
    const auto& p = of(v);
    return std::accumulate(p.begin(), p.end(), 0.0);
}

bool PowerSchedule::feasible(double tol) const {
    for (auto v : kSurrounding) {
        for (double p : of(v)) {
            if (!(p >= 0.0)) return false;
        }
        if (total(v) > budget + tol) return false;
    }
    return true;
}

void JointProblem::validate() const {
    planning.validate();
    channel.validate();
    if (!(power_budget > 0.0) || !std::isfinite(power_budget)) throw std::invalid_argument("P_max must be > 0");
    for (const auto& per_slot : csi) {
        if (per_slot.size() != static_cast<std::size_t>(planning.horizon)) {
            throw std::invalid_argument("csi needs one estimate per vehicle and slot");
        }
        for (const auto& c : per_slot) {
            if (!(c.h_hat_sq >= 0.0) || !std::isfinite(c.h_hat_sq)) {
                throw std::invalid_argument("csi estimates must be finite and >= 0");
            }
        }
    }
}

double joint_objective(const JointProblem& problem, const Trajectory& traj, const PowerSchedule& powers) {
    const double eta = outage_weight(problem, powers);
    double f = tracking_cost(problem.planning, traj);
    if (eta > 0.0) {
        if (!(traj.m_d > 0.0)) throw std::domain_error("regularizer pole: m_d must be > 0");
        f += eta / -std::expm1(-traj.m_d);
    }
    return f;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

PowerBlockResult solve_vehicle(const JointProblem& problem, const PowerSchedule& current, Vehicle v, double m_d,
                               const SolverConfig& config) {
    const auto vi = static_cast<std::size_t>(v);
    return solve_q1_single(problem.channel, problem.csi[vi], problem.planning.rho, m_d, problem.power_budget,
                           current.of(v), config);
}

// lin + step * (next - lin), headings compared unwrapped
Trajectory relax_linearization(const Trajectory& lin, const Trajectory& next, double step) {
    if (step == 1.0) return next;
    const auto h_lin = unwrapped_headings(lin);
    auto h_next = unwrapped_headings(next);
    const double shift = h_lin.front() - h_next.front();
    for (auto& h : h_next) h += shift;
    Trajectory out = next;
    for (std::size_t k = 1; k < out.states.size(); ++k) {
        auto& s = out.states[k];
        const auto& o = lin.states[k];
        s.x = o.x + step * (s.x - o.x);
        s.y = o.y + step * (s.y - o.y);
        s.theta = normalize_angle(h_lin[k] + step * (h_next[k] - h_lin[k]));
        auto& u = out.controls[k - 1];
        const auto& uo = lin.controls[k - 1];
        u.v = uo.v + step * (u.v - uo.v);
        u.omega = uo.omega + step * (u.omega - uo.omega);
    }
    return out;
}

}  // namespace

BcdResult run_bcd(const JointProblem& problem, const SolverConfig& config, const BcdOptions& options) {
    problem.validate();
    config.validate();

    BcdResult result;
    result.powers = options.initial_powers.value_or(PowerSchedule::uniform(problem.planning.horizon,
                                                                           problem.power_budget));
    result.powers.budget = problem.power_budget;
    if (!result.powers.feasible(config.bisection_tol)) throw std::invalid_argument("initial powers are infeasible");
    result.trajectory = options.initial_linearization.value_or(straight_line_reference(problem.planning));
    if (result.trajectory.horizon() != problem.planning.horizon) {
        throw std::invalid_argument("initial linearization does not match the horizon");
    }

    Trajectory lin_point = result.trajectory;
    double previous = std::numeric_limits<double>::quiet_NaN();
    for (int l = 1; l <= config.bcd_max_iter; ++l) {
        BcdIteration row;
        row.iteration = l;

        auto start = Clock::now();
        const auto d1 = solve_d1(problem, result.powers, lin_point, config, options.fixed_margin);
        result.trajectory = d1.trajectory;
        lin_point = relax_linearization(lin_point, d1.trajectory, config.relinearization_step);
        row.d1_seconds = seconds_since(start);

        start = Clock::now();
        const double eta = outage_weight(problem, result.powers);
        if (options.optimize_power && eta > 0.0) {
            const double m_d = std::max(result.trajectory.m_d, config.md_floor);
            std::array<PowerBlockResult, 3> blocks;
            if (config.parallel_power_block) {
                std::array<std::future<PowerBlockResult>, 3> jobs;
                for (auto v : kSurrounding) {
                    jobs[static_cast<std::size_t>(v)] = std::async(std::launch::async, solve_vehicle, std::cref(problem),
                                                                   std::cref(result.powers), v, m_d, std::cref(config));
                }
                for (std::size_t i = 0; i < jobs.size(); ++i) blocks[i] = jobs[i].get();
            } else {
                for (auto v : kSurrounding) {
                    blocks[static_cast<std::size_t>(v)] = solve_vehicle(problem, result.powers, v, m_d, config);
                }
            }
            for (auto v : kSurrounding) result.powers.of(v) = std::move(blocks[static_cast<std::size_t>(v)].powers);
        }
        row.q1_seconds = seconds_since(start);

        row.tracking = tracking_cost(problem.planning, result.trajectory);
        row.objective = joint_objective(problem, result.trajectory, result.powers);
        row.regularizer = row.objective - row.tracking;
        row.m_d = result.trajectory.m_d;
        result.trace.iterations.push_back(row);

        if (l > 1) {
            const double change = std::fabs(row.objective - previous) / std::max(std::fabs(previous), 1e-12);
            if (change < config.bcd_tol) {
                result.trace.converged = true;
                break;
            }
        }
        previous = row.objective;
    }
    return result;
}

}  // namespace v2x
