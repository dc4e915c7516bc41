#include "v2x/lane_change_sim.hpp"

#include "v2x/seed.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace v2x {

namespace {

constexpr std::uint64_t kCsiTag = 0x435349;    // "CSI"
constexpr std::uint64_t kErrorTag = 0x455252;  // "ERR"
constexpr std::uint64_t kTrialTag = 0x54524c;  // "TRL"

}  // namespace

std::string_view to_string(Policy p) {
    switch (p) {
        case Policy::Proposed: return "proposed";
        case Policy::BaselineNoUncertainty: return "no-uncertainty";
        case Policy::BaselineConstantPower: return "const-power";
    }
    return "?";
}

std::string_view to_string(PlanningMode m) {
    return m == PlanningMode::OneShot ? "oneshot" : "receding";
}

std::string_view to_string(ErrorMode m) {
    return m == ErrorMode::Sampled ? "sampled" : "lag";
}

std::optional<Policy> parse_policy(std::string_view s) {
    for (auto p : {Policy::Proposed, Policy::BaselineNoUncertainty, Policy::BaselineConstantPower}) {
        if (s == to_string(p)) return p;
    }
    return std::nullopt;
}

std::optional<PlanningMode> parse_mode(std::string_view s) {
    if (s == "oneshot") return PlanningMode::OneShot;
    if (s == "receding") return PlanningMode::RecedingHorizon;
    return std::nullopt;
}

std::optional<ErrorMode> parse_error_mode(std::string_view s) {
    if (s == "sampled") return ErrorMode::Sampled;
    if (s == "lag") return ErrorMode::Lag;
    return std::nullopt;
}

double kmh_to_ms(double kmh) { return kmh / 3.6; }

void ScenarioConfig::validate() const {
    auto finite = [](double v) { return std::isfinite(v); };
    if (!(lane_width > 0.0) || !finite(lane_width)) throw std::invalid_argument("scenario.lane_width must be > 0");
    for (double s : {ego_speed_kmh, lv_speed_kmh, tv_speed_kmh, fv_speed_kmh}) {
        if (!(s >= 0.0) || !finite(s)) throw std::invalid_argument("scenario speeds must be >= 0");
    }
    for (const auto* p : {&ego_start, &lv_start, &tv_start, &fv_start}) {
        if (!p->allFinite()) throw std::invalid_argument("scenario start positions must be finite");
    }
    if (!finite(accel)) throw std::invalid_argument("scenario.accel must be finite");
    if (horizon < 1) throw std::invalid_argument("scenario.horizon must be >= 1");
    if (!(dt > 0.0) || !finite(dt)) throw std::invalid_argument("scenario.dt must be > 0");
    channel.validate();
    if (!(budget > 0.0) || !finite(budget)) throw std::invalid_argument("channel.budget must be > 0");
    if (target_outage && !(*target_outage > 0.0 && *target_outage < 1.0)) {
        throw std::invalid_argument("channel.target_outage must be in (0, 1)");
    }
    if (!(safety_distance > 0.0)) throw std::invalid_argument("scenario.safety_distance must be > 0");
    if (!(collision_distance > 0.0)) throw std::invalid_argument("scenario.collision_distance must be > 0");
    if (rho.empty()) throw std::invalid_argument("scenario.rho must not be empty");
    for (double r : rho) {
        if (!(r >= 0.0) || !finite(r)) throw std::invalid_argument("scenario.rho entries must be >= 0");
    }
    if (!(bounds.v_min < bounds.v_max) || !(bounds.omega_min < bounds.omega_max)) {
        throw std::invalid_argument("scenario control bounds need v_min < v_max and omega_min < omega_max");
    }
    if (turn_start_slot < 0 || turn_end_slot <= turn_start_slot) {
        throw std::invalid_argument("scenario needs 0 <= turn_start_slot < turn_end_slot");
    }
    if (trials < 1) throw std::invalid_argument("scenario.trials must be >= 1");
}

NeighborPositions NeighborKinematics::position_at(double t) const {
    NeighborPositions p;
    for (auto v : kSurrounding) p[v] = start[v] + speed[v] * t + 0.5 * accel * t * t;
    return p;
}

NeighborPositions NeighborKinematics::speed_at(double t) const {
    NeighborPositions s;
    for (auto v : kSurrounding) s[v] = speed[v] + accel * t;
    return s;
}

Eigen::Vector2d Scenario::target(int slot) const {
    const auto& c = config;
    const double x = ego_start.x + ego_speed * slot * c.dt;
    double y;
    if (slot <= c.turn_start_slot) {
        y = ego_lane_center;
    } else if (slot >= c.turn_end_slot) {
        y = target_lane_center;
    } else {
        const double s = static_cast<double>(slot - c.turn_start_slot) / (c.turn_end_slot - c.turn_start_slot);
        y = ego_lane_center + s * (target_lane_center - ego_lane_center);
    }
    return {x, y};
}

double Scenario::rho(int slot) const {
    const auto i = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(slot, 1) - 1), 0, config.rho.size() - 1);
    return config.rho[i];
}

Scenario build_scenario(const ScenarioConfig& config) {
    config.validate();
    Scenario s;
    s.config = config;
    s.channel = config.channel;
    if (config.target_outage) {
        s.channel.mu_sq = gain_for_mean_outage(config.channel, config.budget / config.horizon, *config.target_outage);
    }
    s.ego_start = {config.ego_start.x(), config.ego_start.y(), 0.0};
    s.ego_speed = kmh_to_ms(config.ego_speed_kmh);
    s.neighbors.start = {config.lv_start.x(), config.tv_start.x(), config.fv_start.x()};
    s.neighbors.speed = {kmh_to_ms(config.lv_speed_kmh), kmh_to_ms(config.tv_speed_kmh),
                         kmh_to_ms(config.fv_speed_kmh)};
    s.neighbors.accel = config.accel;
    s.lane_boundary = config.lane_width;
    s.ego_lane_center = config.ego_start.y();
    s.target_lane_center = config.tv_start.y();
    return s;
}

std::vector<NeighborPositions> predict_neighbors(const Scenario& scenario, int decision_slot) {
    const double t = decision_slot * scenario.config.dt;
    const auto now = scenario.neighbors.position_at(t);
    const auto speed = scenario.neighbors.speed_at(t);
    const double accel = scenario.config.predict_acceleration ? scenario.neighbors.accel : 0.0;
    std::vector<NeighborPositions> out;
    for (int n = 1; n <= scenario.config.horizon; ++n) {
        const double tau = n * scenario.config.dt;
        NeighborPositions p;
        for (auto v : kSurrounding) p[v] = now[v] + speed[v] * tau + 0.5 * accel * tau * tau;
        out.push_back(p);
    }
    return out;
}

PlanningProblem planning_problem_at(const Scenario& scenario, int decision_slot, const VehicleState& ego,
                                    const ControlInput& prev_control, std::vector<NeighborPositions> neighbors) {
    const auto& c = scenario.config;
    if (neighbors.size() != static_cast<std::size_t>(c.horizon)) {
        throw std::invalid_argument("planning_problem_at: one neighbor entry per horizon slot is required");
    }
    PlanningProblem p;
    p.horizon = c.horizon;
    p.dt = c.dt;
    p.w_track = c.w_track;
    p.w_control = c.w_control;
    p.bounds = c.bounds;
    p.safety_distance = c.safety_distance;
    p.initial_state = ego;
    p.prev_control = prev_control;
    p.neighbors = std::move(neighbors);
    for (int n = 1; n <= c.horizon; ++n) {
        p.targets.push_back(scenario.target(decision_slot + n));
        p.rho.push_back(scenario.rho(decision_slot + n));
    }
    p.lanes = lane_schedule_from_targets(p.targets, scenario.lane_boundary);
    if (ego.y >= scenario.lane_boundary) std::fill(p.lanes.begin(), p.lanes.end(), Lane::Target);
    return p;
}

LinkCsi csi_at(const Scenario& scenario, std::uint64_t trial_seed, int decision_slot) {
    LinkCsi csi;
    for (auto v : kSurrounding) {
        auto& per_slot = csi[static_cast<std::size_t>(v)];
        for (int n = 1; n <= scenario.config.horizon; ++n) {
            const auto seed = derive_seed(trial_seed, {kCsiTag, static_cast<std::uint64_t>(v),
                                                       static_cast<std::uint64_t>(decision_slot + n)});
            per_slot.push_back(sample_csi(scenario.channel, seed));
        }
    }
    return csi;
}

PolicySetup baseline_policy(Policy policy, PlanningProblem problem, int horizon, double budget) {
    PolicySetup setup;
    switch (policy) {
        case Policy::Proposed:
            break;
        case Policy::BaselineNoUncertainty:
            std::fill(problem.rho.begin(), problem.rho.end(), 0.0);
            setup.options.optimize_power = false;
            setup.options.fixed_margin = 0.0;
            setup.options.initial_powers = PowerSchedule::uniform(horizon, budget);
            break;
        case Policy::BaselineConstantPower:
            setup.options.optimize_power = false;
            setup.options.initial_powers = PowerSchedule::uniform(horizon, budget);
            break;
    }
    setup.problem = std::move(problem);
    return setup;
}

namespace {

// Powers the policy will use over the horizon. The power block's minimizer
// does not depend on m_d (it only scales the objective), so the proposed
// schedule is known before the trajectory is planned.
PowerSchedule policy_powers(Policy policy, const Scenario& scenario, const LinkCsi& csi,
                            const std::vector<double>& rho, const SolverConfig& solver) {
    const auto& c = scenario.config;
    auto powers = PowerSchedule::uniform(c.horizon, c.budget);
    if (policy != Policy::Proposed) return powers;
    for (auto v : kSurrounding) {
        const auto vi = static_cast<std::size_t>(v);
        powers.of(v) = solve_q1_single(scenario.channel, csi[vi], rho, 1.0, c.budget, powers.of(v), solver).powers;
    }
    return powers;
}

// Position error of vehicle v for absolute slot `slot`, planned at `decision`.
double position_error(const Scenario& scenario, Vehicle v, double bound, std::uint64_t trial_seed, int decision,
                      int slot, double p_out, double ego_speed) {
    if (scenario.config.error_mode == ErrorMode::Lag) return -bound;
    const auto seed = derive_seed(trial_seed, {kErrorTag, static_cast<std::uint64_t>(v),
                                               static_cast<std::uint64_t>(decision), static_cast<std::uint64_t>(slot)});
    return sample_position_error(scenario.channel, p_out, ego_speed, seed);
}

// Previous plan advanced by one slot, re-rolled from the current state.
Trajectory shifted_plan(const Trajectory& plan, const VehicleState& state, double dt) {
    std::vector<ControlInput> controls(plan.controls.begin() + 1, plan.controls.end());
    controls.push_back(plan.controls.back());
    return rollout(state, controls, dt, plan.m_d);
}

}  // namespace

Decision prepare_decision(const Scenario& scenario, const SolverConfig& solver, std::uint64_t trial_seed,
                          int decision_slot, const VehicleState& ego, const ControlInput& prev_control,
                          const std::optional<Trajectory>& last_plan) {
    const auto& config = scenario.config;
    const int k_slots = config.horizon;
    const int j = decision_slot;
    Decision d;
    const auto csi = csi_at(scenario, trial_seed, j);
    std::vector<double> rho;
    for (int n = 1; n <= k_slots; ++n) rho.push_back(scenario.rho(j + n));
    d.proposal = policy_powers(config.policy, scenario, csi, rho, solver);

    auto& rec = d.record;
    rec.decision_slot = j;
    rec.predicted = predict_neighbors(scenario, j);
    const double ego_speed = std::fabs(prev_control.v);
    d.delivered = rec.predicted;
    for (int n = 0; n < k_slots; ++n) {
        const auto nn = static_cast<std::size_t>(n);
        std::array<double, 3> outage{};
        NeighborPositions bound;
        for (auto v : kSurrounding) {
            const auto vi = static_cast<std::size_t>(v);
            outage[vi] = outage_probability(scenario.channel, csi[vi][nn], d.proposal.of(v)[nn]);
            bound[v] = position_error_bound(scenario.channel, outage[vi], ego_speed);
            d.delivered[nn][v] += position_error(scenario, v, bound[v], trial_seed, j, j + n + 1, outage[vi], ego_speed);
        }
        rec.outage.push_back(outage);
        rec.error_bound.push_back(bound);
    }

    auto base = planning_problem_at(scenario, j, ego, prev_control, d.delivered);
    d.setup = baseline_policy(config.policy, std::move(base), k_slots, config.budget);
    if (config.policy == Policy::Proposed) d.setup.options.initial_powers = d.proposal;
    if (last_plan) d.setup.options.initial_linearization = shifted_plan(*last_plan, ego, config.dt);
    d.joint = JointProblem{d.setup.problem, scenario.channel, csi, config.budget};
    return d;
}

TrialResult run_trial(const ScenarioConfig& config, const SolverConfig& solver, std::uint64_t trial_seed) {
    const Scenario scenario = build_scenario(config);
    solver.validate();
    const int k_slots = config.horizon;
    const double dt = config.dt;

    TrialResult r;
    r.seed = trial_seed;
    r.ego.push_back(scenario.ego_start);
    for (int k = 0; k <= k_slots; ++k) r.truth.push_back(scenario.neighbors.position_at(k * dt));

    ControlInput prev{scenario.ego_speed, 0.0};
    std::optional<Trajectory> last_plan;
    // what the plan in force prescribes for the remaining slots
    struct Step {
        ControlInput control;
        NeighborPositions delivered;
        std::array<double, 3> power, outage;
        double margin;
    };
    std::vector<Step> pending;

    for (int j = 0; j < k_slots; ++j) {
        const bool decide = config.mode == PlanningMode::RecedingHorizon || j == 0;
        if (decide) {
            auto d = prepare_decision(scenario, solver, trial_seed, j, r.ego.back(), prev, last_plan);
            auto& rec = d.record;
            const auto& delivered = d.delivered;
            const auto& powers = d.proposal;
            auto& setup = d.setup;
            auto& joint = d.joint;
            pending.clear();
            try {
                auto bcd = run_bcd(joint, solver, setup.options);
                if (r.plans.empty()) r.objective_trace = bcd.trace.iterations;
                const int keep = config.mode == PlanningMode::RecedingHorizon ? 1 : k_slots - j;
                for (int n = 0; n < keep; ++n) {
                    const auto nn = static_cast<std::size_t>(n);
                    Step st{bcd.trajectory.controls[nn], delivered[nn], {}, rec.outage[nn], bcd.trajectory.m_d};
                    for (auto v : kSurrounding) st.power[static_cast<std::size_t>(v)] = bcd.powers.of(v)[nn];
                    pending.push_back(st);
                }
                last_plan = bcd.trajectory;
                rec.problem = std::move(joint.planning);
                rec.trajectory = std::move(bcd.trajectory);
                rec.powers = std::move(bcd.powers);
                r.plans.push_back(std::move(rec));
            } catch (const InfeasibleProblem&) {
                // conservative stop until the next decision
                ++r.infeasible_slots;
                last_plan.reset();
                for (int n = 0; n < k_slots - j; ++n) {
                    const auto nn = static_cast<std::size_t>(n);
                    Step st{{config.bounds.v_min, 0.0}, delivered[nn], {}, rec.outage[nn], 0.0};
                    for (auto v : kSurrounding) st.power[static_cast<std::size_t>(v)] = powers.of(v)[nn];
                    pending.push_back(st);
                }
            }
        }

        Step st = pending.front();
        pending.erase(pending.begin());
        st.control.v = std::clamp(st.control.v, config.bounds.v_min, config.bounds.v_max);
        st.control.omega = std::clamp(st.control.omega, config.bounds.omega_min, config.bounds.omega_max);
        r.controls.push_back(st.control);
        r.delivered.push_back(st.delivered);
        r.power.push_back(st.power);
        r.outage.push_back(st.outage);
        r.margin.push_back(st.margin);
        r.ego.push_back(step_dynamics(r.ego.back(), st.control, dt));
        prev = st.control;
    }

    const auto hit = detect_collision(r.ego, r.truth, scenario.lane_boundary, config.collision_distance);
    r.collision = hit.collision;
    r.collision_slot = hit.slot;
    r.collision_vehicle = hit.vehicle;
    return r;
}

CollisionStats collision_stats(int trials, int collisions) {
    if (trials < 1 || collisions < 0 || collisions > trials) throw std::invalid_argument("invalid collision counts");
    CollisionStats s;
    s.trials = trials;
    s.collisions = collisions;
    s.ratio = static_cast<double>(collisions) / trials;
    s.confidence_halfwidth = 1.96 * std::sqrt(s.ratio * (1.0 - s.ratio) / trials);
    return s;
}

std::uint64_t trial_seed(std::uint64_t run_seed, int trial) {
    return derive_seed(run_seed, {kTrialTag, static_cast<std::uint64_t>(trial)});
}

MonteCarloResult run_monte_carlo(const ScenarioConfig& config, const SolverConfig& solver, int jobs) {
    config.validate();
    const int n = config.trials;
    MonteCarloResult out;
    out.trials.resize(static_cast<std::size_t>(n));

    unsigned workers = jobs > 0 ? static_cast<unsigned>(jobs) : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min<unsigned>(workers, static_cast<unsigned>(n));
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    auto work = [&] {
        for (int i = next++; i < n && !failed; i = next++) {
            try {
                out.trials[static_cast<std::size_t>(i)] = run_trial(config, solver, trial_seed(config.seed, i));
            } catch (...) {
                if (!failed.exchange(true)) failure = std::current_exception();
            }
        }
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    }
    if (failure) std::rethrow_exception(failure);

    int collisions = 0;
    double outage_sum = 0.0, margin_sum = 0.0;
    std::size_t outage_count = 0, margin_count = 0;
    for (const auto& t : out.trials) {
        collisions += t.collision ? 1 : 0;
        for (const auto& o : t.outage) {
            for (double p : o) outage_sum += p;
            outage_count += o.size();
        }
        for (double m : t.margin) margin_sum += m;
        margin_count += t.margin.size();
    }
    out.stats = collision_stats(n, collisions);
    out.mean_outage = outage_count ? outage_sum / static_cast<double>(outage_count) : 0.0;
    out.mean_margin = margin_count ? margin_sum / static_cast<double>(margin_count) : 0.0;
    return out;
}

}  // namespace v2x
