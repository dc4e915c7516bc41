#include "v2x/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <iostream>

namespace v2x::cli {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

nlohmann::json trace_json(const std::vector<BcdIteration>& trace) {
    auto arr = nlohmann::json::array();
    for (const auto& it : trace) {
        arr.push_back({{"iteration", it.iteration},
                       {"objective", it.objective},
                       {"tracking", it.tracking},
                       {"regularizer", it.regularizer},
                       {"m_d", it.m_d}});
    }
    return arr;
}

nlohmann::json collision_json(const TrialResult& t) {
    nlohmann::json j = {{"collision", t.collision}, {"infeasible_slots", t.infeasible_slots}};
    j["slot"] = t.collision_slot ? nlohmann::json(*t.collision_slot) : nlohmann::json(nullptr);
    j["vehicle"] = t.collision_vehicle ? nlohmann::json(std::string(to_string(*t.collision_vehicle)))
                                       : nlohmann::json(nullptr);
    return j;
}

nlohmann::json timing_json(const std::vector<BcdIteration>& trace, double wall) {
    double d1 = 0.0, q1 = 0.0;
    for (const auto& it : trace) {
        d1 += it.d1_seconds;
        q1 += it.q1_seconds;
    }
    return {{"wall_seconds", wall}, {"d1_seconds", d1}, {"q1_seconds", q1}};
}

// objective averaged over the trials that reached each outer iteration
nlohmann::json mean_trace(const std::vector<TrialResult>& trials) {
    std::vector<double> sum;
    std::vector<int> count;
    for (const auto& t : trials) {
        for (std::size_t i = 0; i < t.objective_trace.size(); ++i) {
            if (sum.size() <= i) {
                sum.push_back(0.0);
                count.push_back(0);
            }
            sum[i] += t.objective_trace[i].objective;
            ++count[i];
        }
    }
    auto arr = nlohmann::json::array();
    for (std::size_t i = 0; i < sum.size(); ++i) {
        arr.push_back({{"iteration", i + 1}, {"objective", sum[i] / count[i]}, {"trials", count[i]}});
    }
    return arr;
}

nlohmann::json summary_base(const std::string& command, const RunConfig& config, const Overrides& o) {
    return {{"schema", 1},
            {"command", command},
            {"config", to_json(config)},
            {"overrides", o.to_json()},
            {"calibrated_mu_sq", build_scenario(config.scenario).channel.mu_sq}};
}

std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

}  // namespace

TrialResult plan_as_trial(const Scenario& scenario, const Decision& decision, const BcdResult& bcd,
                          std::uint64_t seed) {
    const auto& c = scenario.config;
    TrialResult t;
    t.seed = seed;
    t.controls = bcd.trajectory.controls;
    t.ego = rollout(scenario.ego_start, t.controls, c.dt, bcd.trajectory.m_d).states;
    for (int k = 0; k <= c.horizon; ++k) t.truth.push_back(scenario.neighbors.position_at(k * c.dt));
    t.delivered = decision.delivered;
    for (int k = 0; k < c.horizon; ++k) {
        const auto kk = static_cast<std::size_t>(k);
        std::array<double, 3> p{};
        for (auto v : {Vehicle::LV, Vehicle::TV, Vehicle::FV}) p[static_cast<std::size_t>(v)] = bcd.powers.of(v)[kk];
        t.power.push_back(p);
        // the outage the delivered positions were drawn with
        t.outage.push_back(decision.record.outage[kk]);
        t.margin.push_back(bcd.trajectory.m_d);
    }
    t.objective_trace = bcd.trace.iterations;
    const auto hit = detect_collision(t.ego, t.truth, scenario.lane_boundary, c.collision_distance);
    t.collision = hit.collision;
    t.collision_slot = hit.slot;
    t.collision_vehicle = hit.vehicle;
    return t;
}

int cmd_solve(const RunConfig& config, const Overrides& o) {
    const auto start = Clock::now();
    const Scenario scenario = build_scenario(config.scenario);
    const auto seed = trial_seed(config.scenario.seed, 0);
    const ControlInput prev{scenario.ego_speed, 0.0};
    const auto decision = prepare_decision(scenario, config.solver, seed, 0, scenario.ego_start, prev);
    const auto bcd = run_bcd(decision.joint, config.solver, decision.setup.options);
    const auto trial = plan_as_trial(scenario, decision, bcd, seed);

    auto summary = summary_base("solve", config, o);
    summary["trial_seed"] = seed;
    summary["converged"] = bcd.trace.converged;
    summary["iterations"] = bcd.trace.iterations.size();
    summary["objective"] = bcd.trace.iterations.empty() ? 0.0 : bcd.trace.iterations.back().objective;
    summary["m_d"] = bcd.trajectory.m_d;
    summary["trace"] = trace_json(bcd.trace.iterations);
    summary["outcome"] = collision_json(trial);
    summary["timings"] = timing_json(bcd.trace.iterations, seconds_since(start));

    OutputSet out;
    out.add("trajectory.csv", trial_trajectory_csv(trial, config.scenario));
    out.add("trace.csv", trace_csv(bcd.trace.iterations));
    out.add("summary.json", dump(summary));
    out.commit(config.out_dir);
    return 0;
}

int cmd_trial(const RunConfig& config, const Overrides& o) {
    const auto start = Clock::now();
    const auto seed = trial_seed(config.scenario.seed, 0);
    config.scenario.validate();
    const auto trial = run_trial(config.scenario, config.solver, seed);

    auto summary = summary_base("trial", config, o);
    summary["trial_seed"] = seed;
    summary["plans"] = trial.plans.size();
    summary["trace"] = trace_json(trial.objective_trace);
    summary["outcome"] = collision_json(trial);
    summary["timings"] = timing_json(trial.objective_trace, seconds_since(start));

    OutputSet out;
    out.add("trajectory.csv", trial_trajectory_csv(trial, config.scenario));
    out.add("trace.csv", trace_csv(trial.objective_trace));
    out.add("summary.json", dump(summary));
    out.commit(config.out_dir);
    return 0;
}

int cmd_montecarlo(const RunConfig& config, const Overrides& o) {
    const auto start = Clock::now();
    const auto policies = o.compare ? parse_policy_list(*o.compare) : std::vector<Policy>{config.scenario.policy};
    std::optional<Sweep> sweep;
    if (o.sweep) sweep = parse_sweep(*o.sweep);
    const std::size_t n_points = sweep ? sweep->values.size() : 1;

    std::string rows = kTrialsHeader;
    auto points = nlohmann::json::array();
    for (std::size_t pi = 0; pi < n_points; ++pi) {
        ScenarioConfig scenario = config.scenario;
        std::optional<double> value;
        if (sweep) {
            value = sweep->values[pi];
            apply_sweep(scenario, sweep->key, *value);
        }
        nlohmann::json point = {{"point", pi}};
        point["sweep_key"] = sweep ? nlohmann::json(sweep->key) : nlohmann::json(nullptr);
        point["sweep_value"] = value ? nlohmann::json(*value) : nlohmann::json(nullptr);
        nlohmann::json per_policy = nlohmann::json::object();
        for (auto policy : policies) {
            scenario.policy = policy;
            // every policy sees the same trial seeds
            const auto mc = run_monte_carlo(scenario, config.solver, config.jobs);
            int infeasible = 0;
            for (const auto& t : mc.trials) infeasible += t.infeasible_slots;
            per_policy[std::string(to_string(policy))] = {
                {"trials", mc.stats.trials},
                {"collisions", mc.stats.collisions},
                {"ratio", mc.stats.ratio},
                {"ci95_halfwidth", mc.stats.confidence_halfwidth},
                {"mean_outage", mc.mean_outage},
                {"mean_margin", mc.mean_margin},
                {"infeasible_slots", infeasible},
                {"mean_objective_trace", mean_trace(mc.trials)},
            };
            rows += trials_rows(static_cast<int>(pi), sweep ? sweep->key : std::string(), value, policy, mc.trials);
        }
        point["policies"] = std::move(per_policy);
        points.push_back(std::move(point));
    }

    auto summary = summary_base("montecarlo", config, o);
    summary["points"] = std::move(points);
    summary["timings"] = {{"wall_seconds", seconds_since(start)}};

    OutputSet out;
    out.add("trials.csv", std::move(rows));
    out.add("summary.json", dump(summary));
    out.commit(config.out_dir);
    return 0;
}

namespace {

void report(const nlohmann::json& error) { std::cerr << error.dump() << std::endl; }

}  // namespace

int run(int argc, char** argv) {
    CLI::App app{"Joint V2X lane-change planning and power-control simulator", "v2xsim"};
    app.require_subcommand(1);

    std::string config_path;
    std::uint64_t seed = 0;
    int trials = 0, jobs = 0;
    std::string policy, compare, sweep, out, mode;

    auto* solve = app.add_subcommand("solve", "Plan once at slot 0 and write the plan");
    auto* trial = app.add_subcommand("trial", "Run one closed-loop lane-change trial");
    auto* montecarlo = app.add_subcommand("montecarlo", "Run trials and report collision ratios");
    for (auto* sub : {solve, trial, montecarlo}) {
        sub->add_option("--config", config_path, "YAML configuration file");
        sub->add_option("--seed", seed, "Run seed");
        sub->add_option("--policy", policy, "proposed, no-uncertainty or const-power");
        sub->add_option("--out", out, "Output directory");
        sub->add_option("--mode", mode, "oneshot or receding");
    }
    montecarlo->add_option("--trials", trials, "Trials per policy and sweep point");
    montecarlo->add_option("--compare", compare, "Comma-separated policies evaluated on shared seeds");
    montecarlo->add_option("--sweep", sweep, "KEY=A:B:STEP over beta, lv-speed, tv-speed, fv-speed, accel, "
                                             "budget-dbm or target-outage");
    montecarlo->add_option("--jobs", jobs, "Worker threads (0 = available parallelism)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        report({{"error", "usage"}, {"message", e.what()}});
        return 2;
    }

    auto* active = app.get_subcommands().front();
    Overrides o;
    if (active->count("--seed")) o.seed = seed;
    if (active->count("--policy")) o.policy = policy;
    if (active->count("--out")) o.out = out;
    if (active->count("--mode")) o.mode = mode;
    if (active == montecarlo) {
        if (active->count("--trials")) o.trials = trials;
        if (active->count("--compare")) o.compare = compare;
        if (active->count("--sweep")) o.sweep = sweep;
        if (active->count("--jobs")) o.jobs = jobs;
    }

    try {
        RunConfig config = config_path.empty() ? load_config_text("{}") : load_config_file(config_path);
        apply_overrides(config, o);
        if (o.compare) parse_policy_list(*o.compare);
        if (o.sweep) parse_sweep(*o.sweep);
        if (active == solve) return cmd_solve(config, o);
        if (active == trial) return cmd_trial(config, o);
        return cmd_montecarlo(config, o);
    } catch (const ConfigError& e) {
        report({{"error", "config"}, {"key", e.key()}, {"line", e.line()}, {"message", e.what()}});
        return 2;
    } catch (const InfeasibleProblem& e) {
        report({{"error", "infeasible"},
                {"constraint", e.constraint()},
                {"constraint_index", e.constraint_index()},
                {"violation", e.violation()},
                {"message", e.what()}});
        return 3;
    } catch (const std::invalid_argument& e) {
        report({{"error", "invalid_argument"}, {"message", e.what()}});
        return 2;
    } catch (const std::exception& e) {
        report({{"error", "runtime"}, {"message", e.what()}});
        return 1;
    }
}

}  // namespace v2x::cli
