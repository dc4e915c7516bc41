#include "v2x/lane_change_sim.hpp"

#include <doctest.h>

#include <cmath>

using namespace v2x;

namespace {

SolverConfig quick_solver() {
    SolverConfig s;
    s.parallel_power_block = false;
    return s;
}

void check_same(const TrialResult& a, const TrialResult& b) {
    REQUIRE(a.ego.size() == b.ego.size());
    for (std::size_t k = 0; k < a.ego.size(); ++k) {
        CHECK(a.ego[k].x == b.ego[k].x);
        CHECK(a.ego[k].y == b.ego[k].y);
        CHECK(a.ego[k].theta == b.ego[k].theta);
    }
    for (std::size_t k = 0; k < a.power.size(); ++k) {
        CHECK(a.power[k] == b.power[k]);
        CHECK(a.delivered[k].lv == b.delivered[k].lv);
        CHECK(a.margin[k] == b.margin[k]);
    }
    CHECK(a.collision == b.collision);
}

}  // namespace

TEST_CASE("scenario defaults") {
    const ScenarioConfig c;
    CHECK(c.ego_start.x() == 20.0);
    CHECK(c.ego_start.y() == 1.85);
    CHECK(kmh_to_ms(7.2) == doctest::Approx(2.0));
    const auto s = build_scenario(c);
    CHECK(s.ego_speed == doctest::Approx(2.0));
    CHECK(s.lane_boundary == doctest::Approx(3.72));
    CHECK(s.target(1).y() == doctest::Approx(1.85));
    CHECK(s.target(3).y() == doctest::Approx(5.55));
    CHECK(s.rho(1) == 1.0);
    CHECK(s.rho(9) == 10.0);
    // calibrated so the uniform split meets the target outage on average
    CHECK(mean_outage_probability(s.channel, c.budget / c.horizon) == doctest::Approx(0.3).epsilon(1e-8));
}

TEST_CASE("enum names round-trip") {
    for (auto p : {Policy::Proposed, Policy::BaselineNoUncertainty, Policy::BaselineConstantPower}) {
        CHECK(parse_policy(to_string(p)) == p);
    }
    for (auto m : {PlanningMode::OneShot, PlanningMode::RecedingHorizon}) CHECK(parse_mode(to_string(m)) == m);
    for (auto m : {ErrorMode::Sampled, ErrorMode::Lag}) CHECK(parse_error_mode(to_string(m)) == m);
    CHECK_FALSE(parse_policy("nope").has_value());
}

TEST_CASE("scenario validation") {
    ScenarioConfig c;
    c.turn_end_slot = c.turn_start_slot;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = {};
    c.trials = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("neighbor kinematics") {
    NeighborKinematics n{{0.0, 10.0, -5.0}, {1.0, 2.0, 3.0}, 1.0};
    const auto p = n.position_at(2.0);
    CHECK(p.lv == doctest::Approx(0.0 + 2.0 + 2.0));
    CHECK(p.tv == doctest::Approx(10.0 + 4.0 + 2.0));
    CHECK(n.speed_at(2.0).fv == doctest::Approx(5.0));
}

TEST_CASE("identical seeds give identical trials") {
    const ScenarioConfig c;
    check_same(run_trial(c, quick_solver(), 99), run_trial(c, quick_solver(), 99));
}

TEST_CASE("collision statistics") {
    CHECK(collision_stats(1, 0).ratio == 0.0);
    CHECK(collision_stats(1, 1).ratio == 1.0);
    const auto s = collision_stats(100, 20);
    CHECK(s.ratio == doctest::Approx(0.2));
    CHECK(s.confidence_halfwidth == doctest::Approx(1.96 * std::sqrt(0.2 * 0.8 / 100)));
    CHECK_THROWS_AS(collision_stats(0, 0), std::invalid_argument);
    CHECK_THROWS_AS(collision_stats(3, 4), std::invalid_argument);
}

TEST_CASE("a single-trial run has ratio 0 or 1") {
    ScenarioConfig c;
    c.trials = 1;
    const auto r = run_monte_carlo(c, quick_solver(), 1);
    CHECK((r.stats.ratio == 0.0 || r.stats.ratio == 1.0));
}

TEST_CASE("the no-uncertainty baseline collides with the FV at slot 3 on the nominal trial") {
    ScenarioConfig c;
    c.error_mode = ErrorMode::Lag;
    c.policy = Policy::BaselineNoUncertainty;
    const auto base = run_trial(c, quick_solver(), trial_seed(c.seed, 0));
    CHECK(base.collision);
    CHECK(base.collision_slot == 3);
    CHECK(base.collision_vehicle == Vehicle::FV);

    c.policy = Policy::Proposed;
    const auto proposed = run_trial(c, quick_solver(), trial_seed(c.seed, 0));
    CHECK_FALSE(proposed.collision);
    CHECK(proposed.ego.back().y >= build_scenario(c).lane_boundary);
}

TEST_CASE("delivered positions stay within the error support") {
    ScenarioConfig c;
    for (auto policy : {Policy::Proposed, Policy::BaselineConstantPower}) {
        c.policy = policy;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            const auto t = run_trial(c, quick_solver(), seed);
            for (const auto& plan : t.plans) {
                for (std::size_t n = 0; n < plan.predicted.size(); ++n) {
                    for (auto v : {Vehicle::LV, Vehicle::TV, Vehicle::FV}) {
                        const double err = plan.problem.neighbors[n][v] - plan.predicted[n][v];
                        CHECK(std::fabs(err) <= plan.error_bound[n][v] + 1e-12);
                    }
                }
            }
        }
    }
}

TEST_CASE("predictions with known acceleration match the truth") {
    const auto s = build_scenario(ScenarioConfig{});
    const auto pred = predict_neighbors(s, 2);
    for (int n = 0; n < s.config.horizon; ++n) {
        const auto truth = s.neighbors.position_at((2 + n + 1) * s.config.dt);
        CHECK(pred[static_cast<std::size_t>(n)].fv == doctest::Approx(truth.fv));
    }
}

TEST_CASE("neighbor motion does not depend on the policy") {
    ScenarioConfig c;
    c.policy = Policy::Proposed;
    const auto a = run_trial(c, quick_solver(), 5);
    c.policy = Policy::BaselineNoUncertainty;
    const auto b = run_trial(c, quick_solver(), 5);
    for (std::size_t k = 0; k < a.truth.size(); ++k) {
        CHECK(a.truth[k].lv == b.truth[k].lv);
        CHECK(a.truth[k].tv == b.truth[k].tv);
        CHECK(a.truth[k].fv == b.truth[k].fv);
    }
}

TEST_CASE("baselines use uniform power and the no-uncertainty baseline has no margin") {
    ScenarioConfig c;
    c.policy = Policy::BaselineNoUncertainty;
    const auto t = run_trial(c, quick_solver(), 3);
    for (const auto& p : t.power) {
        for (double x : p) CHECK(x == doctest::Approx(c.budget / c.horizon));
    }
    for (double m : t.margin) CHECK(m <= SolverConfig{}.md_floor);
}

TEST_CASE("emitted plans satisfy the budget, bounds and safety margins") {
    ScenarioConfig c;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto t = run_trial(c, quick_solver(), seed);
        for (const auto& plan : t.plans) {
            CHECK(plan.powers.feasible(1e-9));
            for (const auto& u : plan.trajectory.controls) CHECK(plan.problem.bounds.contains(u));
            for (const auto& con : safety_constraints(plan.problem, plan.trajectory.m_d)) {
                CHECK(con.satisfied(plan.trajectory.states[static_cast<std::size_t>(con.slot)].x, 1e-6));
            }
        }
    }
}

TEST_CASE("more power never raises the proposed collision ratio") {
    ScenarioConfig c;
    c.trials = 20;
    const auto calibrated = build_scenario(c).channel.mu_sq;
    c.channel.mu_sq = calibrated;
    c.target_outage.reset();
    double prev = 2.0;
    for (double dbm : {20.0, 25.0, 30.0}) {
        c.budget = dbm_to_watts(dbm);
        const auto r = run_monte_carlo(c, quick_solver(), 1);
        CHECK(r.stats.ratio <= prev);
        prev = r.stats.ratio;
    }
}

TEST_CASE("Monte Carlo results do not depend on the worker count") {
    ScenarioConfig c;
    c.trials = 6;
    const auto a = run_monte_carlo(c, quick_solver(), 1);
    const auto b = run_monte_carlo(c, quick_solver(), 3);
    CHECK(a.stats.collisions == b.stats.collisions);
    CHECK(a.mean_outage == b.mean_outage);
    for (std::size_t i = 0; i < a.trials.size(); ++i) check_same(a.trials[i], b.trials[i]);
}
