#include "oracles.hpp"

#include "v2x/vehicle_model.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace v2x;

namespace {

constexpr double kPi = std::numbers::pi;

PlanningProblem toy_problem(int horizon) {
    PlanningProblem p;
    p.horizon = horizon;
    p.dt = 1.0;
    p.initial_state = {0.0, 0.0, 0.0};
    p.prev_control = {1.0, 0.0};
    for (int k = 1; k <= horizon; ++k) {
        p.targets.emplace_back(k * 1.0, 0.0);
        p.rho.push_back(1.0);
        p.lanes.push_back(Lane::Ego);
        p.neighbors.push_back({100.0, 100.0, -100.0});
    }
    return p;
}

Trajectory random_trajectory(oracle::Gen& gen, int horizon) {
    std::vector<ControlInput> controls;
    for (int k = 0; k < horizon; ++k) controls.push_back({gen.uniform(0.0, 10.0), gen.uniform(-1.0, 1.0)});
    return rollout({gen.uniform(-50, 50), gen.uniform(-5, 5), gen.uniform(0.0, 2 * kPi)}, controls, 1.0);
}

}  // namespace

TEST_CASE("angle helpers") {
    CHECK(normalize_angle(-0.5) == doctest::Approx(2 * kPi - 0.5));
    CHECK(normalize_angle(2 * kPi) == doctest::Approx(0.0));
    CHECK(wrap_to_pi(3 * kPi / 2) == doctest::Approx(-kPi / 2));
    CHECK(wrap_to_pi(-kPi) == doctest::Approx(kPi));
}

TEST_CASE("step_dynamics examples") {
    auto s = step_dynamics({0, 0, 0}, {1, 0}, 1.0);
    CHECK(s.x == doctest::Approx(1.0));
    CHECK(s.y == doctest::Approx(0.0));
    CHECK(s.theta == doctest::Approx(0.0));

    s = step_dynamics({0, 0, 0}, {0, 1}, 1.0);
    CHECK(s.x == doctest::Approx(0.0));
    CHECK(s.y == doctest::Approx(0.0));
    CHECK(s.theta == doctest::Approx(1.0));

    s = step_dynamics({0, 0, kPi / 2}, {2, 0}, 0.5);
    CHECK(s.x == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(s.y == doctest::Approx(1.0));
    CHECK(s.theta == doctest::Approx(kPi / 2));
}

TEST_CASE("step_dynamics keeps states finite and headings normalized") {
    oracle::Gen gen(31);
    for (int i = 0; i < 2000; ++i) {
        const VehicleState s0{gen.uniform(-1e3, 1e3), gen.uniform(-1e3, 1e3), gen.uniform(-20.0, 20.0)};
        const auto s = step_dynamics(s0, {gen.uniform(-30, 30), gen.uniform(-10, 10)}, gen.uniform(0.01, 2.0));
        CHECK(std::isfinite(s.x));
        CHECK(std::isfinite(s.y));
        CHECK(s.theta >= 0.0);
        CHECK(s.theta < 2 * kPi);
    }
}

TEST_CASE("linearization at zero heading is the small-angle form") {
    Trajectory ref = rollout({0, 0, 0}, {{3.0, 0.0}}, 1.0);
    const auto lin = linearize_dynamics(ref, 1.0);
    REQUIRE(lin.size() == 1);
    const double theta = 0.2, v = 3.5;
    CHECK(lin[0].dy(v, theta) == doctest::Approx(3.0 * theta - 3.0 * 0.0));
    CHECK(lin[0].dx(v, theta) == doctest::Approx(v));
}

TEST_CASE("linearization is exact at its expansion point") {
    oracle::Gen gen(32);
    for (int i = 0; i < 200; ++i) {
        const auto ref = random_trajectory(gen, 6);
        const auto lin = linearize_dynamics(ref, 1.0);
        const auto headings = unwrapped_headings(ref);
        for (std::size_t k = 0; k < lin.size(); ++k) {
            const double v = ref.controls[k].v;
            const double dx = ref.states[k + 1].x - ref.states[k].x;
            const double dy = ref.states[k + 1].y - ref.states[k].y;
            CHECK(lin[k].dx(v, headings[k + 1]) == doctest::Approx(dx).scale(1e-12));
            CHECK(lin[k].dy(v, headings[k + 1]) == doctest::Approx(dy).scale(1e-12));
        }
    }
}

TEST_CASE("unwrapped headings are continuous") {
    const auto traj = rollout({0, 0, 0.1}, {{1, -0.5}, {1, -0.5}, {1, 0.5}}, 1.0);
    const auto h = unwrapped_headings(traj);
    CHECK(h[0] == doctest::Approx(0.1));
    CHECK(h[1] == doctest::Approx(-0.4));
    CHECK(h[2] == doctest::Approx(-0.9));
    CHECK(h[3] == doctest::Approx(-0.4));
}

TEST_CASE("tracking cost examples") {
    auto p = toy_problem(3);
    p.prev_control = {1.0, 0.0};
    const auto on_target = rollout(p.initial_state, {{1, 0}, {1, 0}, {1, 0}}, 1.0);
    CHECK(tracking_cost(p, on_target) == doctest::Approx(0.0));

    auto one = toy_problem(1);
    one.targets[0] = {0.0, 0.0};
    one.prev_control = {0.0, 0.0};
    Trajectory t;
    t.states = {{0, 0, 0}, {1, 0, 0}};
    t.controls = {{0.0, 2.0}};
    CHECK(tracking_cost(one, t) == doctest::Approx(5.0));

    CHECK_THROWS_AS(tracking_cost(p, t), std::invalid_argument);
}

TEST_CASE("tracking cost is positive definite") {
    oracle::Gen gen(33);
    auto p = toy_problem(6);
    for (int i = 0; i < 500; ++i) {
        p.w_track = Eigen::Vector2d(gen.uniform(0.1, 5), gen.uniform(0.1, 5)).asDiagonal();
        p.w_control = Eigen::Vector2d(gen.uniform(0.1, 5), gen.uniform(0.1, 5)).asDiagonal();
        const auto t = random_trajectory(gen, 6);
        CHECK(tracking_cost(p, t) > 0.0);
    }
}

TEST_CASE("safety constraint for an ego-lane slot") {
    auto p = toy_problem(1);
    p.neighbors[0].lv = 30.0;
    const auto c = safety_constraints(p, 0.0);
    REQUIRE(c.size() == 1);
    CHECK(c[0].vehicle == Vehicle::LV);
    CHECK(c[0].bound == Bound::Upper);
    CHECK(c[0].limit == doctest::Approx(21.3));
    CHECK(c[0].satisfied(21.3));
    CHECK_FALSE(c[0].satisfied(21.31));
}

TEST_CASE("target-lane slots emit two constraints") {
    auto p = toy_problem(1);
    p.lanes[0] = Lane::Target;
    p.neighbors[0] = {0.0, 60.0, 10.0};
    const auto c = safety_constraints(p, 0.5);
    REQUIRE(c.size() == 2);
    CHECK(c[0].vehicle == Vehicle::TV);
    CHECK(c[0].limit == doctest::Approx(60.0 - 9.2));
    CHECK(c[1].vehicle == Vehicle::FV);
    CHECK(c[1].bound == Bound::Lower);
    CHECK(c[1].limit == doctest::Approx(10.0 + 9.2));
}

TEST_CASE("constraint count follows the lane schedule") {
    oracle::Gen gen(34);
    for (int i = 0; i < 200; ++i) {
        const int k = gen.integer(1, 8);
        auto p = toy_problem(k);
        int el = 0, tl = 0;
        for (auto& lane : p.lanes) {
            lane = gen.integer(0, 1) ? Lane::Target : Lane::Ego;
            (lane == Lane::Ego ? el : tl)++;
        }
        CHECK(safety_constraints(p, gen.uniform(0, 2)).size() == static_cast<std::size_t>(el + 2 * tl));
    }
}

TEST_CASE("lane schedule switches once at the boundary") {
    const std::vector<Eigen::Vector2d> targets{{1, 1.85}, {2, 1.85}, {3, 5.55}, {4, 1.0}};
    const auto lanes = lane_schedule_from_targets(targets, 3.72);
    CHECK(lanes == std::vector<Lane>{Lane::Ego, Lane::Ego, Lane::Target, Lane::Target});
}

TEST_CASE("collision detection at the threshold") {
    const double d = 8.7;
    std::vector<VehicleState> ego;
    std::vector<NeighborPositions> truth;
    for (int k = 0; k <= 5; ++k) {
        ego.push_back({10.0 * k, 1.85, 0.0});
        truth.push_back({10.0 * k + d, 1000.0, -1000.0});
    }
    CHECK_FALSE(detect_collision(ego, truth, 3.72, d).collision);

    truth[3].lv = ego[3].x + d - 0.01;
    const auto hit = detect_collision(ego, truth, 3.72, d);
    CHECK(hit.collision);
    CHECK(hit.slot == 3);
    CHECK(hit.vehicle == Vehicle::LV);
}

TEST_CASE("collisions in the target lane are checked against TV and FV") {
    std::vector<VehicleState> ego{{0, 1.85, 0}, {20, 5.55, 0}};
    std::vector<NeighborPositions> truth{{0, 0, 0}, {20.5, 100.0, 15.0}};
    const auto hit = detect_collision(ego, truth, 3.72, 8.7);
    CHECK(hit.collision);
    CHECK(hit.vehicle == Vehicle::FV);
}

TEST_CASE("straight-line reference passes through the targets") {
    auto p = toy_problem(4);
    p.targets = {{2, 0.5}, {4, 1.5}, {6, 1.5}, {8, 1.5}};
    const auto ref = straight_line_reference(p);
    REQUIRE(ref.states.size() == 5);
    for (int k = 1; k <= 4; ++k) {
        CHECK(ref.states[k].x == doctest::Approx(p.targets[k - 1].x()));
        CHECK(ref.states[k].y == doctest::Approx(p.targets[k - 1].y()));
    }
}

TEST_CASE("problem validation") {
    auto p = toy_problem(3);
    CHECK_NOTHROW(p.validate());
    p.rho.pop_back();
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}
