#pragma once

// Small problems with brute-force reference solutions.

#include "v2x/bcd_solver.hpp"

#include <cmath>
#include <utility>
#include <vector>

namespace toy {

using namespace v2x;

// Two slots straight ahead behind a close leading vehicle. With zero lateral
// targets and heading the optimal yaw rates are zero.
inline PlanningProblem two_slot_toy() {
    PlanningProblem p;
    p.horizon = 2;
    p.dt = 1.0;
    p.initial_state = {0.0, 0.0, 0.0};
    p.prev_control = {1.0, 0.0};
    p.targets = {{1.5, 0.0}, {3.0, 0.0}};
    p.rho = {1.0, 1.0};
    p.lanes = {Lane::Ego, Lane::Ego};
    p.neighbors = {{9.5, 100.0, -100.0}, {10.0, 100.0, -100.0}};
    return p;
}

// objective of the toy in (v1, v2, m); infinity outside the feasible set
inline double toy_objective(double v1, double v2, double m, double eta) {
    if (v1 < 0.0 || v2 < 0.0 || m <= 0.0) return INFINITY;
    const double x1 = v1, x2 = v1 + v2;
    if (x1 > 9.5 - 8.7 - m || x2 > 10.0 - 8.7 - m) return INFINITY;
    return (x1 - 1.5) * (x1 - 1.5) + (x2 - 3.0) * (x2 - 3.0) + (v1 - 1.0) * (v1 - 1.0) + (v2 - v1) * (v2 - v1) +
           eta / (1.0 - std::exp(-m));
}

struct GridPoint {
    double v1, v2, m, f;
};

// coarse-to-fine grid search, final resolution 1e-3
inline GridPoint toy_grid_search(double eta) {
    GridPoint best{0, 0, 0, INFINITY};
    double lo[3] = {0.0, 0.0, 0.0}, hi[3] = {3.0, 3.0, 1.5};
    for (double step : {0.05, 0.005, 0.001}) {
        GridPoint level{0, 0, 0, INFINITY};
        for (double a = lo[0]; a <= hi[0] + 1e-12; a += step) {
            for (double b = lo[1]; b <= hi[1] + 1e-12; b += step) {
                for (double c = std::max(lo[2], step); c <= hi[2] + 1e-12; c += step) {
                    const double f = toy_objective(a, b, c, eta);
                    if (f < level.f) level = {a, b, c, f};
                }
            }
        }
        best = level;
        const double span = 4 * step;
        lo[0] = std::max(0.0, best.v1 - span);
        hi[0] = best.v1 + span;
        lo[1] = std::max(0.0, best.v2 - span);
        hi[1] = best.v2 + span;
        lo[2] = std::max(0.0, best.m - span);
        hi[2] = best.m + span;
    }
    return best;
}


// Three-slot power split on the budget face at 1e-3 resolution. The
// objective falls with every power, so the budget binds at the optimum.
inline std::pair<std::vector<double>, double> simplex_grid_search(const ChannelParams& ch,
                                                                  const std::vector<CsiEstimate>& csi,
                                                                  const std::vector<double>& rho, double m_d,
                                                                  double budget) {
    std::vector<double> best;
    double best_f = INFINITY;
    for (int i = 0; i <= 1000; ++i) {
        for (int j = 0; i + j <= 1000; ++j) {
            const std::vector<double> p{i * 1e-3 * budget, j * 1e-3 * budget, (1000 - i - j) * 1e-3 * budget};
            const double f = power_objective(ch, csi, rho, p, m_d);
            if (f < best_f) {
                best_f = f;
                best = p;
            }
        }
    }
    return {best, best_f};
}

}  // namespace toy
