#include "v2x/bcd_solver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace v2x {

std::vector<double> project_budget(std::span<const double> raw, double budget, double bisection_tol) {
    if (!(budget >= 0.0) || !std::isfinite(budget)) throw std::invalid_argument("budget must be finite and >= 0");
    for (double r : raw) {
        if (!std::isfinite(r)) throw std::invalid_argument("project_budget: non-finite input");
    }
    std::vector<double> out(raw.size());
    double clipped_sum = 0.0;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        out[i] = std::max(raw[i], 0.0);
        clipped_sum += out[i];
    }
    if (clipped_sum <= budget) return out;

    // sum max(raw - tau, 0) = budget, decreasing in tau
    auto mass = [&](double tau) {
        double s = 0.0;
        for (double r : raw) s += std::max(r - tau, 0.0);
        return s;
    };
    double lo = 0.0;
    double hi = *std::max_element(raw.begin(), raw.end());
    while (hi - lo > bisection_tol * std::max(1.0, std::fabs(hi))) {
        const double mid = 0.5 * (lo + hi);
        if (mass(mid) > budget) {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    // exact shift on the detected active set
    double tau = 0.5 * (lo + hi);
    double active_sum = 0.0;
    int active = 0;
    for (double r : raw) {
        if (r > tau) {
            active_sum += r;
            ++active;
        }
    }
    if (active > 0) tau = (active_sum - budget) / active;
    for (std::size_t i = 0; i < raw.size(); ++i) out[i] = std::max(raw[i] - tau, 0.0);
    return out;
}

double power_objective(const ChannelParams& channel, std::span<const CsiEstimate> csi, std::span<const double> rho,
                       std::span<const double> powers, double m_d) {
    if (csi.size() != powers.size() || rho.size() != powers.size()) {
        throw std::invalid_argument("power_objective: csi, rho and powers differ in length");
    }
    double f = 0.0;
    for (std::size_t k = 0; k < powers.size(); ++k) {
        f += regularized_outage(channel, csi[k], powers[k], m_d, rho[k]);
    }
    return f;
}

namespace {

std::vector<double> power_gradient(const ChannelParams& channel, std::span<const CsiEstimate> csi,
                                   std::span<const double> rho, std::span<const double> powers, double m_d) {
    std::vector<double> g(powers.size());
    for (std::size_t k = 0; k < powers.size(); ++k) {
        g[k] = outage_power_gradient(channel, csi[k], powers[k], m_d, rho[k]);
    }
    return g;
}

double inf_norm(const std::vector<double>& v) {
    double n = 0.0;
    for (double x : v) n = std::max(n, std::fabs(x));
    return n;
}

std::vector<double> gradient_step(std::span<const double> p, const std::vector<double>& g, double alpha) {
    std::vector<double> out(p.size());
    for (std::size_t k = 0; k < p.size(); ++k) out[k] = p[k] - alpha * g[k];
    return out;
}

}  // namespace

PowerBlockResult solve_q1_single(const ChannelParams& channel, std::span<const CsiEstimate> csi,
                                 std::span<const double> rho, double m_d, double budget,
                                 std::span<const double> initial, const SolverConfig& config) {
    channel.validate();
    config.validate();
    if (!(m_d > 0.0)) throw std::domain_error("power block needs m_d > 0");
    if (csi.size() != initial.size() || rho.size() != initial.size()) {
        throw std::invalid_argument("solve_q1_single: csi, rho and initial powers differ in length");
    }

    PowerBlockResult result;
    result.powers = project_budget(initial, budget, config.bisection_tol);
    double f = power_objective(channel, csi, rho, result.powers, m_d);
    result.objective_trace.push_back(f);
    if (budget == 0.0 || result.powers.empty()) return result;

    for (int it = 0; it < config.pg_max_iter; ++it) {
        const auto g = power_gradient(channel, csi, rho, result.powers, m_d);
        const double gmax = inf_norm(g);
        if (gmax == 0.0) {
            result.stationarity = 0.0;
            break;
        }
        const double alpha0 = config.armijo_initial * budget / gmax;

        auto residual = [&](double alpha) {
            const auto trial = project_budget(gradient_step(result.powers, g, alpha), budget, config.bisection_tol);
            double r = 0.0;
            for (std::size_t k = 0; k < trial.size(); ++k) r = std::max(r, std::fabs(trial[k] - result.powers[k]));
            return std::pair{trial, r};
        };

        auto [candidate, step_norm] = residual(alpha0);
        result.stationarity = step_norm / budget;
        if (result.stationarity <= config.pg_tol) break;

        double alpha = alpha0;
        bool accepted = false;
        for (int bt = 0; bt <= config.armijo_max_backtracks; ++bt) {
            if (bt > 0) {
                alpha *= config.armijo_shrink;
                candidate = residual(alpha).first;
            }
            double decrease = 0.0;
            for (std::size_t k = 0; k < candidate.size(); ++k) decrease += g[k] * (candidate[k] - result.powers[k]);
            const double f_new = power_objective(channel, csi, rho, candidate, m_d);
            if (f_new <= f + config.armijo_sigma * decrease) {
                accepted = decrease < 0.0 || f_new < f;
                if (accepted) {
                    result.powers = std::move(candidate);
                    f = f_new;
                }
                break;
            }
        }
        if (!accepted) break;
        result.objective_trace.push_back(f);
        ++result.iterations;
    }
    return result;
}

}  // namespace v2x
