#pragma once

// Independent reference computations for the tests and the acceptance suite.
// Nothing here calls into the library's special functions.

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

namespace oracle {

// Hand-rolled generator for property tests.
struct Gen {
    std::mt19937_64 rng;
    explicit Gen(std::uint64_t seed) : rng(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
    double log_uniform(double lo, double hi) { return std::exp(uniform(std::log(lo), std::log(hi))); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
};

inline double integrate(auto f, double a, double b) {
    using boost::math::quadrature::gauss_kronrod;
    return gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-15);
}

// sum (x/2)^{2m} / (m!)^2
inline double i0_series(double x, int terms = 60) {
    double term = 1.0, sum = 1.0;
    const double q = x * x / 4.0;
    for (int m = 1; m < terms; ++m) {
        term *= q / (static_cast<double>(m) * m);
        sum += term;
    }
    return sum;
}

// (1/pi) int_0^pi exp(x cos t) dt
inline double i0_quadrature(double x) {
    return integrate([x](double t) { return std::exp(x * std::cos(t)); }, 0.0, std::numbers::pi) / std::numbers::pi;
}

// int_b^inf x exp(-(x^2 + a^2)/2) I0(a x) dx, with I0 from the standard library
inline double marcum_q1(double a, double b) {
    auto f = [a](double x) {
        if (a * x > 600.0) {
            // I0(z) ~ e^z / sqrt(2 pi z) keeps the product finite
            const double z = a * x;
            return x * std::exp(-(x - a) * (x - a) / 2.0) / std::sqrt(2.0 * std::numbers::pi * z) *
                   (1.0 + 1.0 / (8.0 * z) + 9.0 / (128.0 * z * z));
        }
        return x * std::exp(-(x * x + a * a) / 2.0) * std::cyl_bessel_i(0.0, a * x);
    };
    const double upper = std::max(a, b) + 40.0;
    if (b >= upper) return 0.0;
    // split at the peak so the adaptive rule sees it
    const double peak = std::max(a, 1.0);
    if (b < peak) return integrate(f, b, peak) + integrate(f, peak, upper);
    return integrate(f, b, upper);
}

// P(|sqrt(beta) h + sqrt(1 - beta) e|^2 <= x) by sampling e ~ CN(0, 1)
inline double chi2_cdf_monte_carlo(double x, double beta, double h_hat_sq, long samples, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, std::sqrt(0.5));
    const std::complex<double> mean(std::sqrt(beta * h_hat_sq), 0.0);
    const double s = std::sqrt(1.0 - beta);
    long hits = 0;
    for (long i = 0; i < samples; ++i) {
        const std::complex<double> e(n(rng), n(rng));
        if (std::norm(mean + s * e) <= x) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(samples);
}

// argmin ||P - raw||^2 over {P >= 0, sum P <= budget} by enumerating active sets
inline std::vector<double> projection_qp(const std::vector<double>& raw, double budget) {
    const auto n = raw.size();
    std::vector<double> best;
    double best_dist = std::numeric_limits<double>::infinity();
    for (unsigned mask = 0; mask < (1u << n); ++mask) {  // bit set: P_i = 0
        for (int budget_active = 0; budget_active < 2; ++budget_active) {
            std::vector<double> p(n, 0.0);
            double free_sum = 0.0;
            int free = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (!(mask >> i & 1u)) {
                    free_sum += raw[i];
                    ++free;
                }
            }
            if (budget_active && free == 0) continue;
            const double shift = budget_active ? (free_sum - budget) / free : 0.0;
            bool feasible = true;
            double total = 0.0, dist = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (!(mask >> i & 1u)) p[i] = raw[i] - shift;
                if (p[i] < -1e-15) feasible = false;
                total += p[i];
                dist += (p[i] - raw[i]) * (p[i] - raw[i]);
            }
            if (total > budget + 1e-12) feasible = false;
            if (feasible && dist < best_dist) {
                best_dist = dist;
                best = p;
            }
        }
    }
    return best;
}

}  // namespace oracle
