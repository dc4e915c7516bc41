#include "v2x/special_math.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace v2x::special {

namespace {

// Below this the power series is used, above it the large-argument expansion.
constexpr double kSeriesLimit = 30.0;
constexpr double kPoissonTail = 1e-14;

// sum_m ((x/2)^2)^m / (m!)^2, all terms positive
double i0_series_sum(double x) {
    const double q = 0.25 * x * x;
    double term = 1.0;
    double sum = 1.0;
    for (int m = 1; m < 1000; ++m) {
        term *= q / (static_cast<double>(m) * m);
        sum += term;
        if (term < 1e-17 * sum) break;
    }
    return sum;
}

// sqrt(2 pi x) e^{-x} I0(x) ~ sum_k ((2k-1)!!)^2 / (k! 8^k x^k)
double i0_asymptotic_sum(double x) {
    double term = 1.0;
    double sum = 1.0;
    for (int k = 1; k < 200; ++k) {
        const double ratio = (2.0 * k - 1.0) * (2.0 * k - 1.0) / (8.0 * k * x);
        if (ratio >= 1.0) break;  // smallest term reached
        term *= ratio;
        sum += term;
        if (term < 1e-17 * sum) break;
    }
    return sum;
}

void check_marcum_args(const MarcumArgs& args) {
    if (!std::isfinite(args.a) || !std::isfinite(args.b) || args.a < 0.0 || args.b < 0.0) {
        throw std::invalid_argument("marcum_q1: arguments must be finite and non-negative");
    }
}

struct MarcumTails {
    double upper = 0.0;
    double lower = 0.0;
};

// Poisson(lambda) mixture of gamma tails Q(k+1, y) and P(k+1, y).
MarcumTails marcum_tails(double a, double b) {
    const double lambda = 0.5 * a * a;
    const double y = 0.5 * b * b;

    if (y == 0.0) return {1.0, 0.0};
    if (lambda == 0.0) return {std::exp(-y), -std::expm1(-y)};

    // last mixture index: beyond the mode the tail mass after k is bounded by
    // w_k (k+1)/(k+1-lambda)
    const double log_lambda = std::log(lambda);
    auto log_weight = [&](int k) {
        return -lambda + k * log_lambda - std::lgamma(static_cast<double>(k) + 1.0);
    };
    int k_max = static_cast<int>(std::floor(lambda)) + 1;
    while (true) {
        const double w = std::exp(log_weight(k_max));
        const double bound = w * (k_max + 1.0) / (k_max + 1.0 - lambda);
        if (bound < kPoissonTail) break;
        ++k_max;
    }

    // g_k = e^{-y} y^k / k!
    const double log_y = std::log(y);
    const bool direct = y < 700.0;
    auto gamma_term = [&](int k, double previous) {
        if (direct) return k == 0 ? std::exp(-y) : previous * y / k;
        return std::exp(-y + k * log_y - std::lgamma(static_cast<double>(k) + 1.0));
    };

    std::vector<double> g(static_cast<std::size_t>(k_max) + 1);
    double previous = 0.0;
    for (int k = 0; k <= k_max; ++k) {
        previous = gamma_term(k, previous);
        g[static_cast<std::size_t>(k)] = previous;
    }

    MarcumTails tails;

    // Q(k+1, y) = sum_{j<=k} g_j, accumulated upwards
    double q_gamma = 0.0;
    for (int k = 0; k <= k_max; ++k) {
        q_gamma += g[static_cast<std::size_t>(k)];
        tails.upper += std::exp(log_weight(k)) * std::min(q_gamma, 1.0);
    }

    // P(k+1, y) = P(k+2, y) + g_{k+1}, accumulated downwards from the top
    double p_gamma = boost::math::gamma_p(static_cast<double>(k_max) + 1.0, y);
    for (int k = k_max; k >= 0; --k) {
        tails.lower += std::exp(log_weight(k)) * std::min(p_gamma, 1.0);
        p_gamma += g[static_cast<std::size_t>(k)];
    }

    tails.upper = std::clamp(tails.upper, 0.0, 1.0);
    tails.lower = std::clamp(tails.lower, 0.0, 1.0);
    // the smaller tail carries full relative precision; derive the other from it
    if (tails.upper < tails.lower) {
        tails.lower = 1.0 - tails.upper;
    } else {
        tails.upper = 1.0 - tails.lower;
    }
    return tails;
}

}  // namespace

double bessel_i0_scaled(double x) {
    if (!std::isfinite(x)) throw std::invalid_argument("bessel_i0_scaled: non-finite argument");
    x = std::fabs(x);
    if (x <= kSeriesLimit) return std::exp(-x) * i0_series_sum(x);
    return i0_asymptotic_sum(x) / std::sqrt(2.0 * std::numbers::pi * x);
}

double bessel_i0(double x) {
    if (!std::isfinite(x)) throw std::invalid_argument("bessel_i0: non-finite argument");
    x = std::fabs(x);
    if (x <= kSeriesLimit) return i0_series_sum(x);
    const double value = std::exp(x - 0.5 * std::log(2.0 * std::numbers::pi * x)) * i0_asymptotic_sum(x);
    if (!std::isfinite(value)) throw std::overflow_error("bessel_i0: result overflows double");
    return value;
}

double marcum_q1(MarcumArgs args) {
    check_marcum_args(args);
    return marcum_tails(args.a, args.b).upper;
}

double marcum_p1(MarcumArgs args) {
    check_marcum_args(args);
    return marcum_tails(args.a, args.b).lower;
}

namespace {

void check_chi2_args(double x, double beta, double h_hat_sq) {
    if (!(x >= 0.0) || std::isnan(x)) throw std::invalid_argument("noncentral_chi2: x must be >= 0");
    if (!(beta > 0.0 && beta <= 1.0)) throw std::invalid_argument("noncentral_chi2: beta must be in (0, 1]");
    if (!(h_hat_sq >= 0.0) || !std::isfinite(h_hat_sq)) {
        throw std::invalid_argument("noncentral_chi2: h_hat_sq must be finite and >= 0");
    }
}

}  // namespace

double noncentral_chi2_cdf(double x, double beta, double h_hat_sq) {
    check_chi2_args(x, beta, h_hat_sq);
    if (beta == 1.0) return x > h_hat_sq ? 1.0 : 0.0;
    if (std::isinf(x)) return 1.0;
    const double zeta_sq = 0.5 * (1.0 - beta);
    return marcum_p1({std::sqrt(beta * h_hat_sq / zeta_sq), std::sqrt(x / zeta_sq)});
}

double noncentral_chi2_pdf(double x, double beta, double h_hat_sq) {
    check_chi2_args(x, beta, h_hat_sq);
    if (beta == 1.0 || std::isinf(x)) return 0.0;
    const double zeta_sq = 0.5 * (1.0 - beta);
    const double mean_amp = std::sqrt(beta * h_hat_sq);
    const double amp = std::sqrt(x);
    const double z = mean_amp * amp / zeta_sq;
    const double gap = mean_amp - amp;
    return bessel_i0_scaled(z) * std::exp(-gap * gap / (2.0 * zeta_sq)) / (2.0 * zeta_sq);
}

}  // namespace v2x::special
