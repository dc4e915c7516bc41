#pragma once

// Special functions behind the conditional outage model: the zero-order
// modified Bessel function, the first-order Marcum Q-function and the CDF of a
// two-degree-of-freedom noncentral chi-square variable.

namespace v2x::special {

struct MarcumArgs {
    double a = 0.0;  // noncentrality argument
    double b = 0.0;  // threshold argument
};

/// I0(x). Throws std::overflow_error when the result is not representable
/// (|x| above roughly 713).
double bessel_i0(double x);

/// exp(-|x|) * I0(x), finite for every finite x.
double bessel_i0_scaled(double x);

/// First-order Marcum Q-function Q1(a, b), the upper tail.
///
/// Evaluated as a Poisson(a^2/2) mixture of regularized upper incomplete gamma
/// functions Q(k+1, b^2/2); the mixture is truncated once the remaining Poisson
/// mass drops below 1e-14. Throws std::invalid_argument for negative or
/// non-finite arguments.
double marcum_q1(MarcumArgs args);

/// 1 - Q1(a, b), computed directly from the lower gamma tails so that small
/// values keep their relative precision.
double marcum_p1(MarcumArgs args);

/// P(|sqrt(beta) h + sqrt(1-beta) e|^2 <= x) for a known h with |h|^2 = h_hat_sq
/// and e ~ CN(0,1). beta == 1 is the deterministic limit 1{x > h_hat_sq}.
double noncentral_chi2_cdf(double x, double beta, double h_hat_sq);

/// d/dx of noncentral_chi2_cdf. Zero for beta == 1 away from the jump.
double noncentral_chi2_pdf(double x, double beta, double h_hat_sq);

}  // namespace v2x::special
