#include "v2x/comm_model.hpp"

#include "v2x/special_math.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace v2x {

std::string_view to_string(Vehicle v) {
    switch (v) {
        case Vehicle::LV: return "LV";
        case Vehicle::TV: return "TV";
        case Vehicle::FV: return "FV";
    }
    return "?";
}

void ChannelParams::validate() const {
    if (!(beta > 0.0 && beta <= 1.0)) throw std::invalid_argument("channel.beta must be in (0, 1]");
    if (!(mu_sq > 0.0) || !std::isfinite(mu_sq)) throw std::invalid_argument("channel.mu_sq must be > 0");
    if (!(sigma_sq > 0.0) || !std::isfinite(sigma_sq)) throw std::invalid_argument("channel.sigma_sq must be > 0");
    if (!(rate > 0.0) || !std::isfinite(rate)) throw std::invalid_argument("channel.rate must be > 0");
    if (!(tau0 >= 0.0) || !std::isfinite(tau0)) throw std::invalid_argument("channel.tau0 must be >= 0");
    if (!(t_comp >= 0.0) || !std::isfinite(t_comp)) throw std::invalid_argument("channel.t_comp must be >= 0");
}

double ChannelParams::zeta() const { return std::sqrt(0.5 * (1.0 - beta)); }

double ChannelParams::threshold_scale() const { return std::expm1(rate * std::log(2.0)) * sigma_sq / mu_sq; }

double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

double watts_to_dbm(double watts) { return 10.0 * std::log10(watts) + 30.0; }

double noise_power_watts(double density_dbm_per_hz, double bandwidth_hz) {
    if (!(bandwidth_hz > 0.0)) throw std::invalid_argument("bandwidth must be > 0");
    return dbm_to_watts(density_dbm_per_hz) * bandwidth_hz;
}

CsiEstimate sample_csi(const ChannelParams& params, std::uint64_t rng_seed) {
    params.validate();
    std::mt19937_64 rng(rng_seed);
    std::normal_distribution<double> component(0.0, std::sqrt(0.5));
    const double re = component(rng);
    const double im = component(rng);
    return {re * re + im * im};
}

double outage_probability(const ChannelParams& params, const CsiEstimate& csi, double power) {
    if (!(power >= 0.0)) throw std::invalid_argument("outage_probability: power must be >= 0");
    if (power == 0.0) return 1.0;
    const double x = params.threshold_scale() / power;
    return special::noncentral_chi2_cdf(x, params.beta, csi.h_hat_sq);
}

double mean_outage_probability(const ChannelParams& params, double power) {
    if (!(power >= 0.0)) throw std::invalid_argument("mean_outage_probability: power must be >= 0");
    if (power == 0.0) return 1.0;
    return -std::expm1(-params.threshold_scale() / power);
}

double gain_for_mean_outage(const ChannelParams& params, double power, double target) {
    if (!(target > 0.0 && target < 1.0)) throw std::invalid_argument("target outage must be in (0, 1)");
    if (!(power > 0.0)) throw std::invalid_argument("power must be > 0");
    const double snr_threshold = std::expm1(params.rate * std::log(2.0)) * params.sigma_sq;
    return snr_threshold / (power * -std::log1p(-target));
}

namespace {

double margin_factor(double m_d) {
    if (!(m_d > 0.0)) throw std::domain_error("regularizer pole: m_d must be > 0");
    return 1.0 / -std::expm1(-m_d);
}

}  // namespace

double regularized_outage(const ChannelParams& params, const CsiEstimate& csi, double power,
                          double m_d, double rho) {
    const double factor = margin_factor(m_d);
    return rho * outage_probability(params, csi, power) * factor;
}

double outage_power_gradient(const ChannelParams& params, const CsiEstimate& csi, double power,
                             double m_d, double rho) {
    const double factor = margin_factor(m_d);
    if (!(power >= 0.0)) throw std::invalid_argument("outage_power_gradient: power must be >= 0");
    if (power == 0.0 || std::isinf(power)) return 0.0;
    const double scale = params.threshold_scale();
    const double x = scale / power;
    const double density = special::noncentral_chi2_pdf(x, params.beta, csi.h_hat_sq);
    return -rho * factor * density * scale / (power * power);
}

double delay_from_outage(const ChannelParams& params, double p_out) {
    if (!(p_out >= 0.0 && p_out <= 1.0)) throw std::invalid_argument("p_out must be in [0, 1]");
    return params.tau0 * p_out;
}

double position_error_bound(const ChannelParams& params, double p_out, double ego_speed) {
    if (!(ego_speed >= 0.0)) throw std::invalid_argument("ego speed must be >= 0");
    return ego_speed * (delay_from_outage(params, p_out) + params.t_comp);
}

double sample_position_error(const ChannelParams& params, double p_out, double ego_speed,
                             std::uint64_t rng_seed) {
    const double bound = position_error_bound(params, p_out, ego_speed);
    if (bound == 0.0) return 0.0;
    std::mt19937_64 rng(rng_seed);
    std::uniform_real_distribution<double> u(-bound, bound);
    return u(rng);
}

}  // namespace v2x
