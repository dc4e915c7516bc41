#pragma once

// Uplink model between the surrounding vehicles and the edge server:
// imperfect-CSI outage probability, its power gradient, the linear
// outage-to-delay map and the resulting position error.

#include <array>
#include <cstdint>
#include <string_view>

namespace v2x {

enum class Vehicle { LV = 0, TV = 1, FV = 2 };

inline constexpr std::array<Vehicle, 3> kSurrounding = {Vehicle::LV, Vehicle::TV, Vehicle::FV};

std::string_view to_string(Vehicle v);

struct LinkId {
    Vehicle vehicle = Vehicle::LV;
    int slot = 1;  // 1-based slot within the horizon
};

struct ChannelParams {
    double beta = 0.3;          // feedback accuracy, (0, 1]
    double mu_sq = 3.5;         // large-scale power gain
    double sigma_sq = 2.5118864315095823e-6;  // noise power [W], -96 dBm/Hz over 10 MHz
    double rate = 2.0;          // required spectral efficiency [bps/Hz]
    double tau0 = 0.05;         // time per upload round [s]
    double t_comp = 0.01;       // computation delay [s]

    /// Throws std::invalid_argument when an invariant does not hold.
    void validate() const;

    /// sqrt((1 - beta) / 2)
    double zeta() const;

    /// (2^R - 1) sigma^2 / mu^2: the CDF argument is this over the power.
    double threshold_scale() const;
};

struct CsiEstimate {
    double h_hat_sq = 1.0;
};

double dbm_to_watts(double dbm);
double watts_to_dbm(double watts);

/// Noise power in watts for a density in dBm/Hz over a bandwidth in Hz.
double noise_power_watts(double density_dbm_per_hz, double bandwidth_hz);

/// |h_hat|^2 with h_hat ~ CN(0, 1); a pure function of the seed.
CsiEstimate sample_csi(const ChannelParams& params, std::uint64_t rng_seed);

/// Pr{log2(1 + P |h|^2 / sigma^2) < R | h_hat}. Exactly 1 at zero power.
double outage_probability(const ChannelParams& params, const CsiEstimate& csi, double power);

/// Outage averaged over h_hat, i.e. with respect to the Rayleigh marginal of h.
double mean_outage_probability(const ChannelParams& params, double power);

/// Large-scale gain at which mean_outage_probability(power) equals target.
double gain_for_mean_outage(const ChannelParams& params, double power, double target);

/// rho * p_out / (1 - exp(-m_d)). Throws std::domain_error for m_d <= 0.
double regularized_outage(const ChannelParams& params, const CsiEstimate& csi, double power,
                          double m_d, double rho);

/// d/dP of regularized_outage. Non-positive; zero in the P -> 0 and P -> inf
/// limits and for beta == 1. Throws std::domain_error for m_d <= 0.
double outage_power_gradient(const ChannelParams& params, const CsiEstimate& csi, double power,
                             double m_d, double rho);

/// tau = tau0 * p_out [s]
double delay_from_outage(const ChannelParams& params, double p_out);

/// Half-width of the position error support, v (tau0 p_out + t_comp) [m].
double position_error_bound(const ChannelParams& params, double p_out, double ego_speed);

/// Uniform draw on [-bound, bound]; exactly 0 when the bound is 0.
double sample_position_error(const ChannelParams& params, double p_out, double ego_speed,
                             std::uint64_t rng_seed);

}  // namespace v2x
