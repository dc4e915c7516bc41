#include "oracles.hpp"

#include "v2x/comm_model.hpp"
#include "v2x/special_math.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace v2x;

namespace {

ChannelParams random_channel(oracle::Gen& gen) {
    ChannelParams p;
    p.beta = gen.uniform(0.05, 0.95);
    p.mu_sq = gen.log_uniform(0.1, 10.0);
    p.sigma_sq = gen.log_uniform(1e-7, 1e-5);
    p.rate = gen.uniform(0.5, 4.0);
    return p;
}

// power at which the CDF argument equals `arg`
double power_for_argument(const ChannelParams& p, double arg) { return p.threshold_scale() / arg; }

}  // namespace

TEST_CASE("unit conversions") {
    CHECK(dbm_to_watts(30.0) == doctest::Approx(1.0));
    CHECK(dbm_to_watts(0.0) == doctest::Approx(1e-3));
    CHECK(watts_to_dbm(1.0) == doctest::Approx(30.0));
    CHECK(noise_power_watts(-96.0, 10e6) == doctest::Approx(ChannelParams{}.sigma_sq).epsilon(1e-12));
}

TEST_CASE("channel parameters are validated") {
    ChannelParams p;
    CHECK_NOTHROW(p.validate());
    p.beta = 0.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = {};
    p.sigma_sq = -1.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("sample_csi is a pure function of its seed") {
    const ChannelParams p;
    CHECK(sample_csi(p, 42).h_hat_sq == sample_csi(p, 42).h_hat_sq);
    CHECK(sample_csi(p, 42).h_hat_sq != sample_csi(p, 43).h_hat_sq);
}

TEST_CASE("sample_csi has unit mean") {
    const ChannelParams p;
    double sum = 0.0;
    const int n = 1'000'000;
    for (int i = 0; i < n; ++i) sum += sample_csi(p, static_cast<std::uint64_t>(i)).h_hat_sq;
    CHECK(std::fabs(sum / n - 1.0) < 0.01);
}

TEST_CASE("outage limits in power") {
    const ChannelParams p;
    const CsiEstimate csi{1.0};
    CHECK(outage_probability(p, csi, 0.0) == 1.0);
    CHECK(outage_probability(p, csi, 1e-300) == doctest::Approx(1.0));
    CHECK(outage_probability(p, csi, 1e12) < 1e-9);
}

TEST_CASE("outage at unit CDF argument equals the chi-square CDF example") {
    ChannelParams p;
    p.beta = 0.3;
    p.mu_sq = 3.5;
    p.rate = 2.0;
    const double power = power_for_argument(p, 1.0);
    const double out = outage_probability(p, {1.0}, power);
    CHECK(out == doctest::Approx(special::noncentral_chi2_cdf(1.0, 0.3, 1.0)).epsilon(1e-12));
    CHECK(std::fabs(out - oracle::chi2_cdf_monte_carlo(1.0, 0.3, 1.0, 1'000'000, 21)) < 3e-3);
}

TEST_CASE("outage is non-increasing in power over six decades") {
    oracle::Gen gen(22);
    for (int i = 0; i < 20; ++i) {
        const auto p = random_channel(gen);
        const CsiEstimate csi{gen.uniform(0.0, 4.0)};
        const double p0 = power_for_argument(p, 1.0);
        double prev = 1.0;
        for (double e = -3.0; e <= 3.0; e += 0.05) {
            const double out = outage_probability(p, csi, p0 * std::pow(10.0, e));
            CHECK(out <= prev);
            prev = out;
        }
    }
}

TEST_CASE("mean outage averages the conditional outage over the estimate") {
    oracle::Gen gen(23);
    for (int i = 0; i < 5; ++i) {
        const auto p = random_channel(gen);
        const double power = power_for_argument(p, gen.uniform(0.1, 3.0));
        std::mt19937_64 rng(24 + i);
        std::exponential_distribution<double> expo(1.0);
        double sum = 0.0;
        const int n = 200'000;
        for (int s = 0; s < n; ++s) sum += outage_probability(p, {expo(rng)}, power);
        CHECK(std::fabs(mean_outage_probability(p, power) - sum / n) < 4e-3);
    }
}

TEST_CASE("gain_for_mean_outage inverts the mean outage") {
    ChannelParams p;
    p.mu_sq = gain_for_mean_outage(p, 1.0 / 6.0, 0.3);
    CHECK(mean_outage_probability(p, 1.0 / 6.0) == doctest::Approx(0.3).epsilon(1e-10));
}

TEST_CASE("regularized outage limits in the margin") {
    const ChannelParams p;
    const CsiEstimate csi{1.0};
    const double power = power_for_argument(p, 1.0);
    const double pout = outage_probability(p, csi, power);
    CHECK(regularized_outage(p, csi, power, 60.0, 3.0) == doctest::Approx(3.0 * pout));
    double prev = 0.0;
    for (double m : {1.0, 0.1, 1e-2, 1e-4, 1e-8}) {
        const double r = regularized_outage(p, csi, power, m, 1.0);
        CHECK(r > prev);
        prev = r;
    }
    CHECK(prev > 1e7);
    CHECK_THROWS_AS(regularized_outage(p, csi, power, 0.0, 1.0), std::domain_error);
}

TEST_CASE("perfect link gives zero regularized outage") {
    ChannelParams p;
    p.beta = 1.0;
    CHECK(regularized_outage(p, {4.0}, 1.0, 0.5, 10.0) == 0.0);
}

TEST_CASE("regularized outage decreases ever more slowly in the margin") {
    oracle::Gen gen(25);
    for (int i = 0; i < 20; ++i) {
        const auto p = random_channel(gen);
        const CsiEstimate csi{gen.uniform(0.1, 3.0)};
        const double power = power_for_argument(p, gen.uniform(0.2, 3.0));
        const double h = 0.05;
        for (double m = 0.1; m < 5.0; m += h) {
            const double a = regularized_outage(p, csi, power, m, 1.0);
            const double b = regularized_outage(p, csi, power, m + h, 1.0);
            const double c = regularized_outage(p, csi, power, m + 2 * h, 1.0);
            CHECK(b <= a);
            CHECK(a - 2 * b + c >= -1e-15);
        }
    }
}

TEST_CASE("power gradient matches central differences") {
    oracle::Gen gen(26);
    for (int i = 0; i < 50; ++i) {
        const auto p = random_channel(gen);
        const CsiEstimate csi{gen.uniform(0.05, 4.0)};
        const double power = power_for_argument(p, gen.uniform(0.05, 5.0));
        const double m = gen.uniform(0.05, 3.0), rho = gen.uniform(0.5, 10.0);
        const double h = power * 1e-4;
        const double fd =
            (regularized_outage(p, csi, power + h, m, rho) - regularized_outage(p, csi, power - h, m, rho)) / (2 * h);
        const double g = outage_power_gradient(p, csi, power, m, rho);
        INFO("draw " << i);
        CHECK(g <= 0.0);
        CHECK(std::fabs(g - fd) <= 1e-5 * std::fabs(fd));
    }
}

TEST_CASE("power gradient vanishes in the limits") {
    const ChannelParams p;
    CHECK(outage_power_gradient(p, {1.0}, 0.0, 1.0, 1.0) == 0.0);
    CHECK(std::fabs(outage_power_gradient(p, {1.0}, 1e12, 1.0, 1.0)) < 1e-12);
    ChannelParams perfect;
    perfect.beta = 1.0;
    CHECK(outage_power_gradient(perfect, {1.0}, 1e-3, 1.0, 1.0) == 0.0);
}

TEST_CASE("delay model") {
    const ChannelParams p;
    CHECK(delay_from_outage(p, 0.0) == 0.0);
    CHECK(delay_from_outage(p, 1.0) == doctest::Approx(0.05));
    CHECK(delay_from_outage(p, 0.3) == doctest::Approx(0.015));
    double prev = 0.0;
    for (double q = 0.0; q <= 1.0; q += 0.01) {
        CHECK(delay_from_outage(p, q) >= prev);
        prev = delay_from_outage(p, q);
    }
}

TEST_CASE("position error support") {
    ChannelParams p;
    CHECK(sample_position_error(p, 0.4, 0.0, 1) == 0.0);
    p.t_comp = 0.0;
    CHECK(position_error_bound(p, 0.0, 3.0) == 0.0);
    CHECK(sample_position_error(p, 0.0, 3.0, 1) == 0.0);
}

TEST_CASE("position errors are uniform and centered") {
    const ChannelParams p;
    const double b = position_error_bound(p, 0.5, 2.0);
    CHECK(b == doctest::Approx(2.0 * (0.05 * 0.5 + 0.01)));
    double sum = 0.0;
    const int n = 1'000'000;
    for (int i = 0; i < n; ++i) {
        const double e = sample_position_error(p, 0.5, 2.0, static_cast<std::uint64_t>(i));
        REQUIRE(std::fabs(e) <= b);
        sum += e;
    }
    CHECK(std::fabs(sum / n) < 3.0 * b / 1000.0);
}
