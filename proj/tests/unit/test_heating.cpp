#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "sivnode/heating.hpp"

using namespace sivnode;

namespace {

const HeatingParams kDefaultHeating{70.0, 10.0, 100.0};

BathSet two_bath_model() { return {{{5.0, 1.0}, {180.0, 1000.0}}}; }

std::vector<double> log_grid(double lo, double hi, int n) {
    std::vector<double> out;
    for (int i = 0; i < n; ++i) out.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1)));
    return out;
}

// Dense direct evaluation of the superposed two-exponential response.
double brute_max(const std::vector<double>& pulses, const HeatingParams& hp, double end, int n) {
    double best = hp.base_temp;
    for (int i = 0; i <= n; ++i) {
        const double t = end * i / n;
        double sum = 0.0;
        for (double p : pulses) {
            if (t < p) continue;
            const double s = (t - p) / hp.tau_thermal;
            sum += std::exp(-s) - std::exp(-9.0 * s);
        }
        // Unit-peak normalisation of e^-s - e^-9s.
        const double peak = std::pow(1.0 / 9.0, 1.0 / 8.0) - std::pow(1.0 / 9.0, 9.0 / 8.0);
        best = std::max(best, hp.base_temp + hp.delta_t_per_pulse * sum / peak);
    }
    return best;
}

}  // namespace

TEST(HeatingKernel, PeaksAtLogNineOverEightOfThermalTime) {
    const double tau = 70.0;
    const double tp = tau * std::log(9.0) / 8.0;
    EXPECT_NEAR(heating_kernel_peak_time(tau), tp, 1e-12);
    EXPECT_NEAR(heating_kernel(tp, tau), 1.0, 1e-12);
    EXPECT_LT(heating_kernel(0.99 * tp, tau), 1.0);
    EXPECT_LT(heating_kernel(1.01 * tp, tau), 1.0);
    EXPECT_EQ(heating_kernel(-1.0, tau), 0.0);
    EXPECT_EQ(heating_kernel(0.0, tau), 0.0);
}

TEST(HeatingKernel, SingleBumpShape) {
    const double tau = 70.0, tp = heating_kernel_peak_time(tau);
    double prev = 0.0;
    for (double t = 0.1; t < tp; t += 0.1) {
        EXPECT_GT(heating_kernel(t, tau), prev);
        prev = heating_kernel(t, tau);
    }
    for (double t = tp + 0.1; t < 20.0 * tau; t += 1.0) {
        EXPECT_LT(heating_kernel(t, tau), prev);
        prev = heating_kernel(t, tau);
    }
}

TEST(HeatingTrace, ExactMaximumMatchesDenseScan) {
    const auto failed = oracle::for_all(50, 41, [](oracle::Gen& g, int) {
        const HeatingParams hp{g.uniform(10.0, 200.0), g.uniform(1.0, 20.0), g.uniform(10.0, 300.0)};
        std::vector<double> pulses;
        double t = 0.0;
        const int n = g.integer(1, 40);
        for (int i = 0; i < n; ++i) pulses.push_back(t += g.log_uniform(0.1, 200.0));
        const double end = t + g.uniform(0.0, 300.0);
        const HeatingTrace tr = heating_trace(pulses, hp, end);
        const double dense = brute_max(pulses, hp, end, 200000);
        return tr.t_max >= dense - 1e-9 && tr.t_max - dense < 1e-4 * (dense - hp.base_temp + 1e-9) + 1e-6;
    });
    EXPECT_TRUE(failed.empty());
}

TEST(HeatingTrace, SuperpositionIsLinear) {
    const auto failed = oracle::for_all(100, 42, [](oracle::Gen& g, int) {
        const HeatingParams hp{g.uniform(10.0, 200.0), g.uniform(1.0, 20.0), g.uniform(10.0, 300.0)};
        std::vector<double> a, b;
        for (int i = 0; i < 5; ++i) a.push_back(g.uniform(0.0, 500.0)), b.push_back(g.uniform(0.0, 500.0));
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        std::vector<double> both(a);
        both.insert(both.end(), b.begin(), b.end());
        std::sort(both.begin(), both.end());
        for (int k = 0; k < 20; ++k) {
            const double t = g.uniform(0.0, 800.0);
            const double lhs = temperature_at(t, both, hp);
            const double rhs = temperature_at(t, a, hp) + temperature_at(t, b, hp) - hp.base_temp;
            if (std::abs(lhs - rhs) > 1e-9 * lhs) return false;
        }
        return true;
    });
    EXPECT_TRUE(failed.empty());
}

TEST(HeatingTrace, WidelySpacedPulsesReachSinglePulsePeak) {
    const DecouplingSequence seq{32, 1e4};
    const HeatingTrace tr = sequence_heating(seq, kDefaultHeating);
    EXPECT_NEAR(tr.t_max, kDefaultHeating.base_temp + kDefaultHeating.delta_t_per_pulse, 1e-6);
}

TEST(HeatingTrace, ThirtyTwoPulseSweepHasInteriorMaximum) {
    std::vector<double> t_max;
    const std::vector<double> taus = log_grid(0.01, 1e4, 61);
    for (double tau : taus) t_max.push_back(sequence_heating({32, tau}, kDefaultHeating).t_max);
    const auto peak = std::max_element(t_max.begin(), t_max.end());
    EXPECT_GT(*peak, t_max.front());
    EXPECT_GT(*peak, t_max.back());
    EXPECT_NE(peak, t_max.begin());
    EXPECT_NE(peak, t_max.end() - 1);
}

TEST(HeatingImpulse, ScalesWithRabiSquared) {
    EXPECT_NEAR(heating_impulse(80.0, 0.01) / heating_impulse(40.0, 0.01), 4.0, 1e-12);
}

TEST(CoherenceWithHeating, BaseTemperatureOnlyEqualsBathCoherence) {
    const HeatingParams cold{70.0, 1e-12, 100.0};
    const ThermalDephasing d;
    const RateModel at_base = [&](double) { return 0.0; };
    for (double tau : {1.0, 10.0, 100.0}) {
        const DecouplingSequence seq{8, tau};
        EXPECT_DOUBLE_EQ(coherence_with_heating(seq, two_bath_model(), cold, at_base),
                         coherence(seq, two_bath_model(), CoherenceMethod::TimeDomain));
    }
    // With no heating the rate model sees the base temperature throughout.
    const DecouplingSequence seq{8, 10.0};
    const RateModel thermal = [&](double t) { return d.rate(t); };
    const double expected =
        coherence(seq, two_bath_model(), CoherenceMethod::TimeDomain) * std::exp(-d.rate(100.0) * seq.total_time());
    EXPECT_NEAR(coherence_with_heating(seq, two_bath_model(), cold, thermal), expected, 1e-9);
}

TEST(CoherenceWithHeating, ZeroRateHasNoEffect) {
    const RateModel none = [](double) { return 0.0; };
    const DecouplingSequence seq{32, 5.0};
    EXPECT_DOUBLE_EQ(coherence_with_heating(seq, two_bath_model(), kDefaultHeating, none),
                     coherence(seq, two_bath_model(), CoherenceMethod::TimeDomain));
}

// Strong drive: a 50 mK rise per pulse, five times the default.
TEST(CoherenceWithHeating, CollapsesThenRecoversAcrossSpacing) {
    const HeatingParams hot{70.0, 50.0, 100.0};
    const ThermalDephasing d;
    const RateModel thermal = [&](double t) { return d.rate(t); };
    std::vector<double> heated;
    for (double tau : log_grid(0.01, 10.0, 31))
        heated.push_back(coherence_with_heating({32, tau}, two_bath_model(), hot, thermal));
    const auto dip = std::min_element(heated.begin(), heated.end());
    const double after = *std::max_element(dip, heated.end());
    EXPECT_GT(heated.front(), 0.99);
    EXPECT_LT(*dip, 0.1);
    EXPECT_GT(after, 0.3) << "no recovery after the collapse";
    EXPECT_NE(dip, heated.end() - 1);
}

TEST(ThermalDephasingTest, RateGrowsWithTemperature) {
    const ThermalDephasing d;
    EXPECT_LT(d.rate(100.0), d.rate(200.0));
    EXPECT_LT(d.rate(200.0), d.rate(1000.0));
    EXPECT_GE(d.rate(1.0), 0.0);
}
