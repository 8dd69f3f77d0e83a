#include <algorithm>
#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "sivnode/cavity_qed.hpp"
#include "sivnode/spin_model.hpp"

using namespace sivnode;

namespace {

CavityAtomParams device_cavity(double detuning_ghz = 0.0) {
    return CavityAtomParams::from_ghz(0.45 * 33.0, 33.0, 0.0, detuning_ghz, 5.6, 0.1);
}

CavityAtomParams random_cavity(oracle::Gen& g) {
    const double kappa = g.uniform(1.0, 100.0);
    return CavityAtomParams::from_ghz(g.uniform(0.01, 1.0) * kappa, kappa, g.uniform(-20.0, 20.0),
                                      g.uniform(-40.0, 40.0), g.uniform(0.0, 20.0), g.uniform(0.01, 5.0));
}

// Pair of spin-conditioned emitters split symmetrically about atom_ghz.
std::pair<CavityAtomParams, CavityAtomParams> split_pair(double atom_ghz, double splitting_ghz) {
    return {CavityAtomParams::from_ghz(0.45 * 33.0, 33.0, 0.0, atom_ghz + 0.5 * splitting_ghz, 5.6, 0.1),
            CavityAtomParams::from_ghz(0.45 * 33.0, 33.0, 0.0, atom_ghz - 0.5 * splitting_ghz, 5.6, 0.1)};
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace

TEST(Reflectance, StaysInUnitIntervalOverRandomParameters) {
    oracle::Gen g(21);
    double worst = 0.0, lowest = 1.0;
    for (int i = 0; i < 1000; ++i) {
        const CavityAtomParams p = random_cavity(g);
        for (int j = 0; j < 1000; ++j) {
            const double r = reflectance(kTwoPi * g.uniform(-200.0, 200.0), p);
            worst = std::max(worst, r);
            lowest = std::min(lowest, r);
        }
    }
    EXPECT_LE(worst, 1.0 + 1e-9);
    EXPECT_GE(lowest, 0.0);
}

TEST(Reflectance, CriticallyCoupledBareCavityVanishesOnResonance) {
    const CavityAtomParams p = CavityAtomParams::from_ghz(16.5, 33.0, 3.0, 0.0, 0.0, 0.1);
    EXPECT_LT(reflectance(kTwoPi * 3.0, p), 1e-9);
}

TEST(Reflectance, FarDetunedProbeIsMirrored) {
    EXPECT_NEAR(reflectance(kTwoPi * 1e7, device_cavity()), 1.0, 1e-5);
}

TEST(Reflectance, SymmetricAboutCavityWhenAtomIsResonant) {
    const auto failed = oracle::for_all(500, 22, [](oracle::Gen& g, int) {
        CavityAtomParams p = random_cavity(g);
        p.omega_atom = p.omega_cavity;
        const double d = kTwoPi * g.uniform(0.0, 100.0);
        return std::abs(reflectance(p.omega_cavity + d, p) - reflectance(p.omega_cavity - d, p)) < 1e-10;
    });
    EXPECT_TRUE(failed.empty());
}

TEST(Reflectance, MatchesSteadyStateLinearSolve) {
    const auto failed = oracle::for_all(2000, 23, [](oracle::Gen& g, int) {
        const CavityAtomParams p = random_cavity(g);
        const double w = kTwoPi * g.uniform(-100.0, 100.0);
        const auto ref = oracle::reflection_linear_system(w, p.kappa_in, p.kappa_total, p.omega_cavity, p.omega_atom,
                                                          p.g_coupling, p.gamma_atom);
        // The oracle rotates as e^{+i w t}; the library uses the opposite sign.
        return std::abs(reflection_amplitude(w, p) - std::conj(ref)) < 1e-10;
    });
    EXPECT_TRUE(failed.empty());
}

TEST(Reflectance, DeviceParametersFillTheDipOnResonance) {
    const CavityAtomParams p = device_cavity();
    const auto ref = oracle::reflection_linear_system(0.0, p.kappa_in, p.kappa_total, 0.0, 0.0, p.g_coupling,
                                                      p.gamma_atom);
    EXPECT_NEAR(reflectance(0.0, p), std::norm(ref), 1e-12);
    EXPECT_GT(reflectance(0.0, p), 0.8);
    const CavityAtomParams bare = CavityAtomParams::from_ghz(0.45 * 33.0, 33.0, 0.0, 0.0, 0.0, 0.1);
    EXPECT_LT(reflectance(0.0, bare), 0.02);
}

TEST(Purcell, ZeroCouplingLeavesBareLinewidth) {
    CavityAtomParams p = device_cavity();
    p.g_coupling = 0.0;
    EXPECT_DOUBLE_EQ(purcell_linewidth(p), p.gamma_atom);
}

TEST(Purcell, ResonantEnhancementIsOnePlusCooperativity) {
    const CavityAtomParams p = device_cavity();
    EXPECT_NEAR(purcell_linewidth(p), p.gamma_atom * (1.0 + cooperativity(p)), 1e-12);
    EXPECT_NEAR(purcell_linewidth(p) / kTwoPi, 3.9, 0.2);
}

TEST(Purcell, HalfLinewidthDetuningHalvesEnhancement) {
    CavityAtomParams p = device_cavity();
    const double on = purcell_linewidth(p) - p.gamma_atom;
    p.omega_atom = p.omega_cavity + 0.5 * p.kappa_total;
    EXPECT_NEAR(purcell_linewidth(p) - p.gamma_atom, 0.5 * on, 1e-12);
}

// Width of the emitter feature in R(w) over the bare-cavity background,
// measured at half height by bisection on a dense scan.
TEST(Purcell, DipWidthAgreesWithLinewidthAcrossCooperativities) {
    const double kappa = 33.0, gamma = 0.02;
    for (double c : {1.0, 3.0, 10.0, 30.0, 100.0}) {
        const double g_ghz = std::sqrt(c * kappa * gamma / 4.0);
        const CavityAtomParams p = CavityAtomParams::from_ghz(0.45 * kappa, kappa, 0.0, 0.0, g_ghz, gamma);
        CavityAtomParams bare = p;
        bare.g_coupling = 0.0;
        auto feature = [&](double f) { return reflectance(kTwoPi * f, p) - reflectance(kTwoPi * f, bare); };
        const double half = 0.5 * feature(0.0);
        double lo = 0.0, hi = 10.0 * purcell_linewidth(p) / kTwoPi;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (feature(mid) > half ? lo : hi) = mid;
        }
        const double fwhm = 2.0 * lo;
        EXPECT_LT(rel(fwhm, purcell_linewidth(p) / kTwoPi), 0.10) << "C = " << c;
    }
}

TEST(Cooperativity, DeviceParametersGiveThirtyEight) {
    const CavityAtomParams p = device_cavity();
    EXPECT_NEAR(cooperativity(p), 38.0, 0.5);
    EXPECT_NEAR(cooperativity(p), 4.0 * 5.6 * 5.6 / (33.0 * 0.1), 1e-9);
    EXPECT_TRUE(is_deterministic_regime(p));
}

TEST(Cooperativity, DoublingCouplingQuadruples) {
    CavityAtomParams p = device_cavity();
    const double c = cooperativity(p);
    p.g_coupling *= 2.0;
    EXPECT_NEAR(cooperativity(p), 4.0 * c, 1e-9 * c);
}

TEST(SpinSpectrum, IdenticalEmittersGiveNoContrast) {
    const CavityAtomParams p = device_cavity(10.0);
    const SpinSpectrum s = spin_spectrum(p, p, linspace(-50.0, 50.0, 201));
    EXPECT_EQ(*std::max_element(s.contrast.begin(), s.contrast.end()), 0.0);
    EXPECT_TRUE(optimal_probe(p, p, linspace(-50.0, 50.0, 201)).degenerate);
}

TEST(SpinSpectrum, IntermediateDetuningExceedsNinetyPercent) {
    const auto [up, down] = split_pair(16.5, 2.0);
    const ProbePoint pp = optimal_probe(up, down, linspace(-60.0, 60.0, 2401));
    EXPECT_GT(pp.peak_contrast, 0.9);
    EXPECT_FALSE(pp.degenerate);
}

// Aligned 0.35 T field, transitions split as the spin model predicts.
TEST(SpinSpectrum, FarDetunedRegimeIsNearEightyPercent) {
    const double eps = strain_from_splitting(140.0, 25.0, 1.7e6);
    const double split = std::abs(
        transitions(SivParameters::ground(eps), SivParameters::excited(eps), MagneticField::axial(0.35))
            .optical_splitting);
    const auto [up, down] = split_pair(-3.0 * 33.0, split);
    const ProbePoint pp = optimal_probe(up, down, linspace(-119.0, -79.0, 40001));
    EXPECT_NEAR(pp.peak_contrast, 0.8, 0.1) << "splitting " << split << " GHz";
}

TEST(SpinSpectrum, ContrastIsAbsoluteDifference) {
    const auto [up, down] = split_pair(5.0, 3.0);
    const SpinSpectrum s = spin_spectrum(up, down, linspace(-40.0, 40.0, 81));
    for (size_t i = 0; i < s.contrast.size(); ++i)
        EXPECT_DOUBLE_EQ(s.contrast[i], std::abs(s.up.reflectance[i] - s.down.reflectance[i]));
}

TEST(OptimalProbe, AgreesWithTenTimesFinerScan) {
    double worst_steps = 0.0;
    const auto failed = oracle::for_all(200, 24, [&](oracle::Gen& g, int) {
        const auto [up, down] = split_pair(g.uniform(-40.0, 40.0), g.uniform(0.5, 10.0));
        const std::vector<double> grid = linspace(-80.0, 80.0, 3201);
        const double step = grid[1] - grid[0];
        const ProbePoint pp = optimal_probe(up, down, grid);
        double best = -1.0, arg = 0.0;
        for (double f : linspace(-80.0, 80.0, 32001)) {
            const double c = std::abs(reflectance(kTwoPi * f, up) - reflectance(kTwoPi * f, down));
            if (c > best) best = c, arg = f;
        }
        worst_steps = std::max(worst_steps, std::abs(pp.f_q_ghz - arg) / step);
        return std::abs(pp.f_q_ghz - arg) <= step + 1e-12 && pp.peak_contrast <= best + 1e-12;
    });
    EXPECT_TRUE(failed.empty()) << "worst offset " << worst_steps << " grid steps";
}

TEST(OptimalProbe, EmptyGridIsRejected) {
    EXPECT_THROW(optimal_probe(device_cavity(), device_cavity(), {}), std::invalid_argument);
}

TEST(SpectrumFit, NoiselessRoundTripRecoversEveryFreeParameter) {
    const auto failed = oracle::for_all(20, 25, [](oracle::Gen& g, int) {
        const CavityAtomParams truth = CavityAtomParams::from_ghz(
            g.uniform(0.3, 0.6) * 33.0, g.uniform(25.0, 40.0), g.uniform(-3.0, 3.0), g.uniform(5.0, 20.0),
            g.uniform(3.0, 8.0), 0.1);
        const SpectrumTrace t = sample_spectrum(truth, linspace(-80.0, 80.0, 801));
        CavityAtomParams start = truth;
        start.kappa_in *= 1.05;
        start.kappa_total *= 0.95;
        start.omega_cavity += kTwoPi * 0.5;
        start.omega_atom += kTwoPi * 0.3;
        start.g_coupling *= 1.05;
        const SpectrumFit fit = fit_spectrum(t, start, {false, false, false, false, false, true});
        const auto a = fit.params.as_array(), b = truth.as_array();
        for (int k = 0; k < 5; ++k)
            if (std::abs(a[k] - b[k]) > 1e-3 * std::max(std::abs(b[k]), kTwoPi * 1.0)) return false;
        return true;
    });
    EXPECT_TRUE(failed.empty()) << failed.size() << " of 20 fits missed 0.1%";
}

TEST(SpectrumFit, OnePercentNoiseStaysWithinFivePercent) {
    const auto failed = oracle::for_all(10, 26, [](oracle::Gen& g, int i) {
        const CavityAtomParams truth = CavityAtomParams::from_ghz(0.45 * 33.0, 33.0, 0.0, 12.0, 5.6, 0.1);
        const SpectrumTrace t = with_relative_noise(sample_spectrum(truth, linspace(-80.0, 80.0, 801)), 0.01,
                                                    1000 + static_cast<std::uint64_t>(i));
        CavityAtomParams start = truth;
        start.g_coupling *= g.uniform(0.9, 1.1);
        start.kappa_total *= g.uniform(0.9, 1.1);
        const SpectrumFit fit = fit_spectrum(t, start, {false, false, false, false, false, true});
        const auto a = fit.params.as_array(), b = truth.as_array();
        for (int k = 0; k < 5; ++k)
            if (std::abs(a[k] - b[k]) > 0.05 * std::max(std::abs(b[k]), kTwoPi * 1.0)) return false;
        return true;
    });
    EXPECT_TRUE(failed.empty());
}

TEST(SpectrumFit, FrozenCouplingReducesToBareLorentzian) {
    const CavityAtomParams truth = CavityAtomParams::from_ghz(14.0, 30.0, 2.0, 0.0, 0.0, 0.1);
    CavityAtomParams start = CavityAtomParams::from_ghz(12.0, 35.0, 0.0, 0.0, 0.0, 0.1);
    const SpectrumFit fit =
        fit_spectrum(sample_spectrum(truth, linspace(-100.0, 100.0, 401)), start, {false, false, false, true, true, true});
    EXPECT_LT(rel(fit.params.kappa_total, truth.kappa_total), 1e-6);
    EXPECT_LT(rel(fit.params.kappa_in, truth.kappa_in), 1e-6);
    EXPECT_EQ(fit.params.g_coupling, 0.0);
}

TEST(SpectrumFit, TwoStageWorkflowRecoversCoupling) {
    const CavityAtomParams truth = device_cavity();
    CavityAtomParams detuned = truth;
    detuned.omega_atom = kTwoPi * 2000.0;
    const std::vector<double> grid = linspace(-80.0, 80.0, 801);
    const auto failed = oracle::for_all(5, 27, [&](oracle::Gen& g, int i) {
        const auto seed = 500 + static_cast<std::uint64_t>(i);
        const SpectrumTrace far = with_relative_noise(sample_spectrum(detuned, grid), 0.01, seed);
        const SpectrumTrace near = with_relative_noise(sample_spectrum(truth, grid), 0.01, seed + 100);
        CavityAtomParams start = CavityAtomParams::from_ghz(0.4 * 30.0, 30.0, 1.0, 0.5, g.uniform(3.0, 8.0), 0.1);
        const TwoStageFit fit = fit_two_stage(far, near, start);
        return rel(fit.coupled.params.g_coupling, kTwoPi * 5.6) < 0.02;
    });
    EXPECT_TRUE(failed.empty());
}

TEST(SpectrumFit, DegenerateInputsAreRejected) {
    SpectrumTrace flat{linspace(0.0, 1.0, 10), std::vector<double>(10, 0.5), {}};
    EXPECT_THROW(fit_spectrum(flat, device_cavity(), {}), std::invalid_argument);
    SpectrumTrace tiny{linspace(0.0, 1.0, 4), {0.1, 0.2, 0.3, 0.4}, {}};
    EXPECT_THROW(fit_spectrum(tiny, device_cavity(), {}), std::invalid_argument);
}

TEST(SpectrumNoise, IsSeededAndRecordsSigma) {
    const SpectrumTrace t = sample_spectrum(device_cavity(), linspace(-10.0, 10.0, 21));
    const SpectrumTrace a = with_relative_noise(t, 0.01, 7), b = with_relative_noise(t, 0.01, 7);
    EXPECT_EQ(a.reflectance, b.reflectance);
    ASSERT_EQ(a.sigma.size(), t.reflectance.size());
    for (size_t i = 0; i < t.reflectance.size(); ++i)
        EXPECT_DOUBLE_EQ(a.sigma[i], std::max(1e-6, 0.01 * t.reflectance[i]));
}
