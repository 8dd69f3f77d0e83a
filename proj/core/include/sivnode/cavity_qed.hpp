#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

namespace sivnode {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

// Cavity and emitter rates. All fields are angular frequencies (rad/ns, i.e.
// 2*pi*GHz). Decay rates are full linewidths; the reflection amplitude uses
// the matching amplitude decay rates kappa/2 and gamma/2.
struct CavityAtomParams {
    double kappa_in = 0.0;
    double kappa_total = 0.0;
    double omega_cavity = 0.0;
    double omega_atom = 0.0;
    double g_coupling = 0.0;
    double gamma_atom = 0.0;

    // Takes ordinary frequencies in GHz and converts once.
    static CavityAtomParams from_ghz(double kappa_in_ghz, double kappa_total_ghz, double f_cavity_ghz,
                                     double f_atom_ghz, double g_ghz, double gamma_ghz);
    void validate() const;

    static constexpr int kParamCount = 6;
    std::array<double, kParamCount> as_array() const;
    static CavityAtomParams from_array(const std::array<double, kParamCount>& a);
};

// Default input-mirror share of the total cavity decay.
inline constexpr double kDefaultInputFraction = 0.45;

std::complex<double> reflection_amplitude(double omega, const CavityAtomParams& p);

// |r|^2; values exceeding 1 by less than 1e-9 are clamped to 1.
double reflectance(double omega, const CavityAtomParams& p);

double purcell_linewidth(const CavityAtomParams& p);
double cooperativity(const CavityAtomParams& p);
inline bool is_deterministic_regime(const CavityAtomParams& p) { return cooperativity(p) > 1.0; }

struct SpectrumTrace {
    std::vector<double> frequencies_ghz;
    std::vector<double> reflectance;
    std::vector<double> sigma;  // empty means unit weights

    void validate() const;
};

SpectrumTrace sample_spectrum(const CavityAtomParams& p, const std::vector<double>& frequencies_ghz);

struct SpinSpectrum {
    SpectrumTrace up;
    SpectrumTrace down;
    std::vector<double> contrast;
};

SpinSpectrum spin_spectrum(const CavityAtomParams& p_up, const CavityAtomParams& p_down,
                           const std::vector<double>& frequencies_ghz);

struct ProbePoint {
    double f_q_ghz = 0.0;
    double peak_contrast = 0.0;
    bool degenerate = false;  // both spin states give identical spectra
};

ProbePoint optimal_probe(const CavityAtomParams& p_up, const CavityAtomParams& p_down,
                         const std::vector<double>& frequencies_ghz);

// Order of parameters in the fit mask follows CavityAtomParams::as_array.
enum class CavityParam : int { KappaIn = 0, KappaTotal, OmegaCavity, OmegaAtom, G, Gamma };

struct SpectrumFit {
    CavityAtomParams params;
    double residual = 0.0;  // weighted sum of squared residuals
    int iterations = 0;
};

// Weighted least squares on R(omega). Throws FitError on non-convergence
// and std::invalid_argument on degenerate data.
SpectrumFit fit_spectrum(const SpectrumTrace& trace, const CavityAtomParams& initial,
                         const std::array<bool, CavityAtomParams::kParamCount>& frozen);

struct TwoStageFit {
    SpectrumFit cavity;   // far-detuned trace, emitter decoupled
    SpectrumFit coupled;  // resonant trace, cavity and gamma frozen
};

// Fits kappa_in, kappa_total and the cavity frequency with g held at 0, then
// g and the atom frequency with the cavity and gamma fixed. gamma comes from
// `initial` (an independent linewidth measurement).
TwoStageFit fit_two_stage(const SpectrumTrace& detuned, const SpectrumTrace& resonant,
                          const CavityAtomParams& initial);

// Multiplicative Gaussian noise of relative size sigma; sigma is recorded
// in the trace as sigma * R (floored at 1e-6).
SpectrumTrace with_relative_noise(const SpectrumTrace& t, double sigma, std::uint64_t seed);

std::vector<double> linspace(double a, double b, int n);

}  // namespace sivnode
