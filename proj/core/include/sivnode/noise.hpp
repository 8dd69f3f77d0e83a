#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace sivnode {

// Units in this module: times in microseconds, angular frequency in rad/us.
// A bath strength b quoted in kHz enters the spectrum as b * 1e-3 per us,
// without a 2*pi factor.
inline constexpr double kKilohertzToPerMicrosecond = 1e-3;

struct LorentzianBath {
    double strength_b = 0.0;       // kHz
    double correlation_tau = 0.0;  // us

    void validate() const;
    // One-sided power spectrum S(w) = b^2 tau / pi / (1 + w^2 tau^2).
    double spectrum(double omega) const;
};

struct BathSet {
    std::vector<LorentzianBath> baths;

    void validate() const;
    double spectrum(double omega) const;
    double min_tau() const;
};

enum class SequenceFamily { Cpmg, Xy8 };

// Pulse phases do not change the filter, so the family is only a label.
struct DecouplingSequence {
    int n_pulses = 2;
    double tau_half = 1.0;  // us, half of the inter-pulse spacing
    SequenceFamily family = SequenceFamily::Cpmg;

    void validate() const;
    double total_time() const { return 2.0 * n_pulses * tau_half; }
    // Pulse centres at tau, 3 tau, ..., (2N - 1) tau.
    std::vector<double> pulse_times() const;
    static DecouplingSequence from_total_time(int n_pulses, double total_us,
                                              SequenceFamily family = SequenceFamily::Cpmg);
};

std::string to_string(SequenceFamily f);
SequenceFamily sequence_family_from_string(const std::string& s);

struct CoherenceCurve {
    std::vector<double> total_times;  // us
    std::vector<double> signal;
    int n_pulses = 2;

    void validate() const;
};

// 2 sin^2(wt/2) (1 - sec(wt/2N))^2 / w^2 for even N. Finite at the secant
// poles, which coincide with zeros of the sine factor.
double filter_function(double t, double omega, int n_pulses);

// Free-evolution filter in the same normalisation: 2 sin^2(wt/2) / w^2.
double free_evolution_filter(double t, double omega);

struct QuadratureOptions {
    double panel_rel_tol = 1e-11;
    // Stop doubling the upper cutoff once the added piece is below this
    // fraction of the running total.
    double cutoff_rel_tol = 1e-8;
    int max_doublings = 30;
};

// chi(t) = integral over (0, inf) of S(w) F_N(t, w); coherence = exp(-chi).
double decay_exponent(double t, int n_pulses, const BathSet& baths, const QuadratureOptions& opt = {});

// The same quantity evaluated in the time domain. For Lorentzian spectra the
// frequency integral reduces to a double integral of the toggling function
// against b^2 exp(-|s|/tau), which is exact and O(N).
double decay_exponent_exact(double t, int n_pulses, const BathSet& baths);

enum class CoherenceMethod { Quadrature, TimeDomain };

double coherence(double t, int n_pulses, const BathSet& baths,
                 CoherenceMethod method = CoherenceMethod::Quadrature);
double coherence(const DecouplingSequence& seq, const BathSet& baths,
                 CoherenceMethod method = CoherenceMethod::Quadrature);

// Time at which coherence falls to 1/e.
double model_t2(int n_pulses, const BathSet& baths, CoherenceMethod method = CoherenceMethod::TimeDomain);

struct T2Fit {
    double t2 = 0.0;
    double offset_a = 0.0;
    double amplitude_b = 0.0;
    double beta = 0.0;
    double residual = 0.0;
    bool no_decay = false;
};

// A + B exp(-(t/T2)^beta). beta is frozen when beta_fixed is given.
T2Fit t2_extract(const CoherenceCurve& curve, std::optional<double> beta_fixed = std::nullopt);

struct PowerLaw {
    double exponent = 0.0;
    double prefactor = 0.0;
};

// Least squares line through (log x, log y).
PowerLaw fit_power_law(const std::vector<double>& x, const std::vector<double>& y);

struct BathFitOptions {
    std::uint64_t seed = 1;
    int jitter_draws = 1;  // random restarts added around each grid start
};

struct BathFit {
    BathSet baths;  // sorted by correlation time; one entry if a single bath suffices
    double residual = 0.0;
    double condition_number = 0.0;  // Jacobian in log-parameters at the optimum
    int starts = 0;

    double strength_of(std::size_t i) const { return i < baths.baths.size() ? baths.baths[i].strength_b : 0.0; }
};

// Global two-bath fit over curves with at least three distinct pulse counts.
BathFit fit_baths(const std::vector<CoherenceCurve>& curves, const BathFitOptions& opt = {});

// Synthetic normalised curves sampled at the given fractions of the model T2.
std::vector<CoherenceCurve> synthetic_curves(const BathSet& baths, const std::vector<int>& pulse_counts,
                                             const std::vector<double>& t2_fractions, double noise_sigma,
                                             std::uint64_t seed);

// Echo with one bath flipped alongside the probe pi pulse: that bath loses its
// echo protection and is weighted by the free-evolution filter.
double deer_coherence(double t, int n_pulses, const BathSet& baths, std::optional<std::size_t> flipped_bath,
                      CoherenceMethod method = CoherenceMethod::TimeDomain);
double deer_t2(int n_pulses, const BathSet& baths, std::optional<std::size_t> flipped_bath);

// Dipolar surface-spin estimate
//   b = K / (4 pi sum d_i^2) * sqrt(pi sigma / 4),  K = g mu_B^2 mu_0 / hbar,
// with b in ordinary Hz. Returns spins per nm^2.
double surface_density(double b_khz, const std::vector<double>& distances_nm);
double surface_noise_strength(double sigma_per_nm2, const std::vector<double>& distances_nm);

enum class BathMoment { Electron, Nuclear };

struct BulkDensity {
    double per_nm3 = 0.0;
    double atomic_fraction = 0.0;  // relative to the diamond atom density
    double ppm() const { return atomic_fraction * 1e6; }
    double percent() const { return atomic_fraction * 1e2; }
};

inline constexpr double kDiamondAtomsPerNm3 = 176.2;
inline constexpr double kDefaultBulkExclusionNm = 50.0;

// Shell integral of the same estimate from an exclusion radius outward:
// b^2 = K^2 rho / (192 pi d0^3).
BulkDensity bulk_density(double b_khz, BathMoment moment = BathMoment::Electron,
                         double exclusion_nm = kDefaultBulkExclusionNm);
double bulk_noise_strength(double rho_per_nm3, BathMoment moment = BathMoment::Electron,
                           double exclusion_nm = kDefaultBulkExclusionNm);

// 3 W gives 80 MHz.
inline constexpr double kDefaultRabiCalibration = 46.188021535170066;  // MHz / sqrt(W)
double rabi_frequency(double power_w, double calibration_mhz_per_sqrt_w = kDefaultRabiCalibration);

}  // namespace sivnode
