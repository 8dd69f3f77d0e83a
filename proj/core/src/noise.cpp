#include "sivnode/noise.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <random>
#include <set>
#include <stdexcept>

#include <Eigen/Dense>

#include "sivnode/levmar.hpp"
#include "sivnode/quadrature.hpp"

namespace sivnode {

namespace {

constexpr double kPi = std::numbers::pi;

// SI constants used by the dipolar density estimates.
constexpr double kBohrMagnetonSi = 9.2740100783e-24;   // J/T
constexpr double kNuclearMagnetonSi = 5.0507837461e-27;  // J/T
constexpr double kMu0 = 1.25663706212e-6;               // T m / A
constexpr double kHbar = 1.054571817e-34;               // J s
constexpr double kElectronG = 2.0;

// g mu_B mu_bath mu_0 / hbar in m^3/s.
double dipolar_constant(BathMoment m) {
    const double bath = m == BathMoment::Electron ? kBohrMagnetonSi : kNuclearMagnetonSi;
    return kElectronG * kBohrMagnetonSi * bath * kMu0 / kHbar;
}

// u - (1 - exp(-u)), accurate for small u.
double exp_excess(double u) {
    if (u < 1e-2) {
        double term = u * u / 2.0, sum = 0.0;
        for (int k = 3; k < 12; ++k) {
            sum += term;
            term *= -u / k;
        }
        return sum;
    }
    return u + std::expm1(-u);
}

// Exact 0.5 |Y(w)|^2 for the CPMG toggling function. Used where the closed
// form is numerically 0/0.
double toggling_filter(double t, double omega, int n) {
    std::complex<double> y{0.0, 0.0};
    double start = 0.0;
    double sign = 1.0;
    const std::complex<double> iw{0.0, omega};
    for (int k = 0; k <= n; ++k) {
        const double end = k < n ? t * (2.0 * k + 1.0) / (2.0 * n) : t;
        y += sign * (std::exp(iw * end) - std::exp(iw * start));
        start = end;
        sign = -sign;
    }
    return 0.5 * std::norm(y) / (omega * omega);
}

double bath_rate(const LorentzianBath& b) { return b.strength_b * kKilohertzToPerMicrosecond; }

// (b^2/4) times the double integral of y(t1) y(t2) exp(-|t1-t2|/tau) for a
// piecewise constant y given by boundaries and alternating signs.
double exact_exponent_one(double t, int n, const LorentzianBath& bath) {
    const double tau = bath.correlation_tau;
    const double b = bath_rate(bath);
    double diag = 0.0, off = 0.0, acc = 0.0;
    double start = 0.0;
    double sign = 1.0;
    for (int k = 0; k <= n; ++k) {
        const double end = (n == 0) ? t : (k < n ? t * (2.0 * k + 1.0) / (2.0 * n) : t);
        const double len = end - start;
        const double decay = std::exp(-len / tau);
        const double a = -tau * std::expm1(-len / tau);
        diag += 2.0 * tau * tau * exp_excess(len / tau);
        off += sign * a * acc;
        acc = acc * decay + sign * a;
        start = end;
        sign = -sign;
        if (n == 0) break;
    }
    return 0.25 * b * b * (diag + 2.0 * off);
}

// Integral of integrand over (0, inf). Panels end on multiples of `unit`;
// below the first boundary geometric panels resolve the low-frequency tail.
double spectral_integral(const std::function<double(double)>& integrand, double unit, double min_tau,
                         const QuadratureOptions& opt) {
    double total = 0.0;
    double hi = unit;
    for (int k = 0; k < 50; ++k) {
        const double lo = hi * 0.5;
        total += integrate_gk(integrand, lo, hi, opt.panel_rel_tol).value;
        hi = lo;
    }
    auto add_range = [&](long j0, long j1) {
        double s = 0.0;
        for (long j = j0; j < j1; ++j)
            s += integrate_gk(integrand, j * unit, (j + 1) * unit, opt.panel_rel_tol).value;
        return s;
    };
    const double first_cut = std::max(4.0 * unit, 8.0 / min_tau);
    long panels = std::max(1L, static_cast<long>(std::ceil(first_cut / unit)));
    total += add_range(1, panels);
    for (int d = 0; d < opt.max_doublings; ++d) {
        const double piece = add_range(panels, 2 * panels);
        total += piece;
        panels *= 2;
        if (std::abs(piece) <= opt.cutoff_rel_tol * std::abs(total)) return total;
        if (panels > (1L << 26)) break;
    }
    throw QuadratureError("spectral integral did not converge under cutoff doubling");
}

void check_pulses(int n) {
    if (n <= 0 || n % 2 != 0) throw std::invalid_argument("pulse count must be a positive even number");
}

}  // namespace

void LorentzianBath::validate() const {
    if (!(strength_b > 0.0) || !(correlation_tau > 0.0))
        throw std::invalid_argument("bath strength and correlation time must be positive");
}

double LorentzianBath::spectrum(double omega) const {
    const double b = bath_rate(*this);
    const double wt = omega * correlation_tau;
    return b * b * correlation_tau / kPi / (1.0 + wt * wt);
}

void BathSet::validate() const {
    if (baths.empty()) throw std::invalid_argument("bath set is empty");
    for (const auto& b : baths) b.validate();
}

double BathSet::spectrum(double omega) const {
    double s = 0.0;
    for (const auto& b : baths) s += b.spectrum(omega);
    return s;
}

double BathSet::min_tau() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& b : baths) m = std::min(m, b.correlation_tau);
    return m;
}

void DecouplingSequence::validate() const {
    check_pulses(n_pulses);
    if (!(tau_half > 0.0)) throw std::invalid_argument("tau_half must be positive");
}

std::vector<double> DecouplingSequence::pulse_times() const {
    std::vector<double> out(static_cast<size_t>(n_pulses));
    for (int k = 0; k < n_pulses; ++k) out[static_cast<size_t>(k)] = tau_half * (2.0 * k + 1.0);
    return out;
}

DecouplingSequence DecouplingSequence::from_total_time(int n_pulses, double total_us, SequenceFamily family) {
    DecouplingSequence s{n_pulses, total_us / (2.0 * n_pulses), family};
    s.validate();
    return s;
}

std::string to_string(SequenceFamily f) { return f == SequenceFamily::Cpmg ? "CPMG" : "XY8"; }

SequenceFamily sequence_family_from_string(const std::string& s) {
    if (s == "CPMG" || s == "cpmg") return SequenceFamily::Cpmg;
    if (s == "XY8" || s == "xy8") return SequenceFamily::Xy8;
    throw std::invalid_argument("unknown sequence family: " + s);
}

void CoherenceCurve::validate() const {
    if (total_times.size() != signal.size()) throw std::invalid_argument("curve: times and signal lengths differ");
    for (size_t i = 1; i < total_times.size(); ++i)
        if (!(total_times[i] > total_times[i - 1]))
            throw std::invalid_argument("curve: times must be strictly increasing");
    check_pulses(n_pulses);
}

double filter_function(double t, double omega, int n_pulses) {
    check_pulses(n_pulses);
    if (!(t > 0.0)) throw std::invalid_argument("filter_function: t must be positive");
    omega = std::abs(omega);
    if (omega == 0.0) return 0.0;
    const double x = omega * t / (2.0 * n_pulses);
    const double c = std::cos(x);
    if (std::abs(c) < 1e-7) return toggling_filter(t, omega, n_pulses);
    const double s = std::sin(0.5 * omega * t);
    const double h = std::sin(0.5 * x);
    const double r = 2.0 * h * h / c;  // sec(x) - 1
    return 2.0 * s * s * r * r / (omega * omega);
}

double free_evolution_filter(double t, double omega) {
    omega = std::abs(omega);
    if (omega == 0.0) return 0.5 * t * t;
    const double s = std::sin(0.5 * omega * t);
    return 2.0 * s * s / (omega * omega);
}

double decay_exponent(double t, int n_pulses, const BathSet& baths, const QuadratureOptions& opt) {
    check_pulses(n_pulses);
    baths.validate();
    if (!(t > 0.0)) throw std::invalid_argument("decay_exponent: t must be positive");
    const double unit = kPi * n_pulses / t;  // first secant pole; poles sit on odd multiples
    auto f = [&](double w) { return baths.spectrum(w) * filter_function(t, w, n_pulses); };
    return spectral_integral(f, unit, baths.min_tau(), opt);
}

double decay_exponent_exact(double t, int n_pulses, const BathSet& baths) {
    check_pulses(n_pulses);
    baths.validate();
    if (!(t > 0.0)) throw std::invalid_argument("decay_exponent: t must be positive");
    double chi = 0.0;
    for (const auto& b : baths.baths) chi += exact_exponent_one(t, n_pulses, b);
    return chi;
}

double coherence(double t, int n_pulses, const BathSet& baths, CoherenceMethod method) {
    const double chi = method == CoherenceMethod::Quadrature ? decay_exponent(t, n_pulses, baths)
                                                             : decay_exponent_exact(t, n_pulses, baths);
    return std::exp(-chi);
}

double coherence(const DecouplingSequence& seq, const BathSet& baths, CoherenceMethod method) {
    seq.validate();
    return coherence(seq.total_time(), seq.n_pulses, baths, method);
}

double model_t2(int n_pulses, const BathSet& baths, CoherenceMethod method) {
    auto f = [&](double t) {
        return (method == CoherenceMethod::Quadrature ? decay_exponent(t, n_pulses, baths)
                                                      : decay_exponent_exact(t, n_pulses, baths)) -
               1.0;
    };
    return find_increasing_root(f, 1.0, 1e12);
}

T2Fit t2_extract(const CoherenceCurve& curve, std::optional<double> beta_fixed) {
    const auto& t = curve.total_times;
    const auto& s = curve.signal;
    if (t.size() != s.size()) throw std::invalid_argument("t2_extract: length mismatch");
    if (t.size() < 6) throw std::invalid_argument("t2_extract: need at least 6 points");
    for (size_t i = 1; i < t.size(); ++i)
        if (!(t[i] > t[i - 1])) throw std::invalid_argument("t2_extract: times must increase");

    const auto [mn, mx] = std::minmax_element(s.begin(), s.end());
    T2Fit out;
    if (*mx - *mn <= 1e-12 * std::max(1.0, std::abs(*mx))) {
        out.no_decay = true;
        out.t2 = std::numeric_limits<double>::infinity();
        out.offset_a = s.front();
        return out;
    }

    const double a0 = s.back();
    const double b0 = s.front() - s.back();
    const double target = a0 + b0 / std::numbers::e;
    double t0 = t[t.size() / 2];
    for (size_t i = 1; i < t.size(); ++i) {
        if ((s[i - 1] - target) * (s[i] - target) <= 0.0) {
            const double d = s[i] - s[i - 1];
            const double w = d == 0.0 ? 0.0 : (target - s[i - 1]) / d;
            t0 = t[i - 1] + w * (t[i] - t[i - 1]);
            break;
        }
    }

    LmProblem prob;
    prob.n_residuals = static_cast<int>(t.size());
    prob.residuals = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
        const double t2 = std::exp(p(2));
        for (size_t i = 0; i < t.size(); ++i)
            r(static_cast<Eigen::Index>(i)) = p(0) + p(1) * std::exp(-std::pow(t[i] / t2, p(3))) - s[i];
    };

    std::vector<double> betas = beta_fixed ? std::vector<double>{*beta_fixed} : std::vector<double>{1.5, 3.0};
    const std::vector<bool> frozen = {false, false, false, beta_fixed.has_value()};
    bool have = false;
    LmResult best;
    for (double b : betas) {
        Eigen::VectorXd x0(4);
        x0 << a0, b0, std::log(std::max(t0, 1e-12)), b;
        LmResult r;
        try {
            r = levenberg_marquardt(prob, x0, frozen);
        } catch (const FitError&) {
            continue;
        }
        if (!have || r.cost < best.cost) {
            best = r;
            have = true;
        }
    }
    if (!have || !best.converged) throw FitError("t2_extract: fit did not converge", have ? best.params : Eigen::VectorXd());

    out.offset_a = best.params(0);
    out.amplitude_b = best.params(1);
    out.t2 = std::exp(best.params(2));
    out.beta = best.params(3);
    out.residual = best.cost;
    out.no_decay = std::abs(out.amplitude_b) < 1e-6 * (std::abs(out.offset_a) + std::abs(out.amplitude_b));
    return out;
}

PowerLaw fit_power_law(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_power_law: need >= 2 paired points");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0 && y[i] > 0.0)) throw std::invalid_argument("fit_power_law: values must be positive");
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double den = n * sxx - sx * sx;
    if (den == 0.0) throw std::invalid_argument("fit_power_law: x values are all equal");
    PowerLaw p;
    p.exponent = (n * sxy - sx * sy) / den;
    p.prefactor = std::exp((sy - p.exponent * sx) / n);
    return p;
}

BathFit fit_baths(const std::vector<CoherenceCurve>& curves, const BathFitOptions& opt) {
    std::set<int> distinct;
    int npts = 0;
    for (const auto& c : curves) {
        c.validate();
        distinct.insert(c.n_pulses);
        npts += static_cast<int>(c.total_times.size());
    }
    if (distinct.size() < 3) throw std::invalid_argument("fit_baths: need curves at >= 3 distinct pulse counts");

    auto make_problem = [&](int nbaths) {
        LmProblem prob;
        prob.n_residuals = npts;
        prob.residuals = [&curves, nbaths](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
            BathSet bs;
            for (int k = 0; k < nbaths; ++k) bs.baths.push_back({std::exp(p(2 * k)), std::exp(p(2 * k + 1))});
            Eigen::Index i = 0;
            for (const auto& c : curves)
                for (size_t j = 0; j < c.total_times.size(); ++j) {
                    double chi = 0.0;
                    for (const auto& b : bs.baths) chi += exact_exponent_one(c.total_times[j], c.n_pulses, b);
                    r(i++) = std::exp(-chi) - c.signal[j];
                }
        };
        return prob;
    };

    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> jitter(-0.5, 0.5);

    struct Candidate {
        LmResult fit;
        int nbaths;
    };
    std::vector<Candidate> found;
    int starts = 0;
    auto run = [&](int nbaths, const std::vector<double>& start) {
        const LmProblem prob = make_problem(nbaths);
        for (int d = 0; d <= opt.jitter_draws; ++d) {
            Eigen::VectorXd x0(2 * nbaths);
            for (int k = 0; k < 2 * nbaths; ++k)
                x0(k) = std::log(start[static_cast<size_t>(k)]) + (d == 0 ? 0.0 : jitter(rng));
            ++starts;
            try {
                LmOptions lo;
                lo.max_iterations = 300;
                found.push_back({levenberg_marquardt(prob, x0, {}, lo), nbaths});
            } catch (const FitError&) {
            }
        }
    };

    for (double tf : {0.3, 3.0})
        for (double ts : {300.0, 3000.0})
            for (double bf : {2.0, 20.0})
                for (double bsl : {60.0, 400.0}) run(2, {bf, tf, bsl, ts});
    for (double tau : {1.0, 30.0, 1000.0})
        for (double b : {10.0, 100.0}) run(1, {b, tau});
    if (found.empty()) throw FitError("fit_baths: no start produced a finite fit", Eigen::VectorXd());

    auto best_of = [&](int nb) -> const Candidate* {
        const Candidate* best = nullptr;
        for (const auto& c : found)
            if (c.nbaths == nb && (!best || c.fit.cost < best->fit.cost)) best = &c;
        return best;
    };
    const Candidate* two = best_of(2);
    const Candidate* one = best_of(1);
    const Candidate* pick = two;
    // A second bath has to earn its parameters.
    if (one && (!two || one->fit.cost <= 1.05 * two->fit.cost + 1e-14 * npts)) pick = one;
    if (!pick) throw FitError("fit_baths: no converged fit", Eigen::VectorXd());

    BathFit out;
    out.residual = pick->fit.cost;
    out.starts = starts;
    for (int k = 0; k < pick->nbaths; ++k)
        out.baths.baths.push_back({std::exp(pick->fit.params(2 * k)), std::exp(pick->fit.params(2 * k + 1))});
    std::sort(out.baths.baths.begin(), out.baths.baths.end(),
              [](const LorentzianBath& a, const LorentzianBath& b) { return a.correlation_tau < b.correlation_tau; });
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(pick->fit.jacobian);
    const auto sv = svd.singularValues();
    out.condition_number = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : std::numeric_limits<double>::infinity();
    return out;
}

std::vector<CoherenceCurve> synthetic_curves(const BathSet& baths, const std::vector<int>& pulse_counts,
                                             const std::vector<double>& t2_fractions, double noise_sigma,
                                             std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<CoherenceCurve> out;
    for (int n : pulse_counts) {
        CoherenceCurve c;
        c.n_pulses = n;
        const double t2 = model_t2(n, baths);
        for (double f : t2_fractions) {
            const double t = f * t2;
            c.total_times.push_back(t);
            double v = std::exp(-decay_exponent_exact(t, n, baths));
            if (noise_sigma > 0.0) v += noise_sigma * noise(rng);
            c.signal.push_back(v);
        }
        out.push_back(std::move(c));
    }
    return out;
}

double deer_coherence(double t, int n_pulses, const BathSet& baths, std::optional<std::size_t> flipped_bath,
                      CoherenceMethod method) {
    check_pulses(n_pulses);
    baths.validate();
    if (flipped_bath && *flipped_bath >= baths.baths.size())
        throw std::invalid_argument("deer_coherence: flipped bath index out of range");
    if (!flipped_bath) return coherence(t, n_pulses, baths, method);

    BathSet echoed;
    for (size_t i = 0; i < baths.baths.size(); ++i)
        if (i != *flipped_bath) echoed.baths.push_back(baths.baths[i]);
    const LorentzianBath& flip = baths.baths[*flipped_bath];

    double chi = 0.0;
    if (method == CoherenceMethod::TimeDomain) {
        for (const auto& b : echoed.baths) chi += exact_exponent_one(t, n_pulses, b);
        chi += exact_exponent_one(t, 0, flip);
    } else {
        if (!echoed.baths.empty()) chi += decay_exponent(t, n_pulses, echoed);
        auto f = [&](double w) { return flip.spectrum(w) * free_evolution_filter(t, w); };
        chi += spectral_integral(f, 2.0 * kPi / t, flip.correlation_tau, QuadratureOptions{});
    }
    return std::exp(-chi);
}

double deer_t2(int n_pulses, const BathSet& baths, std::optional<std::size_t> flipped_bath) {
    auto f = [&](double t) { return -std::log(deer_coherence(t, n_pulses, baths, flipped_bath)) - 1.0; };
    return find_increasing_root(f, 1.0, 1e12);
}

double surface_density(double b_khz, const std::vector<double>& distances_nm) {
    if (!(b_khz > 0.0)) throw std::invalid_argument("surface_density: b must be positive");
    if (distances_nm.empty()) throw std::invalid_argument("surface_density: no distances");
    double sum_d2 = 0.0;
    for (double d : distances_nm) {
        if (!(d > 0.0)) throw std::invalid_argument("surface_density: distances must be positive");
        sum_d2 += d * d * 1e-18;
    }
    const double k = dipolar_constant(BathMoment::Electron);
    const double root = b_khz * 1e3 * 4.0 * kPi * sum_d2 / k;  // sqrt(pi sigma / 4)
    return 4.0 / kPi * root * root * 1e-18;
}

double surface_noise_strength(double sigma_per_nm2, const std::vector<double>& distances_nm) {
    if (!(sigma_per_nm2 > 0.0)) throw std::invalid_argument("surface_noise_strength: density must be positive");
    double sum_d2 = 0.0;
    for (double d : distances_nm) sum_d2 += d * d * 1e-18;
    const double k = dipolar_constant(BathMoment::Electron);
    return k / (4.0 * kPi * sum_d2) * std::sqrt(kPi * sigma_per_nm2 * 1e18 / 4.0) * 1e-3;
}

BulkDensity bulk_density(double b_khz, BathMoment moment, double exclusion_nm) {
    if (!(b_khz > 0.0)) throw std::invalid_argument("bulk_density: b must be positive");
    if (!(exclusion_nm > 0.0)) throw std::invalid_argument("bulk_density: exclusion radius must be positive");
    const double k = dipolar_constant(moment);
    const double d0 = exclusion_nm * 1e-9;
    const double b = b_khz * 1e3;
    BulkDensity out;
    out.per_nm3 = 192.0 * kPi * d0 * d0 * d0 * b * b / (k * k) * 1e-27;
    out.atomic_fraction = out.per_nm3 / kDiamondAtomsPerNm3;
    return out;
}

double bulk_noise_strength(double rho_per_nm3, BathMoment moment, double exclusion_nm) {
    const double k = dipolar_constant(moment);
    const double d0 = exclusion_nm * 1e-9;
    return std::sqrt(k * k * rho_per_nm3 * 1e27 / (192.0 * kPi * d0 * d0 * d0)) * 1e-3;
}

double rabi_frequency(double power_w, double calibration_mhz_per_sqrt_w) {
    if (!(power_w >= 0.0)) throw std::invalid_argument("rabi_frequency: power must be non-negative");
    return calibration_mhz_per_sqrt_w * std::sqrt(power_w);
}

}  // namespace sivnode
