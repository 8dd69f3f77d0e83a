#include "sivnode/cavity_qed.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "sivnode/levmar.hpp"

namespace sivnode {

namespace {
using cd = std::complex<double>;
const cd I1{0.0, 1.0};
}  // namespace

CavityAtomParams CavityAtomParams::from_ghz(double kappa_in_ghz, double kappa_total_ghz, double f_cavity_ghz,
                                            double f_atom_ghz, double g_ghz, double gamma_ghz) {
    return {kTwoPi * kappa_in_ghz, kTwoPi * kappa_total_ghz, kTwoPi * f_cavity_ghz,
            kTwoPi * f_atom_ghz,   kTwoPi * g_ghz,           kTwoPi * gamma_ghz};
}

void CavityAtomParams::validate() const {
    if (!(kappa_in > 0.0 && kappa_in <= kappa_total))
        throw std::invalid_argument("cavity: need 0 < kappa_in <= kappa_total");
    if (!(g_coupling >= 0.0)) throw std::invalid_argument("cavity: g_coupling must be >= 0");
    if (!(gamma_atom > 0.0)) throw std::invalid_argument("cavity: gamma_atom must be > 0");
}

std::array<double, CavityAtomParams::kParamCount> CavityAtomParams::as_array() const {
    return {kappa_in, kappa_total, omega_cavity, omega_atom, g_coupling, gamma_atom};
}

CavityAtomParams CavityAtomParams::from_array(const std::array<double, kParamCount>& a) {
    return {a[0], a[1], a[2], a[3], a[4], a[5]};
}

cd reflection_amplitude(double omega, const CavityAtomParams& p) {
    const cd atom = I1 * (omega - p.omega_atom) + 0.5 * p.gamma_atom;
    const cd denom = I1 * (omega - p.omega_cavity) + 0.5 * p.kappa_total + p.g_coupling * p.g_coupling / atom;
    return 1.0 - p.kappa_in / denom;
}

double reflectance(double omega, const CavityAtomParams& p) {
    const double r = std::norm(reflection_amplitude(omega, p));
    return (r > 1.0 && r < 1.0 + 1e-9) ? 1.0 : r;
}

double purcell_linewidth(const CavityAtomParams& p) {
    const double det = p.omega_cavity - p.omega_atom;
    const double k = p.kappa_total;
    return p.gamma_atom + (4.0 * p.g_coupling * p.g_coupling / k) / (1.0 + 4.0 * det * det / (k * k));
}

double cooperativity(const CavityAtomParams& p) {
    return 4.0 * p.g_coupling * p.g_coupling / (p.kappa_total * p.gamma_atom);
}

void SpectrumTrace::validate() const {
    if (frequencies_ghz.size() != reflectance.size())
        throw std::invalid_argument("spectrum: frequency and reflectance lengths differ");
    if (!sigma.empty() && sigma.size() != frequencies_ghz.size())
        throw std::invalid_argument("spectrum: sigma length differs");
    for (size_t i = 1; i < frequencies_ghz.size(); ++i)
        if (!(frequencies_ghz[i] > frequencies_ghz[i - 1]))
            throw std::invalid_argument("spectrum: frequencies must be strictly increasing");
}

SpectrumTrace sample_spectrum(const CavityAtomParams& p, const std::vector<double>& f) {
    SpectrumTrace t;
    t.frequencies_ghz = f;
    t.reflectance.reserve(f.size());
    for (double x : f) t.reflectance.push_back(reflectance(kTwoPi * x, p));
    return t;
}

SpinSpectrum spin_spectrum(const CavityAtomParams& p_up, const CavityAtomParams& p_down,
                           const std::vector<double>& f) {
    SpinSpectrum s;
    s.up = sample_spectrum(p_up, f);
    s.down = sample_spectrum(p_down, f);
    s.contrast.resize(f.size());
    for (size_t i = 0; i < f.size(); ++i) s.contrast[i] = std::abs(s.up.reflectance[i] - s.down.reflectance[i]);
    return s;
}

ProbePoint optimal_probe(const CavityAtomParams& p_up, const CavityAtomParams& p_down,
                         const std::vector<double>& f) {
    if (f.empty()) throw std::invalid_argument("optimal_probe: empty frequency grid");
    const double mid = 0.5 * (p_up.omega_atom + p_down.omega_atom) / kTwoPi;
    ProbePoint best;
    best.f_q_ghz = f.front();
    best.peak_contrast = -1.0;
    for (double x : f) {
        const double c = std::abs(reflectance(kTwoPi * x, p_up) - reflectance(kTwoPi * x, p_down));
        const bool better = c > best.peak_contrast;
        const bool tie = c == best.peak_contrast && std::abs(x - mid) < std::abs(best.f_q_ghz - mid);
        if (better || tie) {
            best.peak_contrast = c;
            best.f_q_ghz = x;
        }
    }
    best.degenerate = best.peak_contrast <= 0.0;
    return best;
}

SpectrumFit fit_spectrum(const SpectrumTrace& trace, const CavityAtomParams& initial,
                         const std::array<bool, CavityAtomParams::kParamCount>& frozen) {
    trace.validate();
    const size_t n = trace.frequencies_ghz.size();
    if (n < 5) throw std::invalid_argument("fit_spectrum: need at least 5 points");
    const auto [mn, mx] = std::minmax_element(trace.reflectance.begin(), trace.reflectance.end());
    if (*mx - *mn <= 0.0) throw std::invalid_argument("fit_spectrum: constant trace carries no lineshape");

    std::vector<double> w(n, 1.0);
    if (!trace.sigma.empty())
        for (size_t i = 0; i < n; ++i) w[i] = 1.0 / trace.sigma[i];

    auto unpack = [](const Eigen::VectorXd& x) {
        std::array<double, CavityAtomParams::kParamCount> a{};
        for (int k = 0; k < CavityAtomParams::kParamCount; ++k) a[k] = x(k);
        return CavityAtomParams::from_array(a);
    };

    LmProblem prob;
    prob.n_residuals = static_cast<int>(n);
    prob.residuals = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r) {
        const CavityAtomParams p = unpack(x);
        for (size_t i = 0; i < n; ++i)
            r(static_cast<Eigen::Index>(i)) =
                w[i] * (std::norm(reflection_amplitude(kTwoPi * trace.frequencies_ghz[i], p)) - trace.reflectance[i]);
    };
    prob.jacobian = [&](const Eigen::VectorXd& x, Eigen::MatrixXd& j) {
        const CavityAtomParams p = unpack(x);
        for (size_t i = 0; i < n; ++i) {
            const double om = kTwoPi * trace.frequencies_ghz[i];
            const cd a = I1 * (om - p.omega_atom) + 0.5 * p.gamma_atom;
            const cd d = I1 * (om - p.omega_cavity) + 0.5 * p.kappa_total + p.g_coupling * p.g_coupling / a;
            const cd r = 1.0 - p.kappa_in / d;
            const cd dr_dd = p.kappa_in / (d * d);
            const cd da_coef = -p.g_coupling * p.g_coupling / (a * a);
            const std::array<cd, 6> dr = {
                -1.0 / d,                          // kappa_in
                dr_dd * 0.5,                       // kappa_total
                dr_dd * (-I1),                     // omega_cavity
                dr_dd * da_coef * (-I1),           // omega_atom
                dr_dd * (2.0 * p.g_coupling / a),  // g
                dr_dd * da_coef * 0.5,             // gamma
            };
            for (int k = 0; k < 6; ++k)
                j(static_cast<Eigen::Index>(i), k) = w[i] * 2.0 * std::real(std::conj(r) * dr[k]);
        }
    };

    Eigen::VectorXd x0(CavityAtomParams::kParamCount);
    const auto a0 = initial.as_array();
    for (int k = 0; k < CavityAtomParams::kParamCount; ++k) x0(k) = a0[k];

    const std::vector<bool> mask(frozen.begin(), frozen.end());
    LmResult res = levenberg_marquardt(prob, x0, mask);
    if (!res.converged) throw FitError("fit_spectrum: " + res.message, res.params);

    // R depends on kappa_in mostly through (kappa_total/2 - kappa_in), so the
    // fit can settle on the mirrored coupling branch. Restart there and keep
    // the better of the two.
    const int ki = static_cast<int>(CavityParam::KappaIn), kt = static_cast<int>(CavityParam::KappaTotal);
    if (!frozen[ki] && res.params(kt) > res.params(ki)) {
        Eigen::VectorXd mirrored = res.params;
        mirrored(ki) = res.params(kt) - res.params(ki);
        const LmResult alt = levenberg_marquardt(prob, mirrored, mask);
        if (alt.converged && alt.cost < res.cost) res = alt;
    }

    SpectrumFit out;
    out.params = unpack(res.params);
    out.params.g_coupling = std::abs(out.params.g_coupling);
    out.residual = res.cost;
    out.iterations = res.iterations;
    return out;
}

TwoStageFit fit_two_stage(const SpectrumTrace& detuned, const SpectrumTrace& resonant,
                          const CavityAtomParams& initial) {
    TwoStageFit out;
    CavityAtomParams bare = initial;
    bare.g_coupling = 0.0;
    out.cavity = fit_spectrum(detuned, bare, {false, false, false, true, true, true});
    CavityAtomParams second = out.cavity.params;
    second.g_coupling = initial.g_coupling;
    second.omega_atom = initial.omega_atom;
    second.gamma_atom = initial.gamma_atom;
    out.coupled = fit_spectrum(resonant, second, {true, true, true, false, false, true});
    return out;
}

SpectrumTrace with_relative_noise(const SpectrumTrace& t, double sigma, std::uint64_t seed) {
    if (!(sigma >= 0.0)) throw std::invalid_argument("with_relative_noise: sigma must be >= 0");
    SpectrumTrace out = t;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    out.sigma.assign(t.reflectance.size(), 0.0);
    for (size_t i = 0; i < t.reflectance.size(); ++i) {
        out.reflectance[i] = t.reflectance[i] * (1.0 + sigma * gauss(rng));
        out.sigma[i] = std::max(1e-6, sigma * t.reflectance[i]);
    }
    return out;
}

std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> v(static_cast<size_t>(std::max(n, 0)));
    if (n == 1) {
        v[0] = a;
        return v;
    }
    for (int i = 0; i < n; ++i) v[static_cast<size_t>(i)] = a + (b - a) * i / (n - 1);
    return v;
}

}  // namespace sivnode
