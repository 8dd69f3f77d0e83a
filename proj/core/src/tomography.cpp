#include "sivnode/tomography.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace sivnode {

namespace {

constexpr double kSumTolerance = 1e-9;
constexpr double kNegativeFlag = -1e-6;

void check_distribution(const std::array<double, 4>& p, const char* what) {
    double s = 0.0;
    for (double v : p) {
        if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument(std::string(what) + ": probabilities must lie in [0, 1]");
        s += v;
    }
    if (std::abs(s - 1.0) > kSumTolerance) throw std::invalid_argument(std::string(what) + ": probabilities must sum to 1");
}

std::array<double, 4> normalized_counts(const std::array<std::uint64_t, 4>& c, const char* what) {
    const double total = static_cast<double>(std::accumulate(c.begin(), c.end(), std::uint64_t{0}));
    if (total <= 0.0) throw std::invalid_argument(std::string(what) + ": histogram is empty");
    std::array<double, 4> p{};
    for (int i = 0; i < 4; ++i) p[i] = static_cast<double>(c[i]) / total;
    return p;
}

Eigen::Vector4d to_vec(const std::array<double, 4>& a) { return {a[0], a[1], a[2], a[3]}; }

std::array<double, 4> clamp_normalize(const Eigen::Vector4d& v, CorrectedData& out) {
    std::array<double, 4> r{};
    double s = 0.0;
    for (int i = 0; i < 4; ++i) {
        out.most_negative = std::min(out.most_negative, v[i]);
        r[i] = std::max(0.0, v[i]);
        s += r[i];
    }
    if (out.most_negative < kNegativeFlag) out.negative = true;
    if (s <= 0.0) throw std::domain_error("readout correction: corrected distribution vanished");
    for (double& x : r) x /= s;
    return r;
}

CorrectedData correct_with(const CorrelationData& d, const Eigen::Matrix4d& m) {
    d.validate();
    const Eigen::Matrix4d inv = m.inverse();
    CorrectedData out;
    out.data.zz = clamp_normalize(inv * to_vec(d.zz), out);
    out.data.xx = clamp_normalize(inv * to_vec(d.xx), out);
    out.data.zz_shots = d.zz_shots;
    out.data.xx_shots = d.xx_shots;
    return out;
}

// Multiplicative updates for max sum_j n_j log (A t)_j over the simplex.
// For column-stochastic A every step stays normalized and never lowers the
// likelihood.
struct ColumnFit {
    Eigen::Vector4d t;
    double log_likelihood = 0.0;
    int iterations = 0;
};

double column_log_likelihood(const Eigen::Matrix4d& a, const Eigen::Vector4d& t, const Eigen::Vector4d& n) {
    const Eigen::Vector4d q = a * t;
    double ll = 0.0;
    for (int j = 0; j < 4; ++j) {
        if (n[j] == 0.0) continue;
        if (q[j] <= 0.0) return -std::numeric_limits<double>::infinity();
        ll += n[j] * std::log(q[j]);
    }
    return ll;
}

ColumnFit fit_column(const Eigen::Matrix4d& a, const Eigen::Vector4d& n, Eigen::Vector4d t, const CnotMleOptions& opt) {
    const double total = n.sum();
    ColumnFit fit;
    for (int it = 0; it < opt.max_iterations; ++it) {
        const Eigen::Vector4d q = a * t;
        Eigen::Vector4d ratio;
        for (int j = 0; j < 4; ++j) ratio[j] = n[j] == 0.0 ? 0.0 : n[j] / (total * std::max(q[j], 1e-300));
        Eigen::Vector4d next = t.cwiseProduct(a.transpose() * ratio);
        next /= next.sum();
        const double step = (next - t).cwiseAbs().maxCoeff();
        t = next;
        fit.iterations = it + 1;
        if (step < opt.tolerance) break;
    }
    fit.t = t;
    fit.log_likelihood = column_log_likelihood(a, t, n);
    return fit;
}

Eigen::Matrix4d column_normalize(const std::vector<OutcomeCounts>& runs, const char* what) {
    Eigen::Matrix4d m;
    for (int k = 0; k < 4; ++k) {
        const std::array<double, 4> p = normalized_counts(runs[static_cast<size_t>(k)], what);
        for (int j = 0; j < 4; ++j) m(j, k) = p[j];
    }
    return m;
}

struct MleCore {
    Eigen::Matrix4d transfer;
    double log_likelihood = 0.0;
    int iterations = 0;
};

MleCore solve_mle(const std::vector<OutcomeCounts>& control, const std::vector<OutcomeCounts>& gate,
                  const CnotMleOptions& opt, std::mt19937_64& rng) {
    const Eigen::Matrix4d a = column_normalize(control, "cnot_mle control run");
    if (std::abs(a.determinant()) < 1e-12) throw std::domain_error("cnot_mle: control data are singular");
    MleCore core;
    std::normal_distribution<double> logit(0.0, 1.0);
    for (int k = 0; k < 4; ++k) {
        Eigen::Vector4d n;
        for (int j = 0; j < 4; ++j) n[j] = static_cast<double>(gate[static_cast<size_t>(k)][static_cast<size_t>(j)]);
        if (n.sum() <= 0.0) throw std::invalid_argument("cnot_mle gate run: histogram is empty");
        ColumnFit best;
        best.log_likelihood = -std::numeric_limits<double>::infinity();
        for (int s = 0; s < opt.starts; ++s) {
            // Softmax of Gaussian logits keeps every start strictly interior.
            Eigen::Vector4d t;
            for (int j = 0; j < 4; ++j) t[j] = s == 0 ? 0.0 : logit(rng);
            t = t.array().exp();
            t /= t.sum();
            ColumnFit f = fit_column(a, n, t, opt);
            core.iterations += f.iterations;
            if (f.log_likelihood > best.log_likelihood) best = f;
        }
        core.transfer.col(k) = best.t;
        core.log_likelihood += best.log_likelihood;
    }
    return core;
}

OutcomeCounts resample(const OutcomeCounts& c, std::mt19937_64& rng) {
    std::uint64_t left = std::accumulate(c.begin(), c.end(), std::uint64_t{0});
    std::uint64_t weight = left;
    OutcomeCounts out{};
    for (size_t j = 0; j < 3; ++j) {
        const double p = weight > 0 ? std::min(1.0, static_cast<double>(c[j]) / static_cast<double>(weight)) : 0.0;
        std::binomial_distribution<std::uint64_t> draw(left, p);
        out[j] = draw(rng);
        left -= out[j];
        weight -= c[j];
    }
    out[3] = left;
    return out;
}

}  // namespace

void CorrelationData::validate() const {
    check_distribution(zz, "correlation data (Z basis)");
    check_distribution(xx, "correlation data (X basis)");
}

CorrelationData CorrelationData::from_histograms(const Histogram& z, const Histogram& x) {
    if (z.basis != Basis::Z || x.basis != Basis::X)
        throw std::invalid_argument("correlation data: need one Z and one X histogram");
    CorrelationData d;
    d.zz = normalized_counts(z.counts, "correlation data (Z basis)");
    d.xx = normalized_counts(x.counts, "correlation data (X basis)");
    d.zz_shots = z.total();
    d.xx_shots = x.total();
    return d;
}

CorrelationData CorrelationData::from_probabilities(const std::array<double, 4>& zz, const std::array<double, 4>& xx) {
    CorrelationData d;
    d.zz = zz;
    d.xx = xx;
    d.validate();
    return d;
}

double min_eigenvalue(const Eigen::Matrix4cd& rho) {
    const Eigen::Matrix4cd h = 0.5 * (rho + rho.adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

void validate_density_matrix(const Eigen::Matrix4cd& rho, double tol) {
    if (!rho.allFinite()) throw std::invalid_argument("density matrix: non-finite entries");
    if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > tol) throw std::invalid_argument("density matrix: not Hermitian");
    if (std::abs(rho.trace() - 1.0) > tol) throw std::invalid_argument("density matrix: trace differs from 1");
    if (min_eigenvalue(rho) < -tol) throw std::invalid_argument("density matrix: negative eigenvalue");
}

double xx_coherence(const CorrelationData& d) { return 0.5 * (d.xx[0] + d.xx[3] - d.xx[1] - d.xx[2]); }

Reconstruction rho_from_correlations(const CorrelationData& d) {
    d.validate();
    Reconstruction r;
    for (int i = 0; i < 4; ++i) r.rho(i, i) = d.zz[static_cast<size_t>(i)];
    r.raw_coherence = xx_coherence(d);
    const double limit = std::sqrt(d.zz[1] * d.zz[2]);
    r.coherence = r.raw_coherence;
    if (std::abs(r.raw_coherence) > limit) {
        r.coherence = std::copysign(limit, r.raw_coherence);
        r.clipped = true;
    }
    r.rho(1, 2) = r.coherence;
    r.rho(2, 1) = r.coherence;
    return r;
}

double fidelity_bell(const CorrelationData& d, BellSign sign, FidelityIndexing indexing) {
    const Reconstruction r = rho_from_correlations(d);
    const double c = sign == BellSign::Plus ? r.coherence : -r.coherence;
    const double pops = indexing == FidelityIndexing::Consistent ? d.zz[1] + d.zz[2] : d.zz[0] + d.zz[3];
    return std::clamp(0.5 * pops + c, 0.0, 1.0);
}

double fidelity_bell(const Eigen::Matrix4cd& rho, BellSign sign) {
    const Eigen::Vector4cd psi = bell_target(sign == BellSign::Plus ? 0.0 : M_PI);
    return std::clamp(std::real(psi.dot(rho * psi)), 0.0, 1.0);
}

double concurrence_wootters(const Eigen::Matrix4cd& rho) {
    validate_density_matrix(rho);
    Eigen::Matrix4cd yy = Eigen::Matrix4cd::Zero();
    yy(0, 3) = -1.0;
    yy(1, 2) = 1.0;
    yy(2, 1) = 1.0;
    yy(3, 0) = -1.0;
    // The square roots of the spectrum of rho tilde are the singular values of
    // sqrt(rho) yy conj(sqrt(rho)); taking them directly avoids square roots
    // of near-zero eigenvalues.
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(0.5 * (rho + rho.adjoint()));
    const Eigen::Vector4d ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const Eigen::Matrix4cd sq = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
    const Eigen::JacobiSVD<Eigen::Matrix4cd> svd(sq * yy * sq.conjugate());
    std::array<double, 4> l{};
    for (int i = 0; i < 4; ++i) l[static_cast<size_t>(i)] = svd.singularValues()[i];
    std::sort(l.begin(), l.end(), std::greater<>());
    return std::clamp(l[0] - l[1] - l[2] - l[3], 0.0, 1.0);
}

double concurrence_bound(const CorrelationData& d) {
    const Reconstruction r = rho_from_correlations(d);
    return std::max(0.0, 2.0 * (std::abs(r.coherence) - std::sqrt(d.zz[0] * d.zz[3])));
}

void ReadoutFidelities::validate() const {
    auto check = [](double f, const char* name) {
        if (!(f > 0.5 && f <= 1.0))
            throw std::invalid_argument(std::string("readout fidelities: ") + name + " must lie in (0.5, 1]");
    };
    check(f_up_e, "f_up_e");
    check(f_down_e, "f_down_e");
    if (f_up_n) check(*f_up_n, "f_up_n");
    if (f_down_n) check(*f_down_n, "f_down_n");
}

Eigen::Matrix2d spin_confusion(double f_up, double f_down) {
    Eigen::Matrix2d m;
    m << f_up, 1.0 - f_down, 1.0 - f_up, f_down;
    return m;
}

Eigen::Matrix4d spin_photon_confusion(const ReadoutFidelities& f) {
    f.validate();
    Eigen::Matrix4d m = Eigen::Matrix4d::Zero();
    const Eigen::Matrix2d s = spin_confusion(f.f_up_e, f.f_down_e);
    m.block<2, 2>(0, 0) = s;
    m.block<2, 2>(2, 2) = s;
    return m;
}

Eigen::Matrix4d electron_nuclear_confusion(const ReadoutFidelities& f) {
    f.validate();
    if (!f.f_up_n || !f.f_down_n) throw std::invalid_argument("readout fidelities: nuclear fidelities required");
    const Eigen::Matrix2d e = spin_confusion(f.f_up_e, f.f_down_e);
    const Eigen::Matrix2d n = spin_confusion(*f.f_up_n, *f.f_down_n);
    Eigen::Matrix4d m;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) m.block<2, 2>(2 * i, 2 * j) = e(i, j) * n;
    return m;
}

CorrelationData apply_confusion(const CorrelationData& d, const Eigen::Matrix4d& m) {
    CorrelationData out = d;
    const Eigen::Vector4d z = m * to_vec(d.zz);
    const Eigen::Vector4d x = m * to_vec(d.xx);
    for (int i = 0; i < 4; ++i) {
        out.zz[static_cast<size_t>(i)] = z[i];
        out.xx[static_cast<size_t>(i)] = x[i];
    }
    return out;
}

CorrectedData correct_readout_spin_photon(const CorrelationData& d, const ReadoutFidelities& f) {
    return correct_with(d, spin_photon_confusion(f));
}

CorrectedData correct_readout_electron_nuclear(const CorrelationData& d, const ReadoutFidelities& f) {
    return correct_with(d, electron_nuclear_confusion(f));
}

double en_concurrence_bound(const CorrelationData& d) {
    d.validate();
    const double contrast = d.xx[0] + d.xx[3] - d.xx[1] - d.xx[2];
    return std::max(0.0, contrast - 4.0 * std::sqrt(d.zz[0] * d.zz[3]));
}

Eigen::Matrix4d cnot_permutation() {
    Eigen::Matrix4d p = Eigen::Matrix4d::Zero();
    p(0, 0) = 1.0;
    p(1, 1) = 1.0;
    p(3, 2) = 1.0;
    p(2, 3) = 1.0;
    return p;
}

CnotEstimate cnot_mle(const std::vector<OutcomeCounts>& control_runs, const std::vector<OutcomeCounts>& gate_runs,
                      const CnotMleOptions& opt) {
    if (control_runs.size() < 4 || gate_runs.size() < 4)
        throw std::invalid_argument("cnot_mle: all four initializations are required");
    if (control_runs.size() != 4 || gate_runs.size() != 4)
        throw std::invalid_argument("cnot_mle: expected exactly four initializations");
    if (opt.starts < 1) throw std::invalid_argument("cnot_mle: starts must be >= 1");
    if (opt.bootstrap_resamples < 0) throw std::invalid_argument("cnot_mle: bootstrap_resamples must be >= 0");

    std::mt19937_64 rng(opt.seed);
    const MleCore core = solve_mle(control_runs, gate_runs, opt, rng);
    CnotEstimate est;
    est.transfer = core.transfer;
    est.log_likelihood = core.log_likelihood;
    est.iterations = core.iterations;
    if (opt.bootstrap_resamples == 0) return est;

    CnotMleOptions inner = opt;
    inner.starts = 1;
    std::vector<Eigen::Matrix4d> draws;
    draws.reserve(static_cast<size_t>(opt.bootstrap_resamples));
    for (int b = 0; b < opt.bootstrap_resamples; ++b) {
        std::vector<OutcomeCounts> c(4), g(4);
        for (size_t k = 0; k < 4; ++k) {
            c[k] = resample(control_runs[k], rng);
            g[k] = resample(gate_runs[k], rng);
        }
        try {
            draws.push_back(solve_mle(c, g, inner, rng).transfer);
        } catch (const std::domain_error&) {
            // Singular resampled control: skip the draw.
        }
    }
    if (draws.size() < 2) return est;
    std::vector<double> v(draws.size());
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            for (size_t b = 0; b < draws.size(); ++b) v[b] = draws[b](i, j);
            const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
            double var = 0.0;
            for (double x : v) var += (x - mean) * (x - mean);
            est.std_error(i, j) = std::sqrt(var / static_cast<double>(v.size() - 1));
            std::sort(v.begin(), v.end());
            auto pct = [&](double q) { return v[static_cast<size_t>(std::floor(q * static_cast<double>(v.size() - 1)))]; };
            est.lower(i, j) = pct(0.025);
            est.upper(i, j) = pct(0.975);
        }
    return est;
}

}  // namespace sivnode
