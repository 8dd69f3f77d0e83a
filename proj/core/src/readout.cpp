#include "sivnode/readout.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "sivnode/quadrature.hpp"

namespace sivnode {

namespace {

double poisson_pmf(double mu, int k) {
    if (mu == 0.0) return k == 0 ? 1.0 : 0.0;
    return std::exp(k * std::log(mu) - mu - std::lgamma(k + 1.0));
}

double poisson_cdf(double mu, int k) {
    double s = 0.0;
    for (int j = 0; j <= k; ++j) s += poisson_pmf(mu, j);
    return std::min(1.0, s);
}

double binomial_pmf(int n, int k, double p) {
    if (k < 0 || k > n) return 0.0;
    if (p == 0.0) return k == 0 ? 1.0 : 0.0;
    if (p == 1.0) return k == n ? 1.0 : 0.0;
    return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) + k * std::log(p) +
                    (n - k) * std::log1p(-p));
}

// Distribution of the number of scatters before the cycle ends.
std::vector<double> cycle_length_pmf(const ReadoutModel& m) {
    const double mu = m.mean_detected_bright / m.collection_efficiency;
    const double q = m.spin_flip_per_scatter;
    const int lmax = static_cast<int>(mu + 12.0 * std::sqrt(mu + 1.0) + 40.0);
    std::vector<double> out(static_cast<size_t>(lmax) + 1, 0.0);
    double n_ge = 1.0;  // P(N >= l)
    for (int l = 0; l <= lmax; ++l) {
        const double pn = poisson_pmf(mu, l);
        const double g_gt = std::pow(1.0 - q, l);                          // P(G > l)
        const double g_eq = l == 0 ? 0.0 : q * std::pow(1.0 - q, l - 1);  // P(G = l)
        out[static_cast<size_t>(l)] = pn * g_gt + g_eq * n_ge;
        n_ge -= pn;
        if (n_ge < 0.0) n_ge = 0.0;
    }
    return out;
}

}  // namespace

void ReadoutModel::validate() const {
    if (!(mean_detected_bright >= 0.0)) throw std::invalid_argument("readout: mean_detected_bright must be >= 0");
    if (!(spin_flip_per_scatter >= 0.0 && spin_flip_per_scatter <= 1.0))
        throw std::invalid_argument("readout: spin_flip_per_scatter must lie in [0, 1]");
    if (!(collection_efficiency > 0.0 && collection_efficiency <= 1.0))
        throw std::invalid_argument("readout: collection_efficiency must lie in (0, 1]");
    if (!(dark_counts >= 0.0)) throw std::invalid_argument("readout: dark_counts must be >= 0");
    if (threshold < 1) throw std::invalid_argument("readout: threshold must be >= 1");
}

double bright_count_probability(const ReadoutModel& m, int count) {
    m.validate();
    const std::vector<double> lpmf = cycle_length_pmf(m);
    double p = 0.0;
    for (int c = 0; c <= count; ++c) {
        double thinned = 0.0;
        for (size_t l = 0; l < lpmf.size(); ++l)
            thinned += lpmf[l] * binomial_pmf(static_cast<int>(l), c, m.collection_efficiency);
        p += thinned * poisson_pmf(m.dark_counts, count - c);
    }
    return p;
}

ReadoutFidelity readout_fidelity(const ReadoutModel& m) {
    m.validate();
    ReadoutFidelity f;
    double below = 0.0;
    for (int k = 0; k < m.threshold; ++k) below += bright_count_probability(m, k);
    f.f_up = std::clamp(1.0 - below, 0.0, 1.0);
    f.f_down = poisson_cdf(m.dark_counts, m.threshold - 1);
    return f;
}

ReadoutModel ReadoutModel::calibrated(double f_up, double f_down, int threshold, double flip_per_scatter,
                                      double efficiency) {
    if (!(f_up > 0.0 && f_up < 1.0 && f_down > 0.0 && f_down < 1.0))
        throw std::invalid_argument("readout calibration: fidelities must lie in (0, 1)");
    ReadoutModel m;
    m.threshold = threshold;
    m.spin_flip_per_scatter = flip_per_scatter;
    m.collection_efficiency = efficiency;
    m.validate();
    m.dark_counts = find_increasing_root(
        [&](double mu) { return (1.0 - poisson_cdf(mu, threshold - 1)) - (1.0 - f_down); }, 0.1, 1e4);
    m.mean_detected_bright = find_increasing_root(
        [&](double mean) {
            ReadoutModel t = m;
            t.mean_detected_bright = mean;
            return readout_fidelity(t).f_up - f_up;
        },
        1.0, 1e5);
    return m;
}

ReadoutModel ReadoutModel::spin_photon_preset() { return calibrated(0.85, 0.84, 1, 0.01, 0.4); }
ReadoutModel ReadoutModel::misaligned_field_preset() { return calibrated(0.92, 0.92, 2, 0.02, 0.4); }
ReadoutModel ReadoutModel::aligned_field_preset() { return calibrated(0.97, 0.97, 13, 0.002, 0.4); }

ReadoutShot simulate_spin_readout(bool spin_up, const ReadoutModel& m, std::mt19937_64& rng) {
    int counts = 0;
    if (spin_up) {
        std::poisson_distribution<int> probe(m.mean_detected_bright / m.collection_efficiency);
        const int n = probe(rng);
        int scatters = n;
        if (m.spin_flip_per_scatter > 0.0) {
            // Failures before the flipping scatter, so the flip happens on scatter g + 1.
            std::geometric_distribution<int> flip(m.spin_flip_per_scatter);
            scatters = std::min(n, flip(rng) + 1);
        }
        std::binomial_distribution<int> det(scatters, m.collection_efficiency);
        counts += det(rng);
    }
    if (m.dark_counts > 0.0) {
        std::poisson_distribution<int> dark(m.dark_counts);
        counts += dark(rng);
    }
    return {counts >= m.threshold, counts};
}

ReadoutShot simulate_spin_readout(double p_up, const ReadoutModel& m, std::mt19937_64& rng) {
    std::bernoulli_distribution pick(std::clamp(p_up, 0.0, 1.0));
    return simulate_spin_readout(pick(rng), m, rng);
}

ReadoutFidelity estimate_readout_fidelity(const ReadoutModel& m, std::uint64_t shots, std::uint64_t seed) {
    m.validate();
    if (shots == 0) throw std::invalid_argument("estimate_readout_fidelity: shots must be > 0");
    std::mt19937_64 rng(seed);
    std::uint64_t up_ok = 0, down_ok = 0;
    for (std::uint64_t i = 0; i < shots; ++i) {
        if (simulate_spin_readout(true, m, rng).declared_up) ++up_ok;
        if (!simulate_spin_readout(false, m, rng).declared_up) ++down_ok;
    }
    return {static_cast<double>(up_ok) / shots, static_cast<double>(down_ok) / shots};
}

}  // namespace sivnode
