#include "sivnode/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <thread>

namespace sivnode {

namespace {

const cplx_t I1{0.0, 1.0};

Eigen::Matrix4cd carve_operator(cplx_t r_up, cplx_t r_down, PhotonBin bin) {
    Eigen::Matrix4cd k = Eigen::Matrix4cd::Identity();
    const int b = static_cast<int>(bin);
    k(2 * b, 2 * b) = r_up;
    k(2 * b + 1, 2 * b + 1) = r_down;
    return k;
}

Eigen::Matrix4cd spin_flip_operator() {
    Eigen::Matrix4cd x = Eigen::Matrix4cd::Zero();
    for (int b = 0; b < 2; ++b) {
        x(2 * b, 2 * b + 1) = 1.0;
        x(2 * b + 1, 2 * b) = 1.0;
    }
    return x;
}

void check_amplitude(cplx_t r) {
    if (std::abs(r) > 1.0 + 1e-12) throw std::invalid_argument("carve: |r| must not exceed 1");
}

Eigen::Vector4cd product(const Eigen::Vector2cd& photon, const Eigen::Vector2cd& spin) {
    Eigen::Vector4cd v;
    for (int p = 0; p < 2; ++p)
        for (int s = 0; s < 2; ++s) v(2 * p + s) = photon(p) * spin(s);
    return v;
}

std::uint64_t binomial_draw(std::uint64_t n, double p, std::mt19937_64& rng) {
    if (n == 0 || p <= 0.0) return 0;
    if (p >= 1.0) return n;
    std::binomial_distribution<std::uint64_t> d(n, p);
    return d(rng);
}

Histogram simulate_shard(const ExperimentConfig& cfg, Basis basis, const std::array<double, 4>& joint,
                         double p_det, std::uint64_t shots, std::mt19937_64& rng) {
    Histogram h;
    h.basis = basis;
    h.attempts = shots;
    std::poisson_distribution<int> source(cfg.qubit.mean_photons);
    std::discrete_distribution<int> outcome(joint.begin(), joint.end());
    std::bernoulli_distribution dark(cfg.dark_count_probability);
    std::uniform_int_distribution<int> coin(0, 1);
    for (std::uint64_t i = 0; i < shots; ++i) {
        const int n = cfg.qubit.mean_photons > 0.0 ? source(rng) : 0;
        const std::uint64_t signal = binomial_draw(static_cast<std::uint64_t>(n), p_det, rng);
        const bool noise = cfg.dark_count_probability > 0.0 && dark(rng);
        const std::uint64_t detections = signal + (noise ? 1 : 0);
        if (detections == 0) continue;
        if (detections > 1) {
            ++h.double_heralds;
            continue;
        }
        int photon, spin;
        if (signal == 1) {
            const int k = outcome(rng);
            photon = k / 2;
            spin = k % 2;
        } else {
            photon = coin(rng);
            spin = coin(rng);
        }
        const bool declared_up = simulate_spin_readout(spin == 0, cfg.readout, rng).declared_up;
        ++h.counts[static_cast<size_t>(2 * photon + (declared_up ? 0 : 1))];
    }
    return h;
}

}  // namespace

void TimeBinQubit::validate() const {
    if (!(pulse_width > 0.0 && pulse_width < bin_delay))
        throw std::invalid_argument("time-bin qubit: need 0 < pulse_width < bin_delay");
    if (!(mean_photons >= 0.0)) throw std::invalid_argument("time-bin qubit: mean_photons must be >= 0");
}

JointState JointState::initial(const TimeBinQubit& q) {
    const double h = 1.0 / std::sqrt(2.0);
    JointState s;
    s.amplitudes = product(Eigen::Vector2cd(h, h * std::exp(I1 * q.relative_phase)), Eigen::Vector2cd(h, h));
    return s;
}

MixedJointState MixedJointState::from_pure(const JointState& s) {
    MixedJointState m;
    m.rho = s.amplitudes * s.amplitudes.adjoint();
    m.loss = s.loss;
    return m;
}

JointState carve_step(const JointState& s, cplx_t r_up, cplx_t r_down, PhotonBin bin) {
    check_amplitude(r_up);
    check_amplitude(r_down);
    JointState out;
    out.amplitudes = carve_operator(r_up, r_down, bin) * s.amplitudes;
    out.loss = s.loss + (s.amplitudes.squaredNorm() - out.amplitudes.squaredNorm());
    return out;
}

MixedJointState carve_step(const MixedJointState& s, cplx_t r_up, cplx_t r_down, PhotonBin bin) {
    check_amplitude(r_up);
    check_amplitude(r_down);
    const Eigen::Matrix4cd k = carve_operator(r_up, r_down, bin);
    MixedJointState out;
    out.rho = k * s.rho * k.adjoint();
    out.loss = s.loss + std::real(s.rho.trace() - out.rho.trace());
    return out;
}

JointState apply_spin_flip(const JointState& s) {
    JointState out = s;
    out.amplitudes = spin_flip_operator() * s.amplitudes;
    return out;
}

MixedJointState apply_spin_flip(const MixedJointState& s, double depolarizing) {
    if (!(depolarizing >= 0.0 && depolarizing <= 1.0))
        throw std::invalid_argument("depolarizing probability must lie in [0, 1]");
    const Eigen::Matrix4cd x = spin_flip_operator();
    MixedJointState out = s;
    // Partial trace over the spin, then tensor with the maximally mixed spin.
    Eigen::Matrix4cd mixed = Eigen::Matrix4cd::Zero();
    for (int p = 0; p < 2; ++p)
        for (int q = 0; q < 2; ++q) {
            const cplx_t tr = s.rho(2 * p, 2 * q) + s.rho(2 * p + 1, 2 * q + 1);
            mixed(2 * p, 2 * q) = 0.5 * tr;
            mixed(2 * p + 1, 2 * q + 1) = 0.5 * tr;
        }
    out.rho = (1.0 - depolarizing) * x * s.rho * x.adjoint() + depolarizing * mixed;
    return out;
}

Eigen::Vector4cd bell_target(double phase) {
    Eigen::Vector4cd v = Eigen::Vector4cd::Zero();
    v(1) = 1.0 / std::sqrt(2.0);
    v(2) = std::exp(I1 * phase) / std::sqrt(2.0);
    return v;
}

BellResult run_bell_sequence(const TimeBinQubit& q, cplx_t r_up, cplx_t r_down, double mw_depolarizing) {
    q.validate();
    MixedJointState s = MixedJointState::from_pure(JointState::initial(q));
    s = carve_step(s, r_up, r_down, PhotonBin::Early);
    s = apply_spin_flip(s, mw_depolarizing);
    s = carve_step(s, r_up, r_down, PhotonBin::Late);
    BellResult out;
    out.herald_probability = std::real(s.rho.trace());
    if (out.herald_probability <= 0.0) throw std::domain_error("run_bell_sequence: no photon survives carving");
    out.rho = s.rho / out.herald_probability;
    const Eigen::Vector4cd t = bell_target(q.relative_phase);
    out.fidelity = std::real(t.dot(out.rho * t));
    return out;
}

std::string to_string(Basis b) { return b == Basis::Z ? "Z" : "X"; }

Basis basis_from_string(const std::string& s) {
    if (s == "Z" || s == "z" || s == "ZZ") return Basis::Z;
    if (s == "X" || s == "x" || s == "XX") return Basis::X;
    throw std::invalid_argument("unknown basis: " + s);
}

std::array<double, 4> joint_distribution(const Eigen::Matrix4cd& rho, Basis basis, double interferometer_phase) {
    const double tr = std::real(rho.trace());
    if (!(tr > 0.0)) throw std::invalid_argument("joint_distribution: state has zero weight");
    std::array<double, 4> out{};
    if (basis == Basis::Z) {
        for (int k = 0; k < 4; ++k) out[static_cast<size_t>(k)] = std::real(rho(k, k)) / tr;
        return out;
    }
    const double h = 1.0 / std::sqrt(2.0);
    const cplx_t ph = std::exp(-I1 * interferometer_phase);
    const std::array<Eigen::Vector2cd, 2> photon = {Eigen::Vector2cd(h, h * ph), Eigen::Vector2cd(h, -h * ph)};
    const std::array<Eigen::Vector2cd, 2> spin = {Eigen::Vector2cd(h, h), Eigen::Vector2cd(h, -h)};
    for (int p = 0; p < 2; ++p)
        for (int s = 0; s < 2; ++s) {
            const Eigen::Vector4cd v = product(photon[static_cast<size_t>(p)], spin[static_cast<size_t>(s)]);
            out[static_cast<size_t>(2 * p + s)] = std::real(v.dot(rho * v)) / tr;
        }
    return out;
}

PhotonDistribution measure_photon(const Eigen::Matrix4cd& rho, Basis basis, double interferometer_phase) {
    const auto j = joint_distribution(rho, basis, interferometer_phase);
    PhotonDistribution d;
    d.p = {j[0] + j[1], j[2] + j[3]};
    d.acceptance = basis == Basis::X ? kInterferometerAcceptance : 1.0;
    return d;
}

std::uint64_t Histogram::total() const {
    std::uint64_t s = 0;
    for (auto c : counts) s += c;
    return s;
}

Histogram& Histogram::operator+=(const Histogram& o) {
    if (o.basis != basis) throw std::invalid_argument("histogram merge: basis mismatch");
    for (size_t k = 0; k < counts.size(); ++k) counts[k] += o.counts[k];
    attempts += o.attempts;
    double_heralds += o.double_heralds;
    return *this;
}

void ExperimentConfig::validate() const {
    qubit.validate();
    readout.validate();
    if (shots == 0) throw std::invalid_argument("experiment: shots must be > 0");
    if (!(collection_efficiency > 0.0 && collection_efficiency <= 1.0))
        throw std::invalid_argument("experiment: collection_efficiency must lie in (0, 1]");
    if (!(dark_count_probability >= 0.0 && dark_count_probability <= 1.0))
        throw std::invalid_argument("experiment: dark_count_probability must lie in [0, 1]");
    if (!(mw_depolarizing >= 0.0 && mw_depolarizing <= 1.0))
        throw std::invalid_argument("experiment: mw_depolarizing must lie in [0, 1]");
    if (shards < 1 || workers < 1) throw std::invalid_argument("experiment: shards and workers must be >= 1");
}

double detection_probability(const ExperimentConfig& cfg, Basis basis) {
    const BellResult b = run_bell_sequence(cfg.qubit, cfg.r_up, cfg.r_down, cfg.mw_depolarizing);
    return cfg.collection_efficiency * b.herald_probability * (basis == Basis::X ? kInterferometerAcceptance : 1.0);
}

std::array<double, 4> expected_cell_probabilities(const ExperimentConfig& cfg, Basis basis) {
    const BellResult b = run_bell_sequence(cfg.qubit, cfg.r_up, cfg.r_down, cfg.mw_depolarizing);
    const auto j = joint_distribution(b.rho, basis, cfg.interferometer_phase);
    const ReadoutFidelity f = readout_fidelity(cfg.readout);
    std::array<double, 4> out{};
    for (int p = 0; p < 2; ++p) {
        const double up = j[static_cast<size_t>(2 * p)], down = j[static_cast<size_t>(2 * p + 1)];
        out[static_cast<size_t>(2 * p)] = f.f_up * up + (1.0 - f.f_down) * down;
        out[static_cast<size_t>(2 * p + 1)] = (1.0 - f.f_up) * up + f.f_down * down;
    }
    return out;
}

std::vector<Histogram> run_experiment(const ExperimentConfig& cfg, const std::vector<Basis>& bases) {
    cfg.validate();
    const BellResult bell = run_bell_sequence(cfg.qubit, cfg.r_up, cfg.r_down, cfg.mw_depolarizing);
    std::vector<Histogram> out;
    for (Basis basis : bases) {
        const auto joint = joint_distribution(bell.rho, basis, cfg.interferometer_phase);
        const double p_det = cfg.collection_efficiency * bell.herald_probability *
                             (basis == Basis::X ? kInterferometerAcceptance : 1.0);
        const auto nshards = static_cast<size_t>(cfg.shards);
        std::vector<Histogram> parts(nshards);
        auto work = [&](size_t shard) {
            std::uint64_t n = cfg.shots / nshards + (shard < cfg.shots % nshards ? 1 : 0);
            std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed & 0xffffffffu), static_cast<std::uint32_t>(cfg.seed >> 32),
                              static_cast<std::uint32_t>(basis == Basis::Z ? 0 : 1), static_cast<std::uint32_t>(shard)};
            std::mt19937_64 rng(seq);
            parts[shard] = simulate_shard(cfg, basis, joint, p_det, n, rng);
        };
        const size_t nworkers = std::min(nshards, static_cast<size_t>(cfg.workers));
        if (nworkers <= 1) {
            for (size_t s = 0; s < nshards; ++s) work(s);
        } else {
            std::vector<std::thread> pool;
            for (size_t w = 0; w < nworkers; ++w)
                pool.emplace_back([&, w] {
                    for (size_t s = w; s < nshards; s += nworkers) work(s);
                });
            for (auto& t : pool) t.join();
        }
        Histogram total;
        total.basis = basis;
        for (const auto& p : parts) total += p;
        out.push_back(total);
    }
    return out;
}

BootstrapResult bootstrap(const std::vector<Histogram>& hs, int resamples, std::uint64_t seed,
                          const HistogramStatistic& statistic) {
    if (resamples < 100) throw std::invalid_argument("bootstrap: need at least 100 resamples");
    if (hs.empty()) throw std::invalid_argument("bootstrap: no histograms");
    for (const auto& h : hs)
        if (h.total() == 0) throw std::invalid_argument("bootstrap: empty histogram");
    std::mt19937_64 rng(seed);
    std::vector<double> values;
    values.reserve(static_cast<size_t>(resamples));
    std::vector<Histogram> draw = hs;
    for (int r = 0; r < resamples; ++r) {
        for (size_t i = 0; i < hs.size(); ++i) {
            std::uint64_t remaining = hs[i].total();
            double mass = 1.0;
            for (size_t k = 0; k < 4; ++k) {
                const double p = static_cast<double>(hs[i].counts[k]) / static_cast<double>(hs[i].total());
                const std::uint64_t c =
                    k == 3 ? remaining : binomial_draw(remaining, mass > 0.0 ? std::min(1.0, p / mass) : 0.0, rng);
                draw[i].counts[k] = c;
                remaining -= c;
                mass -= p;
            }
        }
        values.push_back(statistic(draw));
    }
    BootstrapResult out;
    for (double v : values) out.mean += v;
    out.mean /= static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std_error = std::sqrt(ss / static_cast<double>(values.size() - 1));
    return out;
}

}  // namespace sivnode
