#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sivnode/readout.hpp"

namespace sivnode {

using cplx_t = std::complex<double>;

// Photon-spin basis index is 2 * bin + spin with bin 0 = early, 1 = late and
// spin 0 = up, 1 = down.
struct TimeBinQubit {
    double bin_delay = 30.0;   // ns
    double pulse_width = 5.0;  // ns
    double relative_phase = 0.0;
    double mean_photons = 0.008;

    void validate() const;
};

enum class PhotonBin { Early = 0, Late = 1 };

struct JointState {
    Eigen::Vector4cd amplitudes = Eigen::Vector4cd::Zero();
    double loss = 0.0;  // weight of the unreflected channel

    double total_probability() const { return amplitudes.squaredNorm() + loss; }
    // (|e> + e^{i phase}|l>)/sqrt2 with spin (|up> + |down>)/sqrt2.
    static JointState initial(const TimeBinQubit& q);
};

struct MixedJointState {
    Eigen::Matrix4cd rho = Eigen::Matrix4cd::Zero();
    double loss = 0.0;

    double total_probability() const { return std::real(rho.trace()) + loss; }
    static MixedJointState from_pure(const JointState& s);
};

// Multiplies the addressed bin by the spin-conditioned reflection amplitude;
// the removed weight goes to the loss channel.
JointState carve_step(const JointState& s, cplx_t r_up, cplx_t r_down, PhotonBin bin);
MixedJointState carve_step(const MixedJointState& s, cplx_t r_up, cplx_t r_down, PhotonBin bin);

// Spin pi pulse followed by a depolarizing channel of probability p.
JointState apply_spin_flip(const JointState& s);
MixedJointState apply_spin_flip(const MixedJointState& s, double depolarizing);

struct BellResult {
    Eigen::Matrix4cd rho;  // conditioned on the photon surviving
    double herald_probability = 0.0;
    double fidelity = 0.0;  // against bell_target(relative_phase)
};

// (|e down> + e^{i phase}|l up>)/sqrt2
Eigen::Vector4cd bell_target(double phase = 0.0);

BellResult run_bell_sequence(const TimeBinQubit& q, cplx_t r_up, cplx_t r_down, double mw_depolarizing);

enum class Basis { Z, X };
std::string to_string(Basis b);
Basis basis_from_string(const std::string& s);

inline constexpr double kInterferometerAcceptance = 0.25;

struct PhotonDistribution {
    std::array<double, 2> p{};  // Z: {e, l}; X: {+, -}
    double acceptance = 1.0;    // fraction of detections falling in the usable window
};

// X-basis detector '+' projects onto (|e> + e^{-i theta}|l>)/sqrt2.
PhotonDistribution measure_photon(const Eigen::Matrix4cd& rho, Basis basis, double interferometer_phase = 0.0);

// Joint distribution over (photon outcome, true spin outcome), index
// 2 * photon + spin. In X the spin outcome 0 is (|up> + |down>)/sqrt2.
std::array<double, 4> joint_distribution(const Eigen::Matrix4cd& rho, Basis basis,
                                         double interferometer_phase = 0.0);

struct Histogram {
    Basis basis = Basis::Z;
    std::array<std::uint64_t, 4> counts{};  // index 2 * photon outcome + declared spin
    std::uint64_t attempts = 0;
    std::uint64_t double_heralds = 0;

    std::uint64_t total() const;
    Histogram& operator+=(const Histogram& o);
};

struct ExperimentConfig {
    TimeBinQubit qubit;
    cplx_t r_up{1.0, 0.0};
    cplx_t r_down{0.31622776601683794, 0.0};  // 10% spurious reflection
    double mw_depolarizing = 0.10;
    double collection_efficiency = 0.4;
    double dark_count_probability = 0.0;  // per detection window
    double interferometer_phase = 0.0;
    ReadoutModel readout = ReadoutModel::spin_photon_preset();
    std::uint64_t shots = 1000000;  // per basis
    std::uint64_t seed = 1;
    int shards = 16;
    int workers = 1;

    void validate() const;
};

// Heralds on exactly one detection. Shard seeds depend only on (seed, basis,
// shard), so results do not depend on the worker count.
std::vector<Histogram> run_experiment(const ExperimentConfig& cfg, const std::vector<Basis>& bases);

// Single-photon herald probability per attempt photon (before <n>).
double detection_probability(const ExperimentConfig& cfg, Basis basis);

// Exact heralded cell probabilities including readout confusion.
std::array<double, 4> expected_cell_probabilities(const ExperimentConfig& cfg, Basis basis);

struct BootstrapResult {
    double mean = 0.0;
    double std_error = 0.0;
};

using HistogramStatistic = std::function<double(const std::vector<Histogram>&)>;

// Multinomial resampling of the cells of every histogram independently.
BootstrapResult bootstrap(const std::vector<Histogram>& hs, int resamples, std::uint64_t seed,
                          const HistogramStatistic& statistic);

}  // namespace sivnode
