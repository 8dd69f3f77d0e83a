#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "sivnode/protocol.hpp"

namespace sivnode {

// Two-qubit correlation probabilities conditioned on a herald.
//
// Spin-photon layout: zz index 2 * bin + spin with bin {e, l} and spin
// {up, down}, i.e. (e up, e down, l up, l down); xx index 2 * photon + spin
// with photon {+, -} and spin {->, <-}.
// Electron-nuclear layout: zz index 2 * electron + nucleus over {up, down},
// xx index 2 * electron + nucleus over {->, <-}.
struct CorrelationData {
    std::array<double, 4> zz{};
    std::array<double, 4> xx{};
    std::uint64_t zz_shots = 0;
    std::uint64_t xx_shots = 0;

    void validate() const;

    static CorrelationData from_histograms(const Histogram& z, const Histogram& x);
    // Probabilities from a forward model, e.g. joint_distribution.
    static CorrelationData from_probabilities(const std::array<double, 4>& zz, const std::array<double, 4>& xx);
};

inline constexpr double kDensityTolerance = 1e-9;

// Throws std::invalid_argument unless rho is Hermitian, unit trace and PSD
// within tol.
void validate_density_matrix(const Eigen::Matrix4cd& rho, double tol = kDensityTolerance);
double min_eigenvalue(const Eigen::Matrix4cd& rho);

struct Reconstruction {
    Eigen::Matrix4cd rho = Eigen::Matrix4cd::Zero();
    double coherence = 0.0;      // after clipping
    double raw_coherence = 0.0;  // straight from the X contrast
    bool clipped = false;
};

// Diagonal from Z, the single e-down/l-up coherence from the X contrast,
// every other coherence zero.
Reconstruction rho_from_correlations(const CorrelationData& d);

// X contrast 2c = p(+,->) + p(-,<-) - p(+,<-) - p(-,->), halved.
double xx_coherence(const CorrelationData& d);

enum class BellSign { Plus, Minus };
enum class FidelityIndexing {
    Consistent,  // populations e-down, l-up matching the target state
    Literal,     // the mixed-index closed form (p_e_up + p_l_down + 2c)/2
};

// Fidelity to (|e down> +/- |l up>)/sqrt2 from the reconstructed state.
double fidelity_bell(const CorrelationData& d, BellSign sign = BellSign::Plus,
                     FidelityIndexing indexing = FidelityIndexing::Consistent);
double fidelity_bell(const Eigen::Matrix4cd& rho, BellSign sign = BellSign::Plus);

// Wootters concurrence with the conjugated spin flip.
double concurrence_wootters(const Eigen::Matrix4cd& rho);

// max(0, 2(|c| - sqrt(p_e_up p_l_down))) with the clipped coherence.
double concurrence_bound(const CorrelationData& d);

struct ReadoutFidelities {
    double f_up_e = 1.0;
    double f_down_e = 1.0;
    std::optional<double> f_up_n;
    std::optional<double> f_down_n;

    void validate() const;
};

// Confusion matrices mapping true to declared probabilities in the layout
// above (up before down).
Eigen::Matrix2d spin_confusion(double f_up, double f_down);
Eigen::Matrix4d spin_photon_confusion(const ReadoutFidelities& f);
Eigen::Matrix4d electron_nuclear_confusion(const ReadoutFidelities& f);

struct CorrectedData {
    CorrelationData data;
    bool negative = false;       // a corrected probability fell below -1e-6
    double most_negative = 0.0;  // before clamping
};

CorrectedData correct_readout_spin_photon(const CorrelationData& d, const ReadoutFidelities& f);
CorrectedData correct_readout_electron_nuclear(const CorrelationData& d, const ReadoutFidelities& f);

// Applies a confusion matrix to both bases (forward model).
CorrelationData apply_confusion(const CorrelationData& d, const Eigen::Matrix4d& m);

// p(->->) + p(<-<-) - p(-><-) - p(<-->) - 4 sqrt(p(up up) p(down down)),
// floored at 0.
double en_concurrence_bound(const CorrelationData& d);

// Outcome counts for one initialization, indexed like the zz layout.
using OutcomeCounts = std::array<std::uint64_t, 4>;

struct CnotMleOptions {
    std::uint64_t seed = 1;
    int starts = 4;
    int max_iterations = 200000;
    double tolerance = 1e-14;
    int bootstrap_resamples = 200;  // 0 disables the intervals
};

struct CnotEstimate {
    Eigen::Matrix4d transfer;  // column k: outcome distribution for input k
    double log_likelihood = 0.0;
    Eigen::Matrix4d std_error = Eigen::Matrix4d::Zero();
    Eigen::Matrix4d lower = Eigen::Matrix4d::Zero();  // 2.5 percentile
    Eigen::Matrix4d upper = Eigen::Matrix4d::Zero();  // 97.5 percentile
    int iterations = 0;
};

// Maximum likelihood column-stochastic T with gate data for input k
// distributed as A T e_k, where A is the column-normalized control data.
CnotEstimate cnot_mle(const std::vector<OutcomeCounts>& control_runs, const std::vector<OutcomeCounts>& gate_runs,
                      const CnotMleOptions& opt = {});

Eigen::Matrix4d cnot_permutation();

}  // namespace sivnode
