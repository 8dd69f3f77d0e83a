#pragma once

#include <array>
#include <complex>

#include <Eigen/Dense>

namespace sivnode {

// Bohr magneton in GHz per tesla. Every spin-model energy is an ordinary
// frequency in GHz.
inline constexpr double kBohrMagnetonGHzPerTesla = 13.996;

using cplx = std::complex<double>;
using Matrix4c = Eigen::Matrix<cplx, 4, 4>;
using Vector4c = Eigen::Matrix<cplx, 4, 1>;

// One manifold (ground or excited) of the SiV orbital doublet.
struct SivParameters {
    double lambda_so = 25.0;           // spin-orbit half splitting, GHz
    double strain_alpha = 0.0;         // axial strain energy, GHz
    double strain_beta = 0.0;          // transverse strain energy, GHz
    double strain_gamma = 0.0;         // transverse strain energy, GHz
    double zeeman_orbital = kBohrMagnetonGHzPerTesla;       // GHz/T
    double zeeman_spin = 2.0 * kBohrMagnetonGHzPerTesla;    // GHz/T
    double ham_reduction = 0.1;
    double strain_susceptibility = 1.7e6;  // GHz per unit strain

    void validate() const;

    // Single-component strain model: beta = f * eps_zx, alpha = gamma = 0.
    static SivParameters ground(double eps_zx = 0.0);
    static SivParameters excited(double eps_zx = 0.0);
    SivParameters with_strain(double eps_zx) const;
};

struct MagneticField {
    double magnitude = 0.0;        // tesla
    double polar_angle = 0.0;      // rad from the symmetry axis
    double azimuthal_angle = 0.0;  // rad

    static MagneticField axial(double tesla) { return {tesla, 0.0, 0.0}; }
    // Folds negative magnitudes and out-of-range angles into the canonical
    // range [0,pi] x [0,2pi).
    MagneticField normalized() const;
    Eigen::Vector3d vector() const;
    void validate() const;
};

// Basis order {|ey up>, |ey dn>, |ex up>, |ex dn>}.
Matrix4c build_hamiltonian(const SivParameters& p, const MagneticField& b);

struct LevelStructure {
    std::array<double, 4> energies{};  // ascending, GHz
    Matrix4c states;                    // column k belongs to energies[k]
    // Spin-up weight of each eigenvector, used for labelling.
    std::array<double, 4> spin_up_weight{};
};

// Degenerate pairs (Kramers doublets) are rotated so that each member has
// extremal spin-up weight; within a doublet the spin-down-like state comes
// first when the two are degenerate.
LevelStructure diagonalize(const SivParameters& p, const MagneticField& b);

// Doublet gap at zero field, 2*sqrt(beta^2 + gamma^2 + lambda^2).
double ground_splitting(const SivParameters& p);

// Inverse of ground_splitting for the single-component strain model.
double strain_from_splitting(double splitting_ghz, double lambda_so, double susceptibility);

struct LowerDoublet {
    double up = 0.0;    // energy of the spin-up-like lower-branch state
    double down = 0.0;  // energy of the spin-down-like lower-branch state
};

LowerDoublet lower_doublet(const SivParameters& p, const MagneticField& b);

// Signed lower-branch splitting E(up) - E(down), GHz.
double qubit_frequency(const SivParameters& p, const MagneticField& b);

struct TransitionSet {
    double f_qubit = 0.0;
    double f_up_up = 0.0;      // relative to the zero-field line centre
    double f_down_down = 0.0;  // relative to the zero-field line centre
    double optical_splitting = 0.0;
};

TransitionSet transitions(const SivParameters& gs, const SivParameters& es, const MagneticField& b);

// g = f_qubit / (mu_B * |B|). Throws std::domain_error at zero field.
double effective_g(const SivParameters& p, const MagneticField& b);

// Normalised lower-branch orbital part for one spin, in (e_x, e_y) order.
struct OrbitalMix {
    cplx ex;
    cplx ey;
    cplx ratio() const { return ey / ex; }
};

struct OrbitalComposition {
    OrbitalMix up;
    OrbitalMix down;
};

OrbitalComposition orbital_composition(const SivParameters& p);

struct StrainShift {
    double df_mw = 0.0;       // GHz
    double df_optical = 0.0;  // GHz
};

// Closed-form strain-fluctuation shifts for relative fluctuation xi.
// df_mw is reported as a positive magnitude for positive b_axial: it is the
// amount by which the qubit frequency moves toward the free-electron value
// when the strain grows by the fraction xi. df_optical is the signed change
// of the lower-to-lower optical line.
StrainShift strain_sensitivity(const SivParameters& gs, const SivParameters& es, double eps_zx,
                               double xi, double b_axial);

// Spin-averaged lower-branch optical line (excited minus ground), GHz.
double optical_line(const SivParameters& gs, const SivParameters& es, const MagneticField& b);

}  // namespace sivnode
