#include "sivnode/spin_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace sivnode {

namespace {

const cplx I1{0.0, 1.0};

// Orbital 2x2 blocks are embedded with the spin as the inner index.
Matrix4c kron_orbital_spin(const Eigen::Matrix2cd& orb, const Eigen::Matrix2cd& spin) {
    Matrix4c out;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int s = 0; s < 2; ++s)
                for (int t = 0; t < 2; ++t) out(2 * a + s, 2 * b + t) = orb(a, b) * spin(s, t);
    return out;
}

double spin_up_weight(const Vector4c& v) { return std::norm(v(0)) + std::norm(v(2)); }

}  // namespace

void SivParameters::validate() const {
    if (!(lambda_so > 0.0)) throw std::invalid_argument("lambda_so must be positive");
    if (!(ham_reduction > 0.0 && ham_reduction <= 1.0))
        throw std::invalid_argument("ham_reduction must lie in (0, 1]");
    if (!(strain_susceptibility > 0.0))
        throw std::invalid_argument("strain_susceptibility must be positive");
    if (!std::isfinite(strain_alpha) || !std::isfinite(strain_beta) || !std::isfinite(strain_gamma))
        throw std::invalid_argument("strain components must be finite");
}

SivParameters SivParameters::ground(double eps_zx) {
    SivParameters p;
    p.lambda_so = 25.0;
    p.strain_susceptibility = 1.7e6;
    return p.with_strain(eps_zx);
}

SivParameters SivParameters::excited(double eps_zx) {
    SivParameters p;
    p.lambda_so = 125.0;
    p.strain_susceptibility = 3.4e6;
    return p.with_strain(eps_zx);
}

SivParameters SivParameters::with_strain(double eps_zx) const {
    SivParameters p = *this;
    p.strain_alpha = 0.0;
    p.strain_gamma = 0.0;
    p.strain_beta = strain_susceptibility * eps_zx;
    return p;
}

MagneticField MagneticField::normalized() const {
    constexpr double pi = std::numbers::pi;
    Eigen::Vector3d v = vector();
    MagneticField out;
    out.magnitude = v.norm();
    if (out.magnitude == 0.0) return out;
    out.polar_angle = std::acos(std::clamp(v.z() / out.magnitude, -1.0, 1.0));
    double phi = std::atan2(v.y(), v.x());
    if (phi < 0.0) phi += 2.0 * pi;
    if (phi >= 2.0 * pi) phi -= 2.0 * pi;
    out.azimuthal_angle = phi;
    return out;
}

Eigen::Vector3d MagneticField::vector() const {
    const double st = std::sin(polar_angle);
    return {magnitude * st * std::cos(azimuthal_angle), magnitude * st * std::sin(azimuthal_angle),
            magnitude * std::cos(polar_angle)};
}

void MagneticField::validate() const {
    if (!(magnitude >= 0.0) || !std::isfinite(magnitude))
        throw std::invalid_argument("field magnitude must be finite and non-negative");
}

Matrix4c build_hamiltonian(const SivParameters& p, const MagneticField& b) {
    Eigen::Matrix2cd so_orb;  // -lambda L_z S_z written as orbital block times sigma_z
    so_orb << 0.0, I1, -I1, 0.0;
    Eigen::Matrix2cd sz, sx, sy, id2;
    sz << 1.0, 0.0, 0.0, -1.0;
    sx << 0.0, 1.0, 1.0, 0.0;
    sy << 0.0, -I1, I1, 0.0;
    id2.setIdentity();

    Matrix4c h = -p.lambda_so * kron_orbital_spin(so_orb, sz);

    Eigen::Matrix2cd strain;
    strain << p.strain_alpha - p.strain_beta, p.strain_gamma, p.strain_gamma,
        p.strain_alpha + p.strain_beta;
    h += kron_orbital_spin(strain, id2);

    const Eigen::Vector3d bv = b.vector();
    // Orbital moment lies along the symmetry axis, so only B_z enters here.
    h += p.ham_reduction * p.zeeman_orbital * bv.z() * kron_orbital_spin(so_orb, id2);
    const Eigen::Matrix2cd spin = bv.x() * sx + bv.y() * sy + bv.z() * sz;
    h += 0.5 * p.zeeman_spin * kron_orbital_spin(id2, spin);
    return h;
}

LevelStructure diagonalize(const SivParameters& p, const MagneticField& b) {
    const Matrix4c h = build_hamiltonian(p, b);
    Eigen::SelfAdjointEigenSolver<Matrix4c> es(h);
    LevelStructure out;
    out.states = es.eigenvectors();
    for (int k = 0; k < 4; ++k) out.energies[k] = es.eigenvalues()(k);

    const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
    for (int k = 0; k < 4; k += 2) {
        if (std::abs(out.energies[k + 1] - out.energies[k]) > 1e-9 * scale) continue;
        // Degenerate doublet: pick the basis diagonalising the spin-up projector.
        Eigen::Matrix<cplx, 4, 2> v = out.states.middleCols(k, 2);
        Eigen::Matrix2cd pu;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                pu(i, j) = std::conj(v(0, i)) * v(0, j) + std::conj(v(2, i)) * v(2, j);
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> ps(pu);
        out.states.middleCols(k, 2) = v * ps.eigenvectors();
        const double mean = 0.5 * (out.energies[k] + out.energies[k + 1]);
        out.energies[k] = out.energies[k + 1] = mean;
    }
    for (int k = 0; k < 4; ++k) out.spin_up_weight[k] = spin_up_weight(out.states.col(k));
    return out;
}

double ground_splitting(const SivParameters& p) {
    return 2.0 * std::sqrt(p.strain_beta * p.strain_beta + p.strain_gamma * p.strain_gamma +
                           p.lambda_so * p.lambda_so);
}

double strain_from_splitting(double splitting_ghz, double lambda_so, double susceptibility) {
    const double half = 0.5 * splitting_ghz;
    if (half < lambda_so)
        throw std::domain_error("splitting below the zero-strain value 2*lambda");
    return std::sqrt(half * half - lambda_so * lambda_so) / susceptibility;
}

LowerDoublet lower_doublet(const SivParameters& p, const MagneticField& b) {
    const LevelStructure ls = diagonalize(p, b);
    LowerDoublet d;
    if (ls.spin_up_weight[0] >= ls.spin_up_weight[1]) {
        d.up = ls.energies[0];
        d.down = ls.energies[1];
    } else {
        d.up = ls.energies[1];
        d.down = ls.energies[0];
    }
    return d;
}

double qubit_frequency(const SivParameters& p, const MagneticField& b) {
    Eigen::SelfAdjointEigenSolver<Matrix4c> es(build_hamiltonian(p, b), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(1) - es.eigenvalues()(0);
}

TransitionSet transitions(const SivParameters& gs, const SivParameters& es, const MagneticField& b) {
    const LowerDoublet g = lower_doublet(gs, b);
    const LowerDoublet e = lower_doublet(es, b);
    const LowerDoublet g0 = lower_doublet(gs, MagneticField{});
    const LowerDoublet e0 = lower_doublet(es, MagneticField{});
    const double zpl = e0.up - g0.up;
    TransitionSet t;
    t.f_qubit = qubit_frequency(gs, b);
    t.f_up_up = (e.up - g.up) - zpl;
    t.f_down_down = (e.down - g.down) - zpl;
    t.optical_splitting = t.f_up_up - t.f_down_down;
    return t;
}

double effective_g(const SivParameters& p, const MagneticField& b) {
    if (!(b.magnitude > 0.0)) throw std::domain_error("effective g needs a non-zero field");
    return qubit_frequency(p, b) / (kBohrMagnetonGHzPerTesla * b.magnitude);
}

OrbitalComposition orbital_composition(const SivParameters& p) {
    // Lower eigenvector of each spin block [[a-b, g -/+ i l], [g +/- i l, a+b]].
    // Written without dividing by beta so that the zero-strain limit is regular.
    const double s = std::sqrt(p.strain_beta * p.strain_beta + p.strain_gamma * p.strain_gamma +
                               p.lambda_so * p.lambda_so);
    auto mix = [&](double spin_sign) {
        const cplx off = p.strain_gamma + spin_sign * I1 * p.lambda_so;  // <ex|H|ey>
        cplx ey = -(s + p.strain_beta);
        cplx ex = off;
        if (std::abs(ey) < 1e-300 && std::abs(ex) < 1e-300) ex = 1.0;
        const double n = std::sqrt(std::norm(ex) + std::norm(ey));
        return OrbitalMix{ex / n, ey / n};
    };
    return {mix(+1.0), mix(-1.0)};
}

StrainShift strain_sensitivity(const SivParameters& gs, const SivParameters& es, double eps_zx,
                               double xi, double b_axial) {
    const double bg = gs.strain_susceptibility * eps_zx;
    const double be = es.strain_susceptibility * eps_zx;
    const double lg = gs.lambda_so;
    const double le = es.lambda_so;
    StrainShift out;
    out.df_mw = 2.0 * bg * bg * lg * b_axial * gs.ham_reduction * gs.zeeman_orbital /
                std::pow(bg * bg + lg * lg, 1.5) * xi;
    out.df_optical = (bg * bg / std::sqrt(bg * bg + lg * lg) - be * be / std::sqrt(be * be + le * le)) * xi;
    return out;
}

double optical_line(const SivParameters& gs, const SivParameters& es, const MagneticField& b) {
    Eigen::SelfAdjointEigenSolver<Matrix4c> g(build_hamiltonian(gs, b), Eigen::EigenvaluesOnly);
    Eigen::SelfAdjointEigenSolver<Matrix4c> e(build_hamiltonian(es, b), Eigen::EigenvaluesOnly);
    return 0.5 * (e.eigenvalues()(0) + e.eigenvalues()(1)) - 0.5 * (g.eigenvalues()(0) + g.eigenvalues()(1));
}

}  // namespace sivnode
