#include "sivnode/register.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "sivnode/heating.hpp"
#include "sivnode/levmar.hpp"
#include "sivnode/quadrature.hpp"

namespace sivnode {

namespace {

using cd = std::complex<double>;
constexpr double kPi = std::numbers::pi;
const cd I1{0.0, 1.0};

Matrix2c pauli(char a) {
    Matrix2c m;
    switch (a) {
        case 'x': m << 0.0, 1.0, 1.0, 0.0; break;
        case 'y': m << 0.0, -I1, I1, 0.0; break;
        case 'z': m << 1.0, 0.0, 0.0, -1.0; break;
        default: m.setIdentity();
    }
    return m;
}

Matrix4cd kron(const Matrix2c& a, const Matrix2c& b) {
    Matrix4cd out;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) out.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
    return out;
}

template <int N>
Eigen::Matrix<cd, N, N> expm_hermitian(const Eigen::Matrix<cd, N, N>& h, double t) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<cd, N, N>> es(h);
    Eigen::Matrix<cd, N, 1> ph;
    for (int k = 0; k < N; ++k) ph(k) = std::exp(-I1 * es.eigenvalues()(k) * t);
    return es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
}

Matrix4cd hyperfine_hamiltonian(const HyperfineParams& hf) {
    Matrix4cd h = Matrix4cd::Zero();
    h.block<2, 2>(0, 0) = nuclear_hamiltonian(hf, 0);
    h.block<2, 2>(2, 2) = nuclear_hamiltonian(hf, 1);
    return h;
}

Matrix2c det_normalised(const Matrix2c& u) {
    const cd d = u.determinant();
    return u / std::sqrt(d);
}

bool is_odd_pi(double angle) {
    const double k = angle / kPi;
    const double r = std::round(k);
    return std::abs(k - r) < 1e-9 && static_cast<long long>(std::abs(r)) % 2 == 1;
}

double nuclear_down_population(const Eigen::Vector4cd& v) { return std::norm(v(1)) + std::norm(v(3)); }

}  // namespace

void HyperfineParams::validate() const {
    if (!(nuclear_larmor >= 0.0)) throw std::invalid_argument("nuclear_larmor must be >= 0");
    if (!std::isfinite(a_parallel) || !std::isfinite(a_perp))
        throw std::invalid_argument("hyperfine components must be finite");
}

void TwoSpinSequence::validate() const {
    for (const auto& e : events) {
        const double d = std::visit([](const auto& x) { return x.duration; }, e);
        if (!(d >= 0.0) || !std::isfinite(d)) throw std::invalid_argument("sequence durations must be >= 0");
        if (const auto* rf = std::get_if<RfPulse>(&e); rf && !(rf->frequency_khz >= 0.0))
            throw std::invalid_argument("RF frequency must be >= 0");
    }
}

int TwoSpinSequence::electron_flip_count() const {
    int n = 0;
    for (const auto& e : events)
        if (const auto* mw = std::get_if<MwPulse>(&e); mw && is_odd_pi(mw->angle)) ++n;
    return n;
}

TwoSpinSequence decoupling_sequence(int n_pulses, double tau, double phase) {
    if (n_pulses <= 0) throw std::invalid_argument("decoupling_sequence: n_pulses must be positive");
    if (!(tau >= 0.0)) throw std::invalid_argument("decoupling_sequence: tau must be >= 0");
    TwoSpinSequence s;
    s.events.emplace_back(Delay{tau});
    for (int k = 0; k < n_pulses; ++k) {
        s.events.emplace_back(MwPulse{kPi, phase, 0.0});
        s.events.emplace_back(Delay{k + 1 < n_pulses ? 2.0 * tau : tau});
    }
    return s;
}

Matrix2c nuclear_hamiltonian(const HyperfineParams& hf, int electron) {
    const double sign = electron == 0 ? 1.0 : -1.0;
    const double z = hf.nuclear_larmor + sign * 0.5 * hf.a_parallel;
    const double x = sign * 0.5 * hf.a_perp;
    return kKhzUsToRad * 0.5 * (z * pauli('z') + x * pauli('x'));
}

double nuclear_precession_khz(const HyperfineParams& hf, int electron) {
    const double sign = electron == 0 ? 1.0 : -1.0;
    return std::hypot(hf.nuclear_larmor + sign * 0.5 * hf.a_parallel, 0.5 * hf.a_perp);
}

Matrix4cd propagate(const TwoSpinSequence& seq, const HyperfineParams& hf, const PropagateOptions& opt) {
    seq.validate();
    hf.validate();
    const Matrix4cd h0 = hyperfine_hamiltonian(hf);
    const Matrix2c id2 = Matrix2c::Identity();
    Matrix4cd u = Matrix4cd::Identity();
    for (const auto& ev : seq.events) {
        if (const auto* d = std::get_if<Delay>(&ev)) {
            if (d->duration > 0.0) u = expm_hermitian<4>(h0, d->duration) * u;
        } else if (const auto* mw = std::get_if<MwPulse>(&ev)) {
            const Matrix2c axis = std::cos(mw->phase) * pauli('x') + std::sin(mw->phase) * pauli('y');
            if (mw->duration == 0.0) {
                const Matrix2c r = std::cos(0.5 * mw->angle) * id2 - I1 * std::sin(0.5 * mw->angle) * axis;
                u = kron(r, id2) * u;
            } else {
                const double omega = mw->angle / mw->duration;
                const Matrix4cd h = h0 + 0.5 * omega * kron(axis, id2);
                u = expm_hermitian<4>(h, mw->duration) * u;
            }
        } else if (const auto* rf = std::get_if<RfPulse>(&ev)) {
            if (rf->duration <= 0.0) continue;
            const long steps = std::max(1L, static_cast<long>(std::ceil(rf->duration / opt.rf_step)));
            const double dt = rf->duration / static_cast<double>(steps);
            const double w = kKhzUsToRad * rf->frequency_khz;
            const double amp = kKhzUsToRad * rf->rabi_khz;
            const Matrix4cd drive = kron(id2, pauli('x'));
            for (long j = 0; j < steps; ++j) {
                const double tm = (static_cast<double>(j) + 0.5) * dt;
                const Matrix4cd h = h0 + amp * std::cos(w * tm + rf->phase) * drive;
                u = expm_hermitian<4>(h, dt) * u;
            }
        }
    }
    return u;
}

AxisAngle axis_angle(const Matrix2c& u_in) {
    Matrix2c u = det_normalised(u_in);
    if (std::real(u.trace()) < 0.0) u = -u;
    const double c = std::clamp(0.5 * std::real(u.trace()), -1.0, 1.0);
    // u = c I + i s n.sigma
    Eigen::Vector3d v(0.5 * std::imag(u(0, 1) + u(1, 0)), 0.5 * std::real(u(0, 1) - u(1, 0)),
                      0.5 * std::imag(u(0, 0) - u(1, 1)));
    const double s = v.norm();
    AxisAngle out;
    out.angle = 2.0 * std::atan2(s, c);
    if (s > 0.0) out.axis = v / s;
    return out;
}

Matrix2c rotation_from_axis_angle(const AxisAngle& aa) {
    const Matrix2c ns = aa.axis.x() * pauli('x') + aa.axis.y() * pauli('y') + aa.axis.z() * pauli('z');
    return std::cos(0.5 * aa.angle) * Matrix2c::Identity() + I1 * std::sin(0.5 * aa.angle) * ns;
}

double entangling_angle(const Matrix2c& up, const Matrix2c& down) {
    const Matrix2c a = det_normalised(up);
    const Matrix2c b = det_normalised(down);
    return std::acos(std::min(1.0, 0.5 * std::abs((b.adjoint() * a).trace())));
}

GateReport conditional_rotation(const Matrix4cd& u, double block_tolerance) {
    const double off = u.block<2, 2>(0, 2).norm() + u.block<2, 2>(2, 0).norm();
    if (off > block_tolerance)
        throw BlockStructureError("conditional_rotation: electron does not return to its state (odd flips)");
    GateReport r;
    r.unitary = u;
    const Matrix2c up = u.block<2, 2>(0, 0);
    const Matrix2c down = u.block<2, 2>(2, 2);
    r.up = axis_angle(up);
    r.down = axis_angle(down);
    r.entangling_phi = entangling_angle(up, down);
    return r;
}

GateReport conditional_rotation(const TwoSpinSequence& seq, const HyperfineParams& hf) {
    if (seq.electron_flip_count() % 2 != 0)
        throw BlockStructureError("conditional_rotation: odd number of electron pi pulses");
    return conditional_rotation(propagate(seq, hf));
}

std::vector<ResonancePoint> find_resonances(const HyperfineParams& hf, int n_pulses, const std::vector<double>& taus) {
    std::vector<ResonancePoint> out;
    out.reserve(taus.size());
    for (double tau : taus) {
        const Matrix4cd u = propagate(decoupling_sequence(n_pulses, tau), hf);
        // Electron |+> with a maximally mixed nucleus.
        Matrix2c plus;
        plus << 0.5, 0.5, 0.5, 0.5;
        const Matrix4cd rho0 = kron(plus, 0.5 * Matrix2c::Identity());
        const Matrix4cd rho = u * rho0 * u.adjoint();
        const double sx = std::real((rho * kron(pauli('x'), Matrix2c::Identity())).trace());
        out.push_back({tau, sx});
    }
    return out;
}

std::vector<ResonancePoint> resonance_minima(const std::vector<ResonancePoint>& scan) {
    std::vector<ResonancePoint> out;
    for (size_t i = 1; i + 1 < scan.size(); ++i)
        if (scan[i].electron_sx < scan[i - 1].electron_sx && scan[i].electron_sx <= scan[i + 1].electron_sx)
            out.push_back(scan[i]);
    return out;
}

double resonance_estimate(const HyperfineParams& hf, int k) {
    const double w = 0.5 * kKhzUsToRad * (nuclear_precession_khz(hf, 0) + nuclear_precession_khz(hf, 1));
    return (2.0 * k + 1.0) * kPi / (2.0 * w);
}

Matrix4cd reference_conditional_gate() {
    const double r2 = std::sqrt(2.0);
    Matrix4cd m = Matrix4cd::Zero();
    m(0, 0) = cd(0.5, 0.5);
    m(0, 1) = I1 / r2;
    m(1, 0) = I1 / r2;
    m(1, 1) = cd(0.5, -0.5);
    m(2, 2) = cd(0.5, 0.5);
    m(2, 3) = -I1 / r2;
    m(3, 2) = -I1 / r2;
    m(3, 3) = cd(0.5, -0.5);
    return m;
}

Matrix4cd init_target() {
    const double r2 = std::sqrt(2.0);
    Matrix4cd m = Matrix4cd::Zero();
    m(0, 2) = cd(-0.5, -0.5);
    m(0, 3) = -1.0 / r2;
    m(1, 0) = I1 / r2;
    m(1, 1) = cd(-0.5, -0.5);
    m(2, 2) = cd(-0.5, 0.5);
    m(2, 3) = -I1 / r2;
    m(3, 0) = 1.0 / r2;
    m(3, 1) = cd(0.5, -0.5);
    return m;
}

Matrix4cd electron_rotation(char axis, double angle) {
    const Matrix2c r = std::cos(0.5 * angle) * Matrix2c::Identity() - I1 * std::sin(0.5 * angle) * pauli(axis);
    return kron(r, Matrix2c::Identity());
}

Matrix4cd compose_init(const Matrix4cd& conditional) {
    return conditional * electron_rotation('y', kPi / 2) * conditional * electron_rotation('x', -kPi / 2);
}

namespace {
InitGateReport report_init(const Matrix4cd& u) {
    InitGateReport r;
    r.unitary = u;
    r.max_entry_error = (u - init_target()).cwiseAbs().maxCoeff();
    r.polarization_from_up_up = nuclear_down_population(u.col(0));
    r.polarization_from_up_down = nuclear_down_population(u.col(1));
    return r;
}
}  // namespace

InitGateReport init_gate() { return report_init(compose_init(reference_conditional_gate())); }

InitGateReport simulated_init_gate(const HyperfineParams& hf, double tau_init, int n_pulses) {
    return report_init(compose_init(propagate(decoupling_sequence(n_pulses, tau_init), hf)));
}

std::vector<double> nuclear_ramsey(const HyperfineParams& hf, const std::vector<double>& waits, double t2_star,
                                   double electron_up_weight, RamseyEnvelope env) {
    if (!(electron_up_weight >= 0.0 && electron_up_weight <= 1.0))
        throw std::invalid_argument("nuclear_ramsey: electron weight must lie in [0, 1]");
    if (env != RamseyEnvelope::None && !(t2_star > 0.0))
        throw std::invalid_argument("nuclear_ramsey: t2_star must be positive");
    const Matrix2c half = expm_hermitian<2>(Matrix2c(0.5 * pauli('x')), 0.5 * kPi);
    std::vector<double> out;
    out.reserve(waits.size());
    for (double t : waits) {
        double p = 0.0;
        for (int e = 0; e < 2; ++e) {
            const double w = e == 0 ? electron_up_weight : 1.0 - electron_up_weight;
            if (w == 0.0) continue;
            const Matrix2c u = half * expm_hermitian<2>(nuclear_hamiltonian(hf, e), t) * half;
            p += w * std::norm(u(1, 0));
        }
        double envelope = 1.0;
        if (env == RamseyEnvelope::Gaussian) envelope = std::exp(-std::pow(t / t2_star, 2));
        if (env == RamseyEnvelope::Exponential) envelope = std::exp(-t / t2_star);
        out.push_back(0.5 + envelope * (p - 0.5));
    }
    return out;
}

std::vector<double> rf_rabi(double rabi_khz, const std::vector<double>& durations, double detuning_khz) {
    const double om = kKhzUsToRad * rabi_khz;
    const double de = kKhzUsToRad * detuning_khz;
    const double gen = std::hypot(om, de);
    std::vector<double> out;
    for (double t : durations) {
        if (gen == 0.0) {
            out.push_back(0.0);
            continue;
        }
        const double s = std::sin(0.5 * gen * t);
        out.push_back(om * om / (gen * gen) * s * s);
    }
    return out;
}

std::vector<double> rf_rabi_simulated(const HyperfineParams& hf, int electron, double rabi_khz,
                                      const std::vector<double>& durations, const PropagateOptions& opt) {
    Eigen::SelfAdjointEigenSolver<Matrix2c> es(nuclear_hamiltonian(hf, electron));
    const Eigen::Vector2cd lower = es.eigenvectors().col(0);
    const Eigen::Vector2cd upper = es.eigenvectors().col(1);
    const double f = nuclear_precession_khz(hf, electron);
    const int base = 2 * electron;
    std::vector<double> out;
    for (double t : durations) {
        TwoSpinSequence s;
        s.events.emplace_back(RfPulse{f, rabi_khz, t, 0.0});
        const Matrix4cd u = propagate(s, hf, opt);
        const Matrix2c b = u.block<2, 2>(base, base);
        out.push_back(std::norm(upper.dot(b * lower)));
    }
    return out;
}

double RfHeating::temperature(double t, double rabi_khz) const {
    if (t <= 0.0) return base_temp;
    const double u = t / tau_thermal;
    const double step = (-std::expm1(-u) + std::expm1(-9.0 * u) / 9.0) / (8.0 / 9.0);
    return base_temp + steady_rise_mk_per_khz2 * rabi_khz * rabi_khz * step;
}

double RfHeating::coherence_factor(double rabi_khz, double duration) const {
    if (duration <= 0.0) return 1.0;
    const ThermalDephasing model{dephasing_amplitude, orbital_splitting_ghz};
    auto f = [&](double t) { return model.rate(temperature(t, rabi_khz)); };
    return std::exp(-integrate_gk(f, 0.0, duration, 1e-10).value);
}

RfHeating RfHeating::calibrated(double target_factor, double rabi_khz, double duration) {
    if (!(target_factor > 0.0 && target_factor < 1.0))
        throw std::invalid_argument("RfHeating::calibrated: target must lie in (0, 1)");
    RfHeating h;
    auto g = [&](double rise) {
        RfHeating trial = h;
        trial.steady_rise_mk_per_khz2 = rise;
        return -std::log(trial.coherence_factor(rabi_khz, duration)) + std::log(target_factor);
    };
    h.steady_rise_mk_per_khz2 = find_increasing_root(g, 100.0, 1e9);
    return h;
}

Eigen::VectorXd calibration_residuals(const HyperfineParams& hf, const HyperfineTargets& t) {
    Eigen::VectorXd r(8);
    const GateReport init = conditional_rotation(decoupling_sequence(t.n_pulses, t.tau_init), hf);
    const Eigen::Vector3d target_axis = t.init_axis.normalized();
    r(0) = init.up.angle - t.init_angle;
    r.segment<3>(1) = init.up.axis - target_axis;
    const GateReport ent = conditional_rotation(decoupling_sequence(t.n_pulses, t.tau_entangle), hf);
    r(4) = ent.entangling_phi - 0.5 * kPi;
    const GateReport unc = conditional_rotation(decoupling_sequence(t.n_pulses, t.tau_unconditional), hf);
    const double w = t.unconditional_weight;
    r(5) = w * (1.0 - std::abs(unc.up.axis.dot(unc.down.axis)));
    r(6) = w * (unc.up.angle - 0.5 * kPi);
    r(7) = w * (unc.down.angle - 0.5 * kPi);
    return r;
}

CalibrationResult calibrate_hyperfine(const HyperfineTargets& t, std::uint64_t seed, int n_starts) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> apar(-2000.0, 2000.0), aperp(-500.0, 500.0), larmor(50.0, 1000.0);
    LmProblem prob;
    prob.n_residuals = 8;
    prob.residuals = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
        HyperfineParams hf{p(0), p(1), std::abs(p(2))};
        r = calibration_residuals(hf, t);
    };
    CalibrationResult best;
    best.cost = std::numeric_limits<double>::infinity();
    for (int s = 0; s < n_starts; ++s) {
        Eigen::VectorXd x0(3);
        x0 << apar(rng), aperp(rng), larmor(rng);
        ++best.starts;
        LmResult fit;
        try {
            fit = levenberg_marquardt(prob, x0);
        } catch (const FitError&) {
            continue;
        }
        if (fit.cost < best.cost) {
            best.cost = fit.cost;
            best.params = HyperfineParams{fit.params(0), fit.params(1), std::abs(fit.params(2))};
        }
    }
    if (!std::isfinite(best.cost)) throw FitError("calibrate_hyperfine: no start converged", Eigen::VectorXd());
    best.residuals = calibration_residuals(best.params, t);
    return best;
}

}  // namespace sivnode
