#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace sivnode {

using Matrix2c = Eigen::Matrix2cd;
using Matrix4cd = Eigen::Matrix4cd;

// Frequencies in kHz (ordinary), times in us. Two-spin basis index is
// 2 * electron + nuclear with 0 = up, so the electron is the outer factor.
struct HyperfineParams {
    double a_parallel = 1265.9841215;
    double a_perp = -236.0591725;
    double nuclear_larmor = 661.75728716;

    void validate() const;
};

inline constexpr double kKhzUsToRad = 6.283185307179586e-3;

struct Delay {
    double duration = 0.0;
};

// Electron drive. duration == 0 means an instantaneous ideal rotation.
struct MwPulse {
    double angle = 3.141592653589793;
    double phase = 0.0;
    double duration = 0.0;
};

// Lab-frame RF field on the nucleus, 2 pi rabi cos(2 pi f t + phase) sigma_x,
// which gives a resonant Rabi frequency equal to `rabi_khz` for an untilted
// nuclear axis.
struct RfPulse {
    double frequency_khz = 0.0;
    double rabi_khz = 0.0;
    double duration = 0.0;
    double phase = 0.0;
};

using SequenceEvent = std::variant<Delay, MwPulse, RfPulse>;

struct TwoSpinSequence {
    std::vector<SequenceEvent> events;

    void validate() const;
    int electron_flip_count() const;  // ideal or finite pulses with angle an odd multiple of pi
};

// tau - pi - 2 tau - pi - ... - tau with n ideal pi pulses about `phase`.
TwoSpinSequence decoupling_sequence(int n_pulses, double tau, double phase = 0.0);

struct PropagateOptions {
    double rf_step = 0.01;  // us, midpoint-exponential step for time-dependent RF
};

Matrix4cd propagate(const TwoSpinSequence& seq, const HyperfineParams& hf, const PropagateOptions& opt = {});

// Nuclear Hamiltonian (rad/us) while the electron sits in `electron` (0 up, 1 down).
Matrix2c nuclear_hamiltonian(const HyperfineParams& hf, int electron);
double nuclear_precession_khz(const HyperfineParams& hf, int electron);

struct AxisAngle {
    Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
    double angle = 0.0;  // in [0, pi]
};

// Decomposes U ~ exp(+i angle n.sigma / 2) up to global phase and sign.
AxisAngle axis_angle(const Matrix2c& u);
Matrix2c rotation_from_axis_angle(const AxisAngle& aa);

// arccos(|Tr(R_down^dag R_up)| / 2) with both blocks normalised to det 1:
// pi/2 marks a maximally entangling conditional rotation.
double entangling_angle(const Matrix2c& up, const Matrix2c& down);

struct GateReport {
    AxisAngle up;
    AxisAngle down;
    double entangling_phi = 0.0;
    Matrix4cd unitary;
};

class BlockStructureError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

GateReport conditional_rotation(const Matrix4cd& u, double block_tolerance = 1e-8);
GateReport conditional_rotation(const TwoSpinSequence& seq, const HyperfineParams& hf);

struct ResonancePoint {
    double tau = 0.0;
    double electron_sx = 0.0;  // signed <sigma_x> after the sequence
};

std::vector<ResonancePoint> find_resonances(const HyperfineParams& hf, int n_pulses, const std::vector<double>& taus);
std::vector<ResonancePoint> resonance_minima(const std::vector<ResonancePoint>& scan);
// tau_k = (2k + 1) pi / (2 w) with w the mean conditional precession (rad/us).
double resonance_estimate(const HyperfineParams& hf, int k);

// Reference conditional gate: angle 2 pi / 3 about (+-sqrt 2, 0, 1)/sqrt 3.
Matrix4cd reference_conditional_gate();
// Target of the initialisation gate.
Matrix4cd init_target();

Matrix4cd electron_rotation(char axis, double angle);  // axis in {'x','y','z'}

struct InitGateReport {
    Matrix4cd unitary;
    double max_entry_error = 0.0;  // vs init_target, no phase freedom
    double polarization_from_up_up = 0.0;    // nuclear down population after the gate
    double polarization_from_up_down = 0.0;
};

// Time order X_e(-pi/2), R, Y_e(pi/2), R.
Matrix4cd compose_init(const Matrix4cd& conditional);
InitGateReport init_gate();
InitGateReport simulated_init_gate(const HyperfineParams& hf, double tau_init = 2.857, int n_pulses = 8);

enum class RamseyEnvelope { Gaussian, Exponential, None };

// Nuclear Ramsey with unconditional ideal pi/2 pulses. Returns the nuclear
// down population; the electron sits up with weight electron_up_weight.
std::vector<double> nuclear_ramsey(const HyperfineParams& hf, const std::vector<double>& waits, double t2_star,
                                   double electron_up_weight = 1.0, RamseyEnvelope env = RamseyEnvelope::Gaussian);

// Two-level Rabi formula.
std::vector<double> rf_rabi(double rabi_khz, const std::vector<double>& durations, double detuning_khz = 0.0);

// Same experiment through propagate, driving the electron-conditioned
// nuclear transition from the lower nuclear eigenstate.
std::vector<double> rf_rabi_simulated(const HyperfineParams& hf, int electron, double rabi_khz,
                                      const std::vector<double>& durations, const PropagateOptions& opt = {});

// Electron contrast lost to RF heating during a continuous RF pulse. The
// temperature follows the step response of the same two-exponential kernel
// as the MW heating model.
struct RfHeating {
    double steady_rise_mk_per_khz2 = 1.0;
    double tau_thermal = 70.0;  // us
    double base_temp = 100.0;   // mK
    double dephasing_amplitude = 1.0;  // 1/us
    double orbital_splitting_ghz = 50.0;

    double temperature(double t, double rabi_khz) const;
    double coherence_factor(double rabi_khz, double duration) const;

    // Sets steady_rise so that coherence_factor(rabi, duration) == target.
    static RfHeating calibrated(double target_factor = 0.8, double rabi_khz = 1.0, double duration = 100.0);
};

struct HyperfineTargets {
    double tau_init = 2.857;
    double init_angle = 0.63 * 3.141592653589793;
    Eigen::Vector3d init_axis{0.78, 0.0, 0.62};
    double tau_entangle = 2.859;
    double tau_unconditional = 0.731;
    int n_pulses = 8;
    double unconditional_weight = 0.3;
};

struct CalibrationResult {
    HyperfineParams params;
    Eigen::VectorXd residuals;
    double cost = 0.0;
    int starts = 0;
};

Eigen::VectorXd calibration_residuals(const HyperfineParams& hf, const HyperfineTargets& t);
CalibrationResult calibrate_hyperfine(const HyperfineTargets& t, std::uint64_t seed, int n_starts);

}  // namespace sivnode
