#pragma once

#include <complex>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace sivnode {

// Photonic crystal nanobeam cavity design over a 1-D effective-index
// transfer-matrix surrogate. Lengths in nm, frequencies as inverse
// wavelength (1/nm). Q and V are surrogate-relative numbers only.

inline constexpr double kDiamondIndex = 2.4;
inline constexpr double kDefaultQCutoff = 5e5;
// Transverse mode area used to turn the effective length into a volume.
inline constexpr double kTransverseAreaNm2 = 5e4;
// Width at which the guided effective index is halfway to the bulk index.
inline constexpr double kIndexHalfWidthNm = 150.0;

struct UnitCell {
    double lattice_const = 200.0;
    double hole_hx = 90.0;
    double hole_hy = 290.0;
    double waveguide_width = 480.0;
    double etch_angle = 50.0;  // degrees

    void validate() const;
};

enum class TaperedParameter { LatticeConstant, HoleHx, HoleHy };

struct TaperProfile {
    double dmax = 0.12;
    int n_taper_cells = 8;
    std::vector<TaperedParameter> parameters{TaperedParameter::LatticeConstant};

    void validate() const;
};

struct CavityDesign {
    int mirror_cells_output = 10;
    int mirror_cells_input = 10;
    UnitCell base;
    TaperProfile taper;

    void validate() const;
};

// 1 - dmax |2x^3 - 3x^2 + 1| with x = 0 at the cavity center.
double taper_scale(double x, double dmax);

// Input mirror, taper, center cell, taper, output mirror. Taper cell i
// (0 = center) uses x = i / n_taper_cells.
std::vector<UnitCell> build_design(const CavityDesign& d);

struct EffectiveIndices {
    double solid = 0.0;
    double hole = 0.0;
};

// Guided index rises with the effective width w sin(theta); the hole layer
// removes a fraction hy / w of the index contrast to air.
EffectiveIndices effective_indices(const UnitCell& c);

struct Layer {
    double index = 1.0;
    double thickness = 0.0;
};

// Symmetric three-layer cell: half solid, hole, half solid.
std::vector<Layer> cell_layers(const UnitCell& c);
std::vector<Layer> stack_layers(const std::vector<UnitCell>& cells);

struct Transmission {
    std::complex<double> t;
    std::complex<double> r;
};

// Lossless stack between two half-spaces of index ambient.
Transmission transmission(const std::vector<Layer>& layers, double frequency, double ambient);

struct Stopband {
    double lower = 0.0;  // band edges in 1/nm
    double upper = 0.0;
    double width() const { return upper - lower; }
    double relative_width() const { return 2.0 * (upper - lower) / (upper + lower); }
    double center() const { return 0.5 * (upper + lower); }
};

// First Bragg gap of the infinite periodic lattice of c.
Stopband stopband(const UnitCell& c);

struct FieldSample {
    double position = 0.0;  // nm from the input end
    double energy = 0.0;    // n^2 |E|^2
};

struct SurrogateResult {
    bool resonant = false;
    double frequency = 0.0;  // 1/nm
    double wavelength = 0.0; // nm
    double q = 0.0;
    double mode_volume = 0.0;  // (lambda / 2.4)^3
    double peak_transmission = 0.0;
    double gap_depth = 0.0;  // (f0 - lower edge) / gap width
    Stopband band;
    std::vector<FieldSample> profile;
};

struct SurrogateOptions {
    int grid_points = 1500;
    int samples_per_layer = 12;
};

// Scans the mirror stopband for an interior transmission peak, then fits the
// Lorentzian line through 1/|t|^2 for center and width.
SurrogateResult surrogate_spectrum(const std::vector<UnitCell>& cells, const SurrogateOptions& opt = {});

struct DesignScore {
    double quality_q = 0.0;
    double mode_volume_v = 0.0;
    double score_f = 0.0;
    double waveguide_fraction = 0.0;
};

double score_value(double q, double v, double q_cutoff = kDefaultQCutoff);

// Empty when the surrogate finds no resonance.
std::optional<DesignScore> score(const CavityDesign& d, double q_cutoff = kDefaultQCutoff);

inline constexpr double kDefaultIntrinsicQ = 1e6;

struct CouplingResult {
    double waveguide_fraction = 0.0;
    double loaded_q = 0.0;
    double mirror_q = 0.0;  // lossless, all leakage through the mirrors
};

// Mirror leakage splits between ports in proportion to each mirror's
// transmittance at resonance; a fixed intrinsic channel adds f0 / intrinsic_q.
CouplingResult waveguide_coupling(const CavityDesign& d, int removed_input_cells,
                                  double intrinsic_q = kDefaultIntrinsicQ);

struct SweepRow {
    UnitCell cell;
    Stopband band;
    bool valid = false;
};

// Grid search for the widest relative stopband.
std::vector<SweepRow> sweep_unit_cells(const UnitCell& base, const std::vector<double>& lattice_consts,
                                       const std::vector<double>& hole_hx, const std::vector<double>& hole_hy,
                                       const std::vector<double>& widths);

using Objective = std::function<std::optional<double>(const Eigen::VectorXd&)>;

struct OptimizerOptions {
    int max_iters = 40;
    double relative_step = 1e-3;  // central-difference step per parameter
    double initial_step = 0.05;   // in box-normalized units
    double max_step = 0.5;
    double min_step = 1e-10;
    double gradient_tolerance = 1e-9;
};

struct TracePoint {
    Eigen::VectorXd x;
    double score = 0.0;
};

struct OptimizeResult {
    Eigen::VectorXd best;
    double score = 0.0;
    std::vector<TracePoint> trace;  // accepted iterates only
    int iterations = 0;
    std::string stop_reason;
};

// Box-constrained gradient ascent with backtracking. Failed evaluations
// count as rejected steps.
OptimizeResult gradient_ascent(const Objective& f, const Eigen::VectorXd& x0, const Eigen::VectorXd& lower,
                               const Eigen::VectorXd& upper, const OptimizerOptions& opt = {});

// Free design parameters: a, hx, hy, w, dmax. Angle and cell counts stay fixed.
Eigen::VectorXd design_parameters(const CavityDesign& d);
CavityDesign with_parameters(const CavityDesign& d, const Eigen::VectorXd& p);

struct DesignBounds {
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;

    // Each parameter within +/- fraction of its value, dmax inside (0, 1).
    static DesignBounds around(const CavityDesign& d, double fraction);
};

struct DesignOptimization {
    CavityDesign best;
    OptimizeResult run;
};

DesignOptimization optimize(const CavityDesign& d0, const DesignBounds& bounds, const OptimizerOptions& opt = {},
                            double q_cutoff = kDefaultQCutoff);

}  // namespace sivnode
