#include "sivnode/photonics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "sivnode/quadrature.hpp"

namespace sivnode {

namespace {

using cplx = std::complex<double>;
constexpr double kPi = 3.14159265358979323846;

Eigen::Matrix2cd layer_matrix(const Layer& l, double frequency, double length) {
    const double delta = 2.0 * kPi * l.index * length * frequency;
    const cplx i(0.0, 1.0);
    Eigen::Matrix2cd m;
    m << std::cos(delta), i * std::sin(delta) / l.index, i * l.index * std::sin(delta), std::cos(delta);
    return m;
}

Eigen::Matrix2cd stack_matrix(const std::vector<Layer>& layers, double frequency) {
    Eigen::Matrix2cd m = Eigen::Matrix2cd::Identity();
    for (const Layer& l : layers) m = m * layer_matrix(l, frequency, l.thickness);
    return m;
}

double half_trace(const UnitCell& c, double frequency) {
    return 0.5 * std::real(stack_matrix(cell_layers(c), frequency).trace());
}

double mirror_transmittance(const UnitCell& c, int cells, double frequency, double ambient) {
    if (cells <= 0) return 1.0;
    std::vector<Layer> layers;
    const std::vector<Layer> one = cell_layers(c);
    for (int k = 0; k < cells; ++k) layers.insert(layers.end(), one.begin(), one.end());
    return std::norm(transmission(layers, frequency, ambient).t);
}

struct LinePeak {
    double center = 0.0;
    double width = 0.0;
    double peak = 0.0;
};

// Peak inside one grid cell around f_grid, then both half-maximum points.
// Everything runs in offsets from f_grid so that resolution is not limited
// by the magnitude of the absolute frequency.
std::optional<LinePeak> refine_peak(const std::vector<Layer>& layers, double ambient, double f_grid, double step,
                                    double lo, double hi) {
    auto trans = [&](double off) { return std::norm(transmission(layers, f_grid + off, ambient).t); };
    const double off = find_maximum(trans, -step, step);
    const double peak = trans(off);
    if (!(peak > 0.0)) return std::nullopt;
    auto below_half = [&](double x) { return trans(x) - 0.5 * peak; };
    double left = off - step, right = off + step;
    while (below_half(left) > 0.0) {
        left -= step;
        if (f_grid + left <= lo) return std::nullopt;
    }
    while (below_half(right) > 0.0) {
        right += step;
        if (f_grid + right >= hi) return std::nullopt;
    }
    const double x_left = find_root(below_half, left, off);
    const double x_right = find_root(below_half, off, right);
    LinePeak p;
    p.center = f_grid + off;
    p.width = x_right - x_left;
    p.peak = std::min(1.0, peak);
    if (!(p.width > 0.0)) return std::nullopt;
    return p;
}

std::vector<FieldSample> field_profile(const std::vector<Layer>& layers, double frequency, double ambient,
                                       int samples) {
    const Transmission tr = transmission(layers, frequency, ambient);
    Eigen::Vector2cd right(tr.t, ambient * tr.t);  // (E, H) at the output face
    double total = 0.0;
    for (const Layer& l : layers) total += l.thickness;
    std::vector<FieldSample> out;
    out.reserve(layers.size() * static_cast<size_t>(samples));
    double z_right = total;
    for (auto it = layers.rbegin(); it != layers.rend(); ++it) {
        for (int s = samples - 1; s >= 0; --s) {
            const double depth = (s + 0.5) / samples * it->thickness;  // from the right face
            const Eigen::Vector2cd e = layer_matrix(*it, frequency, depth) * right;
            out.push_back({z_right - depth, it->index * it->index * std::norm(e[0])});
        }
        right = layer_matrix(*it, frequency, it->thickness) * right;
        z_right -= it->thickness;
    }
    std::reverse(out.begin(), out.end());
    return out;
}

}  // namespace

void UnitCell::validate() const {
    if (!(lattice_const > 0.0 && hole_hx > 0.0 && hole_hy > 0.0 && waveguide_width > 0.0))
        throw std::invalid_argument("unit cell: dimensions must be positive");
    if (!(etch_angle > 0.0 && etch_angle <= 90.0)) throw std::invalid_argument("unit cell: etch_angle must lie in (0, 90]");
    if (!(hole_hx < lattice_const)) throw std::invalid_argument("unit cell: hole_hx must be < lattice_const");
    if (!(hole_hy < waveguide_width)) throw std::invalid_argument("unit cell: hole_hy must be < waveguide_width");
}

void TaperProfile::validate() const {
    if (!(dmax >= 0.0 && dmax < 1.0)) throw std::invalid_argument("taper: dmax must lie in [0, 1)");
    if (n_taper_cells < 1) throw std::invalid_argument("taper: n_taper_cells must be >= 1");
}

void CavityDesign::validate() const {
    base.validate();
    taper.validate();
    if (mirror_cells_input < 0 || mirror_cells_output < 0)
        throw std::invalid_argument("cavity design: mirror cell counts must be >= 0");
    if (mirror_cells_input > mirror_cells_output)
        throw std::invalid_argument("cavity design: mirror_cells_input must be <= mirror_cells_output");
}

double taper_scale(double x, double dmax) {
    if (!(x >= 0.0 && x <= 1.0)) throw std::invalid_argument("taper_scale: x must lie in [0, 1]");
    return 1.0 - dmax * std::abs(2.0 * x * x * x - 3.0 * x * x + 1.0);
}

std::vector<UnitCell> build_design(const CavityDesign& d) {
    d.validate();
    const int n = d.taper.n_taper_cells;
    auto tapered = [&](int i) {
        const double s = taper_scale(static_cast<double>(i) / n, d.taper.dmax);
        UnitCell c = d.base;
        for (TaperedParameter p : d.taper.parameters) {
            switch (p) {
                case TaperedParameter::LatticeConstant: c.lattice_const *= s; break;
                case TaperedParameter::HoleHx: c.hole_hx *= s; break;
                case TaperedParameter::HoleHy: c.hole_hy *= s; break;
            }
        }
        c.validate();
        return c;
    };
    std::vector<UnitCell> cells;
    cells.reserve(static_cast<size_t>(d.mirror_cells_input + d.mirror_cells_output + 2 * n - 1));
    for (int k = 0; k < d.mirror_cells_input; ++k) cells.push_back(d.base);
    for (int i = n - 1; i >= 1; --i) cells.push_back(tapered(i));
    cells.push_back(tapered(0));
    for (int i = 1; i < n; ++i) cells.push_back(tapered(i));
    for (int k = 0; k < d.mirror_cells_output; ++k) cells.push_back(d.base);
    return cells;
}

EffectiveIndices effective_indices(const UnitCell& c) {
    c.validate();
    const double w_eff = c.waveguide_width * std::sin(c.etch_angle * kPi / 180.0);
    EffectiveIndices n;
    n.solid = 1.0 + (kDiamondIndex - 1.0) * w_eff / (w_eff + kIndexHalfWidthNm);
    n.hole = n.solid - (n.solid - 1.0) * c.hole_hy / c.waveguide_width;
    return n;
}

std::vector<Layer> cell_layers(const UnitCell& c) {
    const EffectiveIndices n = effective_indices(c);
    const double half = 0.5 * (c.lattice_const - c.hole_hx);
    return {{n.solid, half}, {n.hole, c.hole_hx}, {n.solid, half}};
}

std::vector<Layer> stack_layers(const std::vector<UnitCell>& cells) {
    std::vector<Layer> out;
    out.reserve(cells.size() * 3);
    for (const UnitCell& c : cells) {
        const std::vector<Layer> l = cell_layers(c);
        out.insert(out.end(), l.begin(), l.end());
    }
    return out;
}

Transmission transmission(const std::vector<Layer>& layers, double frequency, double ambient) {
    if (!(frequency > 0.0)) throw std::invalid_argument("transmission: frequency must be > 0");
    if (!(ambient > 0.0)) throw std::invalid_argument("transmission: ambient index must be > 0");
    const Eigen::Matrix2cd m = stack_matrix(layers, frequency);
    const double n0 = ambient, ns = ambient;
    const cplx a = n0 * m(0, 0) + n0 * ns * m(0, 1);
    const cplx b = m(1, 0) + ns * m(1, 1);
    return {2.0 * n0 / (a + b), (a - b) / (a + b)};
}

Stopband stopband(const UnitCell& c) {
    double optical = 0.0;
    for (const Layer& l : cell_layers(c)) optical += l.index * l.thickness;
    const double bragg = 1.0 / (2.0 * optical);
    auto g = [&](double f) { return half_trace(c, f) + 1.0; };
    if (!(g(bragg) < 0.0)) throw std::domain_error("stopband: unit cell has no index contrast");
    Stopband s;
    s.lower = find_root(g, 0.5 * bragg, bragg);
    s.upper = find_root(g, bragg, 1.5 * bragg);
    return s;
}

SurrogateResult surrogate_spectrum(const std::vector<UnitCell>& cells, const SurrogateOptions& opt) {
    if (cells.size() < 3) throw std::invalid_argument("surrogate_spectrum: need at least 3 cells");
    if (opt.grid_points < 16) throw std::invalid_argument("surrogate_spectrum: grid_points must be >= 16");
    const UnitCell& mirror = cells.back();
    SurrogateResult res;
    res.band = stopband(mirror);
    const double ambient = effective_indices(mirror).solid;
    const std::vector<Layer> layers = stack_layers(cells);

    const double margin = 0.01 * res.band.width();
    const double lo = res.band.lower + margin, hi = res.band.upper - margin;
    const int n = opt.grid_points;
    const double step = (hi - lo) / (n - 1);
    std::vector<double> trans(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) trans[static_cast<size_t>(i)] = std::norm(transmission(layers, lo + i * step, ambient).t);

    std::optional<LinePeak> best;
    for (int i = 1; i + 1 < n; ++i) {
        const size_t k = static_cast<size_t>(i);
        if (!(trans[k] > trans[k - 1] && trans[k] >= trans[k + 1])) continue;
        const std::optional<LinePeak> p = refine_peak(layers, ambient, lo + i * step, step, lo, hi);
        if (!p) continue;
        if (!best || p->center / p->width > best->center / best->width) best = p;
    }
    if (!best) return res;

    res.resonant = true;
    res.frequency = best->center;
    res.wavelength = 1.0 / best->center;
    res.q = best->center / best->width;
    res.peak_transmission = best->peak;
    res.gap_depth = (best->center - res.band.lower) / res.band.width();
    res.profile = field_profile(layers, res.frequency, ambient, opt.samples_per_layer);

    double integral = 0.0, peak = 0.0;
    size_t idx = 0;
    for (const Layer& l : layers) {
        for (int s = 0; s < opt.samples_per_layer; ++s, ++idx) {
            integral += res.profile[idx].energy * l.thickness / opt.samples_per_layer;
            peak = std::max(peak, res.profile[idx].energy);
        }
    }
    const double unit = res.wavelength / kDiamondIndex;
    res.mode_volume = (integral / peak) * kTransverseAreaNm2 / (unit * unit * unit);
    return res;
}

double score_value(double q, double v, double q_cutoff) {
    if (!(q_cutoff > 0.0)) throw std::invalid_argument("score: q_cutoff must be > 0");
    if (!(v > 0.0)) throw std::invalid_argument("score: mode volume must be > 0");
    if (!(q >= 0.0)) throw std::invalid_argument("score: Q must be >= 0");
    return std::min(q, q_cutoff) / (q_cutoff * v);
}

CouplingResult waveguide_coupling(const CavityDesign& d, int removed_input_cells, double intrinsic_q) {
    d.validate();
    if (removed_input_cells < 0 || removed_input_cells > d.mirror_cells_input)
        throw std::invalid_argument("waveguide_coupling: removed_input_cells must lie in [0, mirror_cells_input]");
    if (!(intrinsic_q > 0.0)) throw std::invalid_argument("waveguide_coupling: intrinsic_q must be > 0");
    CavityDesign cut = d;
    cut.mirror_cells_input -= removed_input_cells;
    const SurrogateResult s = surrogate_spectrum(build_design(cut));
    if (!s.resonant) throw std::domain_error("waveguide_coupling: no resonance in the stopband");
    const double ambient = effective_indices(d.base).solid;
    const double t_in = mirror_transmittance(d.base, cut.mirror_cells_input, s.frequency, ambient);
    const double t_out = mirror_transmittance(d.base, cut.mirror_cells_output, s.frequency, ambient);
    const double k_mirror = s.frequency / s.q;
    const double k_in = k_mirror * t_in / (t_in + t_out);
    const double k_int = std::isinf(intrinsic_q) ? 0.0 : s.frequency / intrinsic_q;
    CouplingResult r;
    r.mirror_q = s.q;
    r.waveguide_fraction = k_in / (k_mirror + k_int);
    r.loaded_q = s.frequency / (k_mirror + k_int);
    return r;
}

std::optional<DesignScore> score(const CavityDesign& d, double q_cutoff) {
    const SurrogateResult s = surrogate_spectrum(build_design(d));
    if (!s.resonant) return std::nullopt;
    DesignScore out;
    out.quality_q = s.q;
    out.mode_volume_v = s.mode_volume;
    out.score_f = score_value(s.q, s.mode_volume, q_cutoff);
    const double ambient = effective_indices(d.base).solid;
    const double t_in = mirror_transmittance(d.base, d.mirror_cells_input, s.frequency, ambient);
    const double t_out = mirror_transmittance(d.base, d.mirror_cells_output, s.frequency, ambient);
    const double k_mirror = s.frequency / s.q;
    out.waveguide_fraction = k_mirror * t_in / (t_in + t_out) / (k_mirror + s.frequency / kDefaultIntrinsicQ);
    return out;
}

std::vector<SweepRow> sweep_unit_cells(const UnitCell& base, const std::vector<double>& lattice_consts,
                                       const std::vector<double>& hole_hx, const std::vector<double>& hole_hy,
                                       const std::vector<double>& widths) {
    std::vector<SweepRow> rows;
    for (double a : lattice_consts)
        for (double hx : hole_hx)
            for (double hy : hole_hy)
                for (double w : widths) {
                    SweepRow r;
                    r.cell = base;
                    r.cell.lattice_const = a;
                    r.cell.hole_hx = hx;
                    r.cell.hole_hy = hy;
                    r.cell.waveguide_width = w;
                    try {
                        r.band = stopband(r.cell);
                        r.valid = true;
                    } catch (const std::invalid_argument&) {
                    } catch (const std::domain_error&) {
                    }
                    rows.push_back(r);
                }
    return rows;
}

OptimizeResult gradient_ascent(const Objective& f, const Eigen::VectorXd& x0, const Eigen::VectorXd& lower,
                               const Eigen::VectorXd& upper, const OptimizerOptions& opt) {
    const Eigen::Index n = x0.size();
    if (n == 0 || lower.size() != n || upper.size() != n)
        throw std::invalid_argument("gradient_ascent: start and bounds must have matching non-zero size");
    if (!((upper - lower).array() > 0.0).all()) throw std::invalid_argument("gradient_ascent: need lower < upper");
    if (!((x0 - lower).array() >= 0.0).all() || !((upper - x0).array() >= 0.0).all())
        throw std::invalid_argument("gradient_ascent: start outside the bounds");
    if (opt.max_iters < 0 || !(opt.relative_step > 0.0) || !(opt.initial_step > 0.0))
        throw std::invalid_argument("gradient_ascent: invalid options");

    const Eigen::VectorXd scale = upper - lower;
    const std::optional<double> f0 = f(x0);
    if (!f0) throw std::domain_error("gradient_ascent: objective undefined at the start");

    OptimizeResult res;
    res.best = x0;
    res.score = *f0;
    res.trace.push_back({x0, *f0});
    res.stop_reason = "max iterations";
    double alpha = opt.initial_step;

    for (int iter = 0; iter < opt.max_iters; ++iter) {
        const Eigen::VectorXd& x = res.best;
        Eigen::VectorXd grad = Eigen::VectorXd::Zero(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            double h = opt.relative_step * std::abs(x[i]);
            if (h == 0.0) h = opt.relative_step * scale[i];
            Eigen::VectorXd xp = x, xm = x;
            xp[i] = std::min(x[i] + h, upper[i]);
            xm[i] = std::max(x[i] - h, lower[i]);
            const std::optional<double> fp = f(xp), fm = f(xm);
            if (fp && fm) grad[i] = (*fp - *fm) / (xp[i] - xm[i]);
        }
        const Eigen::VectorXd g_unit = grad.cwiseProduct(scale);
        const double gnorm = g_unit.norm();
        if (!(gnorm > opt.gradient_tolerance)) {
            res.stop_reason = "gradient below tolerance";
            return res;
        }
        const Eigen::VectorXd dir = g_unit / gnorm;
        bool accepted = false;
        while (alpha >= opt.min_step) {
            const Eigen::VectorXd cand =
                (x + alpha * dir.cwiseProduct(scale)).cwiseMax(lower).cwiseMin(upper);
            if (cand == x) {
                alpha *= 0.5;
                continue;
            }
            const std::optional<double> fc = f(cand);
            if (fc && *fc > res.score) {
                res.best = cand;
                res.score = *fc;
                res.trace.push_back({cand, *fc});
                alpha = std::min(2.0 * alpha, opt.max_step);
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        res.iterations = iter + 1;
        if (!accepted) {
            res.stop_reason = "no uphill step";
            return res;
        }
    }
    return res;
}

Eigen::VectorXd design_parameters(const CavityDesign& d) {
    Eigen::VectorXd p(5);
    p << d.base.lattice_const, d.base.hole_hx, d.base.hole_hy, d.base.waveguide_width, d.taper.dmax;
    return p;
}

CavityDesign with_parameters(const CavityDesign& d, const Eigen::VectorXd& p) {
    if (p.size() != 5) throw std::invalid_argument("with_parameters: expected 5 parameters");
    CavityDesign out = d;
    out.base.lattice_const = p[0];
    out.base.hole_hx = p[1];
    out.base.hole_hy = p[2];
    out.base.waveguide_width = p[3];
    out.taper.dmax = p[4];
    out.validate();
    return out;
}

DesignBounds DesignBounds::around(const CavityDesign& d, double fraction) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw std::invalid_argument("design bounds: fraction must lie in (0, 1)");
    const Eigen::VectorXd p = design_parameters(d);
    DesignBounds b;
    b.lower = p * (1.0 - fraction);
    b.upper = p * (1.0 + fraction);
    b.lower[4] = std::max(1e-3, b.lower[4]);
    b.upper[4] = std::min(0.9, b.upper[4]);
    return b;
}

DesignOptimization optimize(const CavityDesign& d0, const DesignBounds& bounds, const OptimizerOptions& opt,
                            double q_cutoff) {
    d0.validate();
    const Objective objective = [&](const Eigen::VectorXd& p) -> std::optional<double> {
        try {
            const std::optional<DesignScore> s = score(with_parameters(d0, p), q_cutoff);
            if (!s) return std::nullopt;
            return s->score_f;
        } catch (const std::invalid_argument&) {
            return std::nullopt;
        } catch (const std::domain_error&) {
            return std::nullopt;
        }
    };
    DesignOptimization out;
    out.run = gradient_ascent(objective, design_parameters(d0), bounds.lower, bounds.upper, opt);
    out.best = with_parameters(d0, out.run.best);
    return out;
}

}  // namespace sivnode
