// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "runner.hpp"
#include "sivnode/cavity_qed.hpp"
#include "sivnode/heating.hpp"
#include "sivnode/noise.hpp"
#include "sivnode/photonics.hpp"
#include "sivnode/protocol.hpp"
#include "sivnode/register.hpp"
#include "sivnode/spin_model.hpp"
#include "sivnode/tomography.hpp"

using namespace sivnode;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    // Records a named check; failing checks are marked in the detail text.
    void check(bool ok, const std::string& what) {
        if (!ok) pass = false;
        if (detail.tellp() > 0) detail << "; ";
        detail << (ok ? "" : "FAILED ") << what;
    }
};

std::string fmt(double x, int digits = 4) {
    std::ostringstream s;
    s.precision(digits);
    s << x;
    return s.str();
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

CavityAtomParams device_cavity() { return CavityAtomParams::from_ghz(0.45 * 33.0, 33.0, 0.0, 0.0, 5.6, 0.1); }

BathSet two_bath_model() { return {{{5.0, 1.0}, {180.0, 1000.0}}}; }

void cooperativity_criterion(Outcome& o) {
    const double c = cooperativity(CavityAtomParams::from_ghz(0.45 * 33.0, 33.0, 0.0, 0.0, 5.6, 0.1));
    o.check(std::abs(c - 38.0) <= 0.5, "C = " + fmt(c));
}

void strain_criterion(Outcome& o) {
    const double eps = strain_from_splitting(140.0, 25.0, 1.7e6);
    o.check(std::abs(eps - 3.8e-5) <= 0.1e-5, "eps_zx = " + fmt(eps));
    const StrainShift s = strain_sensitivity(SivParameters::ground(), SivParameters::excited(), 3.8e-5, 0.01, 0.4552);
    const double opt_mhz = s.df_optical * 1e3, mw_mhz = s.df_mw * 1e3;
    o.check(rel(opt_mhz, -300.0) <= 0.15, "df_optical = " + fmt(opt_mhz) + " MHz");
    o.check(rel(mw_mhz, 4.0) <= 0.15, "df_mw = " + fmt(mw_mhz) + " MHz at 0.4552 T");
}

void closed_form_criterion(Outcome& o) {
    double worst_mw = 0.0, worst_opt = 0.0;
    oracle::Gen g(17);
    for (int i = 0; i < 100; ++i) {
        const double eps = g.uniform(2.5e-5, 1.5e-4), b = g.uniform(0.02, 0.3), xi = 1e-4;
        const SivParameters gs = SivParameters::ground(), es = SivParameters::excited();
        const StrainShift s = strain_sensitivity(gs, es, eps, xi, b);
        const MagneticField f = MagneticField::axial(b);
        const double fd_mw =
            qubit_frequency(gs.with_strain(eps * (1 + xi)), f) - qubit_frequency(gs.with_strain(eps), f);
        const double fd_opt = optical_line(gs.with_strain(eps * (1 + xi)), es.with_strain(eps * (1 + xi)), f) -
                              optical_line(gs.with_strain(eps), es.with_strain(eps), f);
        worst_mw = std::max(worst_mw, std::abs(s.df_mw + fd_mw) / std::abs(s.df_mw));
        worst_opt = std::max(worst_opt, std::abs(s.df_optical - fd_opt) / std::abs(s.df_optical));
    }
    o.check(worst_mw < 1e-3, "worst MW relative error " + fmt(worst_mw, 3));
    o.check(worst_opt < 1e-3, "worst optical relative error " + fmt(worst_opt, 3));
}

void reflection_criterion(Outcome& o) {
    oracle::Gen g(21);
    double hi = 0.0, lo = 1.0;
    for (int i = 0; i < 2000; ++i) {
        const double kappa = g.uniform(1.0, 100.0);
        const CavityAtomParams p = CavityAtomParams::from_ghz(g.uniform(0.01, 1.0) * kappa, kappa,
                                                              g.uniform(-20.0, 20.0), g.uniform(-40.0, 40.0),
                                                              g.uniform(0.0, 20.0), g.uniform(0.01, 5.0));
        for (int j = 0; j < 200; ++j) {
            const double r = reflectance(kTwoPi * g.uniform(-200.0, 200.0), p);
            hi = std::max(hi, r);
            lo = std::min(lo, r);
        }
    }
    o.check(lo >= 0.0 && hi <= 1.0 + 1e-9, "R in [" + fmt(lo, 3) + ", " + fmt(hi, 12) + "]");

    const double bare = reflectance(kTwoPi * 3.0, CavityAtomParams::from_ghz(16.5, 33.0, 3.0, 0.0, 0.0, 0.1));
    o.check(bare < 1e-9, "critical coupling R = " + fmt(bare, 3));

    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
        const CavityAtomParams truth =
            CavityAtomParams::from_ghz(g.uniform(0.3, 0.6) * 33.0, g.uniform(25.0, 40.0), g.uniform(-3.0, 3.0),
                                       g.uniform(5.0, 20.0), g.uniform(3.0, 8.0), 0.1);
        CavityAtomParams start = truth;
        start.kappa_in *= 1.05;
        start.kappa_total *= 0.95;
        start.omega_cavity += kTwoPi * 0.5;
        start.omega_atom += kTwoPi * 0.3;
        start.g_coupling *= 1.05;
        const SpectrumFit fit = fit_spectrum(sample_spectrum(truth, linspace(-80.0, 80.0, 801)), start,
                                             {false, false, false, false, false, true});
        const auto a = fit.params.as_array(), b = truth.as_array();
        for (int k = 0; k < 5; ++k)
            worst = std::max(worst, std::abs(a[k] - b[k]) / std::max(std::abs(b[k]), kTwoPi * 1.0));
    }
    o.check(worst < 1e-3, "noiseless round trip worst " + fmt(worst, 3));

    CavityAtomParams detuned = device_cavity();
    detuned.omega_atom = kTwoPi * 2000.0;
    const std::vector<double> grid = linspace(-80.0, 80.0, 801);
    const SpectrumTrace far = with_relative_noise(sample_spectrum(detuned, grid), 0.01, 500);
    const SpectrumTrace near = with_relative_noise(sample_spectrum(device_cavity(), grid), 0.01, 600);
    const TwoStageFit two = fit_two_stage(far, near, CavityAtomParams::from_ghz(12.0, 30.0, 1.0, 0.5, 4.0, 0.1));
    const double g_ghz = two.coupled.params.g_coupling / kTwoPi;
    o.check(rel(g_ghz, 5.6) < 0.02, "two-stage g = " + fmt(g_ghz) + " GHz");
}

void contrast_criterion(Outcome& o) {
    // Atom detuned by kappa/2 from the cavity, spin transitions 2 GHz apart.
    const auto up = CavityAtomParams::from_ghz(0.45 * 33.0, 33.0, 0.0, 17.5, 5.6, 0.1);
    const auto down = CavityAtomParams::from_ghz(0.45 * 33.0, 33.0, 0.0, 15.5, 5.6, 0.1);
    const std::vector<double> grid = linspace(-80.0, 80.0, 3201);
    const ProbePoint pp = optimal_probe(up, down, grid);
    double best = -1.0, arg = 0.0;
    for (double f : linspace(-80.0, 80.0, 32001)) {
        const double c = std::abs(reflectance(kTwoPi * f, up) - reflectance(kTwoPi * f, down));
        if (c > best) best = c, arg = f;
    }
    o.check(pp.peak_contrast > 0.9, "peak contrast " + fmt(pp.peak_contrast));
    o.check(std::abs(pp.f_q_ghz - arg) <= grid[1] - grid[0] + 1e-12,
            "f_Q " + fmt(pp.f_q_ghz) + " GHz vs dense " + fmt(arg) + " GHz");
}

void filter_criterion(Outcome& o) {
    double worst = 0.0;
    oracle::Gen g(31);
    for (int i = 0; i < 1000; ++i) {
        const int n = g.even(2, 64);
        const double t = g.log_uniform(1.0, 1e3);
        const double w = g.log_uniform(1e-3, 20.0 * kPi * n / t);
        worst = std::max(worst, rel(filter_function(t, w, n), oracle::toggling_filter_bruteforce(t, w, n)));
    }
    o.check(worst < 1e-8, "worst relative error " + fmt(worst, 3) + " over 1000 points");
}

void t2_criterion(Outcome& o) {
    std::vector<double> n, t2, ratio;
    const BathSet fast_only{{two_bath_model().baths[0]}};
    for (int k = 2; k <= 64; k *= 2) {
        n.push_back(k);
        t2.push_back(model_t2(k, two_bath_model()));
        ratio.push_back(model_t2(k, fast_only) / t2.back());
    }
    const double exponent = fit_power_law(n, t2).exponent;
    const double best = *std::max_element(ratio.begin(), ratio.end());
    o.check(std::abs(exponent - 2.0 / 3.0) <= 0.1, "exponent " + fmt(exponent));
    o.check(best >= 100.0, "dropping the slow bath raises T2 up to " + fmt(best) + "x (N=2), " +
                               fmt(ratio.back()) + "x at N=64");
}

void bath_fit_criterion(Outcome& o) {
    const auto curves = synthetic_curves(two_bath_model(), {2, 4, 8, 16, 32, 64},
                                         {0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0}, 0.0, 1);
    const BathFit fit = fit_baths(curves, {1, 2});
    if (fit.baths.baths.size() != 2) {
        o.check(false, "fit returned " + std::to_string(fit.baths.baths.size()) + " baths");
        return;
    }
    const BathSet truth = two_bath_model();
    for (size_t i = 0; i < 2; ++i) {
        const auto& got = fit.baths.baths[i];
        const auto& want = truth.baths[i];
        o.check(rel(got.strength_b, want.strength_b) < 0.3 && rel(got.correlation_tau, want.correlation_tau) < 0.3,
                "bath " + std::to_string(i + 1) + " b " + fmt(got.strength_b) + " kHz tau " +
                    fmt(got.correlation_tau) + " us");
    }
}

void heating_criterion(Outcome& o) {
    const HeatingParams hp{70.0, 10.0, 100.0};
    std::vector<double> t_max;
    for (int i = 0; i < 61; ++i) t_max.push_back(sequence_heating({32, 0.01 * std::pow(1e6, i / 60.0)}, hp).t_max);
    const auto peak = std::max_element(t_max.begin(), t_max.end());
    o.check(*peak > t_max.front() && *peak > t_max.back() && peak != t_max.begin() && peak != t_max.end() - 1,
            "T_max peak " + fmt(*peak) + " mK vs short " + fmt(t_max.front()) + " / long " + fmt(t_max.back()));

    // Strong drive: 50 mK per pulse.
    const HeatingParams hot{70.0, 50.0, 100.0};
    const ThermalDephasing d;
    const RateModel thermal = [&](double t) { return d.rate(t); };
    std::vector<double> c;
    for (int i = 0; i < 31; ++i)
        c.push_back(coherence_with_heating({32, 0.01 * std::pow(1e3, i / 30.0)}, two_bath_model(), hot, thermal));
    const auto dip = std::min_element(c.begin(), c.end());
    const double after = *std::max_element(dip, c.end());
    o.check(c.front() > 0.99 && *dip < 0.1 && after > 0.3 && dip != c.end() - 1,
            "coherence " + fmt(c.front()) + " -> " + fmt(*dip, 3) + " -> " + fmt(after));
}

void nuclear_criterion(Outcome& o) {
    const HyperfineParams hf;
    const GateReport ent = conditional_rotation(decoupling_sequence(8, 2.859), hf);
    o.check(std::abs(ent.entangling_phi - kPi / 2) <= 0.05, "entangling angle " + fmt(ent.entangling_phi / kPi) + " pi");
    const GateReport init = conditional_rotation(decoupling_sequence(8, 2.857), hf);
    const Eigen::Vector3d want(0.78, 0.0, 0.62);
    const double dist = std::min((init.up.axis - want).norm(), (init.up.axis + want).norm());
    o.check(dist <= 0.02, "init axis distance " + fmt(dist, 3));
    o.check(std::abs(init.up.angle / kPi - 0.63) <= 0.02, "init angle " + fmt(init.up.angle / kPi) + " pi");
    const InitGateReport gate = init_gate();
    o.check(gate.max_entry_error <= 1e-6, "Init entry error " + fmt(gate.max_entry_error, 3));
}

void bell_criterion(Outcome& o) {
    const BellResult ideal = run_bell_sequence(TimeBinQubit{}, 1.0, 0.0, 0.0);
    o.check(std::abs(ideal.fidelity - 1.0) <= 1e-9, "ideal F = " + fmt(ideal.fidelity, 12));

    ExperimentConfig cfg;  // 10% spurious reflection, 0.85/0.84 readout, <n> = 0.008, 1e6 shots
    const std::vector<Histogram> hs = run_experiment(cfg, {Basis::Z, Basis::X});
    const CorrelationData data = CorrelationData::from_histograms(hs[0], hs[1]);
    ReadoutFidelities f;
    f.f_up_e = 0.85;
    f.f_down_e = 0.84;
    const double raw = fidelity_bell(data);
    const double corrected = fidelity_bell(correct_readout_spin_photon(data, f).data);
    o.check(raw >= 0.65 && raw <= 0.75, "raw F = " + fmt(raw, 3));
    o.check(corrected >= 0.85 && corrected <= 0.93, "corrected F = " + fmt(corrected, 3));
    o.detail << " (" << hs[0].total() << " Z / " << hs[1].total() << " X heralds)";
}

void tomography_criterion(Outcome& o) {
    oracle::Gen g(84);
    double excess = -1.0;
    for (int i = 0; i < 1000; ++i) {
        const Eigen::Matrix4cd rho = i % 3 == 0 ? g.x_state() : g.density_matrix(g.integer(1, 4));
        const CorrelationData d =
            CorrelationData::from_probabilities(joint_distribution(rho, Basis::Z), joint_distribution(rho, Basis::X));
        excess = std::max(excess, concurrence_bound(d) - concurrence_wootters(rho_from_correlations(d).rho));
    }
    o.check(excess <= 1e-9, "bound - Wootters at most " + fmt(excess, 3));

    double round_trip = 0.0;
    for (int i = 0; i < 500; ++i) {
        std::array<double, 4> zz{}, xx{};
        double sz = 0.0, sx = 0.0;
        for (int k = 0; k < 4; ++k) sz += (zz[k] = g.uniform(0.0, 1.0)), sx += (xx[k] = g.uniform(0.0, 1.0));
        for (int k = 0; k < 4; ++k) zz[k] /= sz, xx[k] /= sx;
        const CorrelationData d = CorrelationData::from_probabilities(zz, xx);
        ReadoutFidelities fid;
        fid.f_up_e = g.uniform(0.6, 1.0);
        fid.f_down_e = g.uniform(0.6, 1.0);
        fid.f_up_n = g.uniform(0.6, 1.0);
        fid.f_down_n = g.uniform(0.6, 1.0);
        const CorrelationData sp =
            correct_readout_spin_photon(apply_confusion(d, spin_photon_confusion(fid)), fid).data;
        const CorrelationData en =
            correct_readout_electron_nuclear(apply_confusion(d, electron_nuclear_confusion(fid)), fid).data;
        for (size_t k = 0; k < 4; ++k)
            round_trip = std::max({round_trip, std::abs(sp.zz[k] - zz[k]), std::abs(sp.xx[k] - xx[k]),
                                   std::abs(en.zz[k] - zz[k]), std::abs(en.xx[k] - xx[k])});
    }
    o.check(round_trip <= 1e-10, "readout round trip " + fmt(round_trip, 3));

    Eigen::Matrix4d a;
    a << 0.90, 0.05, 0.04, 0.01, 0.06, 0.88, 0.01, 0.05, 0.03, 0.02, 0.91, 0.06, 0.01, 0.05, 0.04, 0.88;
    Eigen::Matrix4d t = 0.9 * cnot_permutation() + 0.1 * Eigen::Matrix4d::Constant(0.25);
    t(0, 0) -= 0.02, t(1, 0) += 0.02;
    std::mt19937_64 rng(12);
    auto draw = [&](const Eigen::Vector4d& p) {
        std::discrete_distribution<int> dist(p.data(), p.data() + 4);
        OutcomeCounts c{};
        for (int i = 0; i < 10000; ++i) ++c[static_cast<size_t>(dist(rng))];
        return c;
    };
    std::vector<OutcomeCounts> control, gate;
    for (int k = 0; k < 4; ++k) {
        control.push_back(draw(a.col(k)));
        gate.push_back(draw(a * t.col(k)));
    }
    CnotMleOptions opt;
    opt.bootstrap_resamples = 0;
    const double err = (cnot_mle(control, gate, opt).transfer - t).cwiseAbs().maxCoeff();
    o.check(err <= 0.03, "CNOT MLE worst entry error " + fmt(err, 3));
}

void design_criterion(Outcome& o) {
    oracle::Gen g(91);
    bool exact = true;
    for (int i = 0; i < 1000; ++i) {
        const double dmax = g.uniform(0.0, 1.0);
        exact = exact && taper_scale(0.0, dmax) == 1.0 - dmax && taper_scale(1.0, dmax) == 1.0 &&
                taper_scale(0.5, dmax) == 1.0 - 0.5 * dmax;
    }
    o.check(exact, "taper endpoints and midpoint exact");

    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        std::vector<Layer> layers;
        const int n = g.integer(1, 40);
        for (int k = 0; k < n; ++k) layers.push_back({g.uniform(1.0, 3.5), g.uniform(1.0, 300.0)});
        const Transmission tr = transmission(layers, g.uniform(1e-4, 5e-3), g.uniform(1.0, 2.0));
        worst = std::max(worst, std::abs(std::norm(tr.t) + std::norm(tr.r) - 1.0));
    }
    o.check(worst <= 1e-10, "energy conservation error " + fmt(worst, 3));

    CavityDesign d;
    d.base.lattice_const *= 1.03;
    d.taper.dmax = 0.1;
    OptimizerOptions opt;
    opt.max_iters = 8;
    const DesignOptimization run = optimize(d, DesignBounds::around(d, 0.1), opt);
    bool monotone = !run.run.trace.empty();
    for (size_t i = 1; i < run.run.trace.size(); ++i) monotone = monotone && run.run.trace[i].score >= run.run.trace[i - 1].score;
    o.check(monotone, "optimizer trace monotone over " + std::to_string(run.run.trace.size()) + " iterates");

    Eigen::VectorXd center(3), lower(3), upper(3), x0(3);
    center << 0.3, -0.7, 1.1;
    lower << -2, -2, -2;
    upper << 2, 2, 2;
    x0 << -1.5, 1.5, -1.0;
    const Objective quad = [&](const Eigen::VectorXd& x) -> std::optional<double> {
        return 1.0 - (x - center).cwiseProduct(Eigen::Vector3d(1.0, 2.0, 0.5)).squaredNorm();
    };
    OptimizerOptions qopt;
    qopt.max_iters = 500;
    const double err = (gradient_ascent(quad, x0, lower, upper, qopt).best - center).cwiseAbs().maxCoeff();
    o.check(err <= 1e-4, "quadratic optimum error " + fmt(err, 3));
}

void determinism_criterion(Outcome& o) {
    const fs::path root = fs::temp_directory_path() / "sivsim_acceptance";
    fs::remove_all(root);
    int files = 0;
    std::vector<std::string> differing;
    for (const sivsim::Experiment& e : sivsim::catalog()) {
        const std::string bytes = sivsim::read_file(fs::path(SIVSIM_FIXTURE_DIR) / (e.name + ".json"));
        sivsim::RunOptions a, b;
        a.out_dir = root / (e.name + "_a");
        b.out_dir = root / (e.name + "_b");
        const sivsim::json m = sivsim::run_config(bytes, a);
        sivsim::run_config(bytes, b);
        for (const auto& art : m["artifacts"]) {
            const std::string f = art.get<std::string>();
            if (fs::path(f).extension() != ".csv") continue;
            ++files;
            if (sivsim::read_file(a.out_dir / f) != sivsim::read_file(b.out_dir / f)) differing.push_back(e.name + "/" + f);
        }
    }
    fs::remove_all(root);
    std::string list;
    for (const auto& s : differing) list += " " + s;
    o.check(differing.empty() && files > 0, std::to_string(sivsim::catalog().size()) + " fixtures, " +
                                                 std::to_string(files) + " CSV files compared" + list);
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria = {
        {"cooperativity", cooperativity_criterion},
        {"strain consistency", strain_criterion},
        {"closed-form vs numeric sensitivities", closed_form_criterion},
        {"reflection model and fits", reflection_criterion},
        {"contrast optimum", contrast_criterion},
        {"filter-function oracle", filter_criterion},
        {"T2 scaling", t2_criterion},
        {"bath-fit identifiability", bath_fit_criterion},
        {"heating model", heating_criterion},
        {"nuclear gates", nuclear_criterion},
        {"Bell protocol", bell_criterion},
        {"tomography properties", tomography_criterion},
        {"design pipeline", design_criterion},
        {"determinism", determinism_criterion},
    };
    int failures = 0;
    for (size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        const auto start = std::chrono::steady_clock::now();
        try {
            criteria[i].second(o);
        } catch (const std::exception& e) {
            o.check(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (!o.pass) ++failures;
        std::printf("%s %2zu %s: %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                    o.detail.str().c_str(), secs);
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
