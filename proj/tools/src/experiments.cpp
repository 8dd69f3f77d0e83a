#include <algorithm>
#include <cmath>
#include <optional>

#include "blocks.hpp"
#include "runner.hpp"
#include "sivnode/tomography.hpp"

namespace sivsim {

using namespace sivnode;

namespace {

constexpr double kPi = 3.14159265358979323846;
using Rows = std::vector<std::vector<double>>;

double ghz(double angular) { return angular / kTwoPi; }

json cavity_json(const CavityAtomParams& p) {
    return {{"kappa_in_ghz", ghz(p.kappa_in)},   {"kappa_ghz", ghz(p.kappa_total)},
            {"cavity_ghz", ghz(p.omega_cavity)}, {"atom_ghz", ghz(p.omega_atom)},
            {"g_ghz", ghz(p.g_coupling)},        {"gamma_ghz", ghz(p.gamma_atom)}};
}

json axis_json(const AxisAngle& a) {
    return {{"angle_over_pi", a.angle / kPi}, {"axis", {a.axis[0], a.axis[1], a.axis[2]}}};
}

json baths_json(const BathSet& s) {
    json out = json::array();
    for (const LorentzianBath& b : s.baths) out.push_back({{"strength_khz", b.strength_b}, {"tau_us", b.correlation_tau}});
    return out;
}

json matrix_json(const Eigen::Matrix4d& m) {
    json out = json::array();
    for (int r = 0; r < 4; ++r) out.push_back({m(r, 0), m(r, 1), m(r, 2), m(r, 3)});
    return out;
}

json correlation_json(const CorrelationData& d) {
    return {{"zz", d.zz}, {"xx", d.xx}, {"zz_shots", d.zz_shots}, {"xx_shots", d.xx_shots}};
}

ReadoutFidelities parse_fidelities(Block b) {
    ReadoutFidelities f;
    f.f_up_e = b.probability("f_up_electron");
    f.f_down_e = b.probability("f_down_electron");
    if (b.has("f_up_nuclear")) f.f_up_n = b.probability("f_up_nuclear");
    if (b.has("f_down_nuclear")) f.f_down_n = b.probability("f_down_nuclear");
    b.finish();
    checked(b.path(), [&] { f.validate(); });
    return f;
}

// Catalog entries. prepare() parses and validates; the returned runner does the work.

Experiment cooperativity_experiment() {
    Experiment e;
    e.name = "cooperativity";
    e.description = "Cooperativity and Purcell-broadened linewidth, optionally swept over g";
    e.blocks = {"cavity"};
    e.prepare = [](Block& root) -> Runner {
        const CavityAtomParams p = parse_cavity(root.child("cavity"));
        std::vector<double> g_grid{ghz(p.g_coupling)};
        if (auto s = root.optional_child("sweep")) {
            g_grid = s->grid("g_ghz");
            s->finish();
        }
        return [p, g_grid](RunContext& ctx) {
            Rows rows;
            for (double g : g_grid) {
                CavityAtomParams q = p;
                q.g_coupling = kTwoPi * g;
                rows.push_back({g, cooperativity(q), ghz(purcell_linewidth(q))});
            }
            ctx.write_csv("cooperativity.csv", {"g_ghz", "cooperativity", "purcell_linewidth_ghz"}, rows);
            return json{{"cooperativity", cooperativity(p)},
                        {"purcell_linewidth_ghz", ghz(purcell_linewidth(p))},
                        {"deterministic", is_deterministic_regime(p)},
                        {"params", cavity_json(p)}};
        };
    };
    return e;
}

Experiment reflection_spectrum_experiment() {
    Experiment e;
    e.name = "reflection-spectrum";
    e.description = "Spin-dependent reflection spectra, contrast and the optimal probe frequency";
    e.blocks = {"cavity", "spectrum"};
    e.prepare = [](Block& root) -> Runner {
        const CavityAtomParams p = parse_cavity(root.child("cavity"));
        Block s = root.child("spectrum");
        const double split = s.non_negative("spin_splitting_ghz");
        const std::vector<double> grid = s.grid("frequency_ghz");
        s.finish();
        if (grid.size() < 2) s.fail("frequency_ghz", "need at least 2 points");
        CavityAtomParams up = p, down = p;
        up.omega_atom = p.omega_atom + kTwoPi * split / 2.0;
        down.omega_atom = p.omega_atom - kTwoPi * split / 2.0;
        return [up, down, p, grid](RunContext& ctx) {
            const SpinSpectrum sp = spin_spectrum(up, down, grid);
            Rows rows;
            for (size_t i = 0; i < grid.size(); ++i)
                rows.push_back({grid[i], sp.up.reflectance[i], sp.down.reflectance[i], sp.contrast[i]});
            ctx.write_csv("spectrum.csv", {"frequency_ghz", "reflectance_up", "reflectance_down", "contrast"}, rows);
            const ProbePoint probe = optimal_probe(up, down, grid);
            return json{{"probe_frequency_ghz", probe.f_q_ghz},
                        {"peak_contrast", probe.peak_contrast},
                        {"degenerate", probe.degenerate},
                        {"detuning_over_kappa", (p.omega_atom - p.omega_cavity) / p.kappa_total},
                        {"cooperativity", cooperativity(p)},
                        {"grid_step_ghz", grid[1] - grid[0]}};
        };
    };
    return e;
}

Experiment spectrum_fit_experiment() {
    Experiment e;
    e.name = "spectrum-fit";
    e.description = "Two-stage fit on synthetic spectra: bare cavity far detuned, then g on resonance";
    e.blocks = {"cavity", "fit"};
    e.prepare = [](Block& root) -> Runner {
        const CavityAtomParams truth = parse_cavity(root.child("cavity"));
        Block f = root.child("fit");
        const std::vector<double> grid = f.grid("frequency_ghz");
        const double detuned = f.number("detuned_atom_ghz", 2000.0);
        const double noise = f.non_negative("noise_sigma", 0.0);
        CavityAtomParams init = truth;
        if (auto s = f.optional_child("initial")) {
            const double kappa = s->positive("kappa_ghz");
            const double fraction = s->probability("input_fraction", kDefaultInputFraction);
            init.kappa_total = kTwoPi * kappa;
            init.kappa_in = kTwoPi * kappa * fraction;
            init.omega_cavity = kTwoPi * s->number("cavity_ghz", 0.0);
            init.omega_atom = kTwoPi * s->number("atom_ghz", 0.0);
            init.g_coupling = kTwoPi * s->positive("g_ghz");
            s->finish();
        }
        f.finish();
        if (grid.size() < 5) f.fail("frequency_ghz", "need at least 5 points");
        return [truth, init, grid, detuned, noise](RunContext& ctx) {
            CavityAtomParams far = truth;
            far.omega_atom = kTwoPi * detuned;
            SpectrumTrace td = with_relative_noise(sample_spectrum(far, grid), noise, ctx.seed());
            SpectrumTrace tr = with_relative_noise(sample_spectrum(truth, grid), noise, ctx.seed() + 1);
            if (noise == 0.0) {
                td.sigma.clear();
                tr.sigma.clear();
            }
            const TwoStageFit fit = fit_two_stage(td, tr, init);
            auto dump = [&](const std::string& name, const SpectrumTrace& t, const CavityAtomParams& model) {
                Rows rows;
                for (size_t i = 0; i < grid.size(); ++i)
                    rows.push_back({grid[i], t.reflectance[i], t.sigma.empty() ? 0.0 : t.sigma[i],
                                    reflectance(kTwoPi * grid[i], model)});
                ctx.write_csv(name, {"frequency_ghz", "reflectance", "sigma", "model"}, rows);
            };
            dump("fit_detuned.csv", td, fit.cavity.params);
            dump("fit_resonant.csv", tr, fit.coupled.params);
            const CavityAtomParams& got = fit.coupled.params;
            return json{{"truth", cavity_json(truth)},
                        {"fitted", cavity_json(got)},
                        {"g_relative_error", std::abs(got.g_coupling / truth.g_coupling - 1.0)},
                        {"kappa_relative_error", std::abs(got.kappa_total / truth.kappa_total - 1.0)},
                        {"stage1_residual", fit.cavity.residual},
                        {"stage2_residual", fit.coupled.residual},
                        {"cooperativity", cooperativity(got)}};
        };
    };
    return e;
}

Experiment strain_sensitivity_experiment() {
    Experiment e;
    e.name = "strain-sensitivity";
    e.description = "Qubit and optical frequency shifts under relative strain fluctuations";
    e.blocks = {"spin", "sensitivity"};
    e.prepare = [](Block& root) -> Runner {
        const SpinSetup s = parse_spin(root.child("spin"));
        Block b = root.child("sensitivity");
        const std::vector<double> xi = b.grid("xi");
        const double field = b.number("field_tesla");
        b.finish();
        return [s, xi, field](RunContext& ctx) {
            Rows rows;
            for (double x : xi) {
                const StrainShift sh = strain_sensitivity(s.ground, s.excited, s.strain_zx, x, field);
                rows.push_back({x, 1e3 * sh.df_mw, 1e3 * sh.df_optical});
            }
            ctx.write_csv("strain_sensitivity.csv", {"xi", "df_mw_mhz", "df_optical_mhz"}, rows);
            const StrainShift ref = strain_sensitivity(s.ground, s.excited, s.strain_zx, 0.01, field);
            return json{{"strain_zx", s.strain_zx},
                        {"ground_splitting_ghz", ground_splitting(s.ground)},
                        {"field_tesla", field},
                        {"df_mw_mhz_at_1pct", 1e3 * ref.df_mw},
                        {"df_optical_mhz_at_1pct", 1e3 * ref.df_optical}};
        };
    };
    return e;
}

Experiment g_factor_experiment() {
    Experiment e;
    e.name = "g-factor";
    e.description = "Effective g factor and qubit frequency versus field angle for several emitters";
    e.blocks = {"spin", "emitters", "angles"};
    e.prepare = [](Block& root) -> Runner {
        const SpinSetup s = parse_spin(root.child("spin"));
        std::vector<double> splittings;
        for (Block em : root.children("emitters")) {
            splittings.push_back(em.positive("ground_splitting_ghz"));
            em.text("label", "");
            em.finish();
            if (splittings.back() < 2.0 * s.ground.lambda_so)
                em.fail("ground_splitting_ghz", "must be >= 2 * lambda_ground_ghz");
        }
        if (s.field.magnitude <= 0.0) throw ValidationError("spin.field_tesla: must be > 0 for g factors");
        Block a = root.child("angles");
        const std::vector<double> polar = a.grid("polar_deg");
        a.finish();
        return [s, splittings, polar](RunContext& ctx) {
            Rows rows;
            json emitters = json::array();
            for (size_t k = 0; k < splittings.size(); ++k) {
                const double eps = strain_from_splitting(splittings[k], s.ground.lambda_so, s.ground.strain_susceptibility);
                const SivParameters gs = s.ground.with_strain(eps);
                for (double deg : polar) {
                    MagneticField b = s.field;
                    b.polar_angle = deg * kPi / 180.0;
                    rows.push_back({static_cast<double>(k), splittings[k], deg, effective_g(gs, b), qubit_frequency(gs, b)});
                }
                MagneticField axial = s.field;
                axial.polar_angle = 0.0;
                emitters.push_back({{"ground_splitting_ghz", splittings[k]},
                                    {"strain_zx", eps},
                                    {"g_axial", effective_g(gs, axial)}});
            }
            ctx.write_csv("g_factor.csv", {"emitter", "ground_splitting_ghz", "polar_deg", "g_factor", "f_qubit_ghz"},
                          rows);
            return json{{"field_tesla", s.field.magnitude}, {"emitters", emitters}};
        };
    };
    return e;
}

Experiment t2_scaling_experiment() {
    Experiment e;
    e.name = "t2-scaling";
    e.description = "Model T2 versus pulse number, power-law exponent and the effect of dropping one bath";
    e.blocks = {"noise", "scaling"};
    e.prepare = [](Block& root) -> Runner {
        Block n = root.child("noise");
        const BathSet baths = parse_baths(n);
        n.finish();
        Block s = root.child("scaling");
        const std::vector<int> counts = s.integers("pulse_counts");
        const int drop = s.integer("drop_bath", static_cast<int>(baths.baths.size()) - 1);
        s.finish();
        if (baths.baths.size() < 2) throw ValidationError("noise.baths: need at least two baths to drop one");
        if (drop < 0 || drop >= static_cast<int>(baths.baths.size())) s.fail("drop_bath", "index out of range");
        for (int c : counts)
            if (c < 2 || c % 2) s.fail("pulse_counts", "entries must be even and >= 2");
        return [baths, counts, drop](RunContext& ctx) {
            BathSet reduced = baths;
            reduced.baths.erase(reduced.baths.begin() + drop);
            Rows rows;
            std::vector<double> ns, t2s;
            double max_ratio = 0.0;
            for (int c : counts) {
                const double full = model_t2(c, baths), cut = model_t2(c, reduced);
                rows.push_back({static_cast<double>(c), full, cut, cut / full});
                ns.push_back(c);
                t2s.push_back(full);
                max_ratio = std::max(max_ratio, cut / full);
            }
            ctx.write_csv("t2_scaling.csv", {"n_pulses", "t2_us", "t2_without_bath_us", "ratio"}, rows);
            const PowerLaw pl = fit_power_law(ns, t2s);
            return json{{"exponent", pl.exponent},
                        {"prefactor_us", pl.prefactor},
                        {"max_ratio_without_bath", max_ratio},
                        {"dropped_bath", drop},
                        {"baths", baths_json(baths)}};
        };
    };
    return e;
}

Experiment coherence_curves_experiment() {
    Experiment e;
    e.name = "coherence-curves";
    e.description = "Decoupled coherence decay curves with stretched-exponential T2 fits";
    e.blocks = {"noise", "curves"};
    e.prepare = [](Block& root) -> Runner {
        Block n = root.child("noise");
        const BathSet baths = parse_baths(n);
        n.finish();
        Block c = root.child("curves");
        const std::vector<int> counts = c.integers("pulse_counts");
        const std::vector<double> fractions = c.grid("t2_fractions");
        const std::string method = c.text("method", "time-domain");
        c.finish();
        if (method != "time-domain" && method != "quadrature") c.fail("method", "expected 'time-domain' or 'quadrature'");
        for (int k : counts)
            if (k < 2 || k % 2) c.fail("pulse_counts", "entries must be even and >= 2");
        const CoherenceMethod m = method == "quadrature" ? CoherenceMethod::Quadrature : CoherenceMethod::TimeDomain;
        return [baths, counts, fractions, m](RunContext& ctx) {
            Rows rows;
            json fits = json::array();
            for (int k : counts) {
                const double t2 = model_t2(k, baths);
                CoherenceCurve curve;
                curve.n_pulses = k;
                for (double f : fractions) {
                    curve.total_times.push_back(f * t2);
                    curve.signal.push_back(coherence(f * t2, k, baths, m));
                    rows.push_back({static_cast<double>(k), f * t2, curve.signal.back()});
                }
                const T2Fit fit = t2_extract(curve);
                fits.push_back({{"n_pulses", k}, {"model_t2_us", t2}, {"fit_t2_us", fit.t2}, {"beta", fit.beta}});
            }
            ctx.write_csv("coherence.csv", {"n_pulses", "time_us", "signal"}, rows);
            return json{{"fits", fits}};
        };
    };
    return e;
}

Experiment bath_fit_experiment() {
    Experiment e;
    e.name = "bath-fit";
    e.description = "Recover a two-bath model from synthetic multi-N coherence curves";
    e.blocks = {"noise", "fit"};
    e.prepare = [](Block& root) -> Runner {
        Block n = root.child("noise");
        const BathSet truth = parse_baths(n);
        n.finish();
        Block f = root.child("fit");
        const std::vector<int> counts = f.integers("pulse_counts");
        const std::vector<double> fractions = f.grid("t2_fractions");
        const double noise = f.non_negative("noise_sigma", 0.0);
        BathFitOptions opt;
        opt.jitter_draws = f.integer("jitter_draws", opt.jitter_draws);
        f.finish();
        if (truth.baths.size() != 2) throw ValidationError("noise.baths: bath-fit expects exactly two baths");
        return [truth, counts, fractions, noise, opt](RunContext& ctx) {
            const std::vector<CoherenceCurve> curves = synthetic_curves(truth, counts, fractions, noise, ctx.seed());
            BathFitOptions o = opt;
            o.seed = ctx.seed();
            const BathFit fit = fit_baths(curves, o);
            Rows rows;
            for (const CoherenceCurve& c : curves)
                for (size_t i = 0; i < c.total_times.size(); ++i)
                    rows.push_back({static_cast<double>(c.n_pulses), c.total_times[i], c.signal[i],
                                    coherence(c.total_times[i], c.n_pulses, fit.baths, CoherenceMethod::TimeDomain)});
            ctx.write_csv("bath_fit.csv", {"n_pulses", "time_us", "signal", "model"}, rows);
            BathSet sorted = truth;
            std::sort(sorted.baths.begin(), sorted.baths.end(),
                      [](const LorentzianBath& a, const LorentzianBath& b) { return a.correlation_tau < b.correlation_tau; });
            json errors = json::array();
            double worst = 0.0;
            for (size_t i = 0; i < sorted.baths.size(); ++i) {
                if (i >= fit.baths.baths.size()) {
                    worst = std::max(worst, 1.0);
                    continue;
                }
                const double eb = std::abs(fit.baths.baths[i].strength_b / sorted.baths[i].strength_b - 1.0);
                const double et = std::abs(fit.baths.baths[i].correlation_tau / sorted.baths[i].correlation_tau - 1.0);
                errors.push_back({{"strength", eb}, {"tau", et}});
                worst = std::max({worst, eb, et});
            }
            return json{{"truth", baths_json(sorted)},
                        {"fitted", baths_json(fit.baths)},
                        {"relative_errors", errors},
                        {"worst_relative_error", worst},
                        {"residual", fit.residual},
                        {"condition_number", fit.condition_number},
                        {"starts", fit.starts}};
        };
    };
    return e;
}

Experiment deer_experiment() {
    Experiment e;
    e.name = "deer";
    e.description = "Echo versus DEER coherence times with one bath flipped";
    e.blocks = {"noise", "deer"};
    e.prepare = [](Block& root) -> Runner {
        Block n = root.child("noise");
        const BathSet baths = parse_baths(n);
        n.finish();
        Block d = root.child("deer");
        const std::vector<int> counts = d.integers("pulse_counts");
        const int flipped = d.integer("flipped_bath", 0);
        const std::vector<double> fractions = d.grid("t2_fractions");
        d.finish();
        if (flipped < 0 || flipped >= static_cast<int>(baths.baths.size())) d.fail("flipped_bath", "index out of range");
        for (int k : counts)
            if (k < 2 || k % 2) d.fail("pulse_counts", "entries must be even and >= 2");
        return [baths, counts, flipped, fractions](RunContext& ctx) {
            const std::optional<std::size_t> which = static_cast<std::size_t>(flipped);
            Rows times, curves;
            for (int k : counts) {
                const double echo = deer_t2(k, baths, std::nullopt), deer = deer_t2(k, baths, which);
                times.push_back({static_cast<double>(k), echo, deer, deer / echo});
                for (double f : fractions)
                    curves.push_back({static_cast<double>(k), f * echo, deer_coherence(f * echo, k, baths, std::nullopt),
                                      deer_coherence(f * echo, k, baths, which)});
            }
            ctx.write_csv("deer_t2.csv", {"n_pulses", "t2_echo_us", "t2_deer_us", "ratio"}, times);
            ctx.write_csv("deer_curves.csv", {"n_pulses", "time_us", "echo", "deer"}, curves);
            return json{{"flipped_bath", flipped}, {"baths", baths_json(baths)}};
        };
    };
    return e;
}

Experiment spin_density_experiment() {
    Experiment e;
    e.name = "spin-densities";
    e.description = "Surface and bulk spin densities implied by a bath strength";
    e.blocks = {"densities"};
    e.prepare = [](Block& root) -> Runner {
        Block d = root.child("densities");
        const double surface_b = d.positive("surface_strength_khz");
        const std::vector<double> distances = d.numbers("distances_nm");
        const double bulk_b = d.positive("bulk_strength_khz");
        const double exclusion = d.positive("exclusion_nm", kDefaultBulkExclusionNm);
        const std::string moment = d.text("moment", "electron");
        const std::vector<double> sweep = d.grid("strength_khz", std::vector<double>{surface_b});
        d.finish();
        if (moment != "electron" && moment != "nuclear") d.fail("moment", "expected 'electron' or 'nuclear'");
        for (double x : distances)
            if (!(x > 0.0)) d.fail("distances_nm", "distances must be > 0");
        const BathMoment m = moment == "nuclear" ? BathMoment::Nuclear : BathMoment::Electron;
        return [=](RunContext& ctx) {
            Rows rows;
            for (double b : sweep) {
                const BulkDensity bd = bulk_density(b, m, exclusion);
                rows.push_back({b, surface_density(b, distances), bd.per_nm3, bd.ppm()});
            }
            ctx.write_csv("densities.csv", {"strength_khz", "surface_per_nm2", "bulk_per_nm3", "bulk_ppm"}, rows);
            const BulkDensity bd = bulk_density(bulk_b, m, exclusion);
            return json{{"surface_per_nm2", surface_density(surface_b, distances)},
                        {"bulk_per_nm3", bd.per_nm3},
                        {"bulk_ppm", bd.ppm()},
                        {"bulk_percent", bd.percent()},
                        {"moment", moment}};
        };
    };
    return e;
}

Experiment heating_experiment() {
    Experiment e;
    e.name = "heating";
    e.description = "Peak temperature and heated coherence of a pulse train versus pulse spacing";
    e.blocks = {"noise", "heating", "sequence"};
    e.prepare = [](Block& root) -> Runner {
        Block n = root.child("noise");
        const BathSet baths = parse_baths(n);
        n.finish();
        const HeatingParams hp = parse_heating(root.child("heating"));
        ThermalDephasing deph;
        if (auto d = root.optional_child("dephasing")) deph = parse_dephasing(*d);
        Block s = root.child("sequence");
        const int pulses = s.integer("n_pulses");
        const std::vector<double> taus = s.grid("tau_us");
        s.finish();
        if (pulses < 2 || pulses % 2) s.fail("n_pulses", "must be even and >= 2");
        for (double t : taus)
            if (!(t > 0.0)) s.fail("tau_us", "spacings must be > 0");
        return [baths, hp, deph, pulses, taus](RunContext& ctx) {
            const RateModel rate = [deph](double t_mk) { return deph.rate(t_mk); };
            Rows rows;
            std::vector<double> tmax, suppression, suppression_tau;
            for (double tau : taus) {
                const DecouplingSequence seq{pulses, tau};
                const HeatingTrace tr = sequence_heating(seq, hp);
                tmax.push_back(tr.t_max);
                const double bath = coherence(seq, baths, CoherenceMethod::TimeDomain);
                const double heated = coherence_with_heating(seq, baths, hp, rate);
                // Thermal suppression is only meaningful while the bath leaves signal.
                if (bath >= 0.5) suppression.push_back(heated / bath), suppression_tau.push_back(tau);
                rows.push_back({tau, seq.total_time(), tr.t_max, bath, heated});
            }
            ctx.write_csv("heating.csv", {"tau_us", "total_time_us", "t_max_mk", "coherence", "coherence_heated"}, rows);
            const auto peak = std::max_element(tmax.begin(), tmax.end());
            const size_t ip = static_cast<size_t>(peak - tmax.begin());
            // Deepest thermal suppression and the best value at longer spacing.
            const auto dip = std::min_element(suppression.begin(), suppression.end());
            const double recovery = dip == suppression.end() ? 1.0 : *std::max_element(dip, suppression.end());
            const double dip_value = dip == suppression.end() ? 1.0 : *dip;
            const double dip_tau = dip == suppression.end() ? 0.0 : suppression_tau[static_cast<size_t>(dip - suppression.begin())];
            return json{{"peak_tau_us", taus[ip]},
                        {"peak_t_max_mk", *peak},
                        {"short_limit_t_max_mk", tmax.front()},
                        {"long_limit_t_max_mk", tmax.back()},
                        {"interior_maximum", *peak > tmax.front() && *peak > tmax.back()},
                        {"thermal_dip_tau_us", dip_tau},
                        {"thermal_dip", dip_value},
                        {"thermal_recovery", recovery}};
        };
    };
    return e;
}

Experiment nuclear_gates_experiment() {
    Experiment e;
    e.name = "nuclear-gates";
    e.description = "Decoupling resonance scan, conditional rotations and the initialisation gate";
    e.blocks = {"register", "gates"};
    e.prepare = [](Block& root) -> Runner {
        const HyperfineParams hf = parse_hyperfine(root.child("register"));
        Block g = root.child("gates");
        const int pulses = g.integer("n_pulses", 8);
        const double tau_entangle = g.positive("tau_entangle_us", 2.859);
        const double tau_init = g.positive("tau_init_us", 2.857);
        const std::vector<double> scan = g.grid("scan_tau_us");
        g.finish();
        if (pulses < 2 || pulses % 2) g.fail("n_pulses", "must be even and >= 2");
        return [hf, pulses, tau_entangle, tau_init, scan](RunContext& ctx) {
            Rows rows;
            for (const ResonancePoint& p : find_resonances(hf, pulses, scan)) rows.push_back({p.tau, p.electron_sx});
            ctx.write_csv("resonance_scan.csv", {"tau_us", "electron_sx"}, rows);
            const GateReport ent = conditional_rotation(decoupling_sequence(pulses, tau_entangle), hf);
            const GateReport ini = conditional_rotation(decoupling_sequence(pulses, tau_init), hf);
            const InitGateReport ideal = init_gate();
            const InitGateReport sim = simulated_init_gate(hf, tau_init, pulses);
            json minima = json::array();
            for (const ResonancePoint& p : resonance_minima(find_resonances(hf, pulses, scan))) minima.push_back(p.tau);
            return json{{"entangling",
                         {{"tau_us", tau_entangle},
                          {"phi_over_pi", ent.entangling_phi / kPi},
                          {"up", axis_json(ent.up)},
                          {"down", axis_json(ent.down)}}},
                        {"init_rotation", {{"tau_us", tau_init}, {"up", axis_json(ini.up)}, {"down", axis_json(ini.down)}}},
                        {"ideal_init_max_entry_error", ideal.max_entry_error},
                        {"simulated_init",
                         {{"max_entry_error", sim.max_entry_error},
                          {"polarization_from_up_up", sim.polarization_from_up_up},
                          {"polarization_from_up_down", sim.polarization_from_up_down}}},
                        {"scan_minima_us", minima}};
        };
    };
    return e;
}

Experiment nuclear_ramsey_experiment() {
    Experiment e;
    e.name = "nuclear-ramsey";
    e.description = "Nuclear Ramsey fringes and RF Rabi oscillations";
    e.blocks = {"register", "ramsey", "rabi"};
    e.prepare = [](Block& root) -> Runner {
        const HyperfineParams hf = parse_hyperfine(root.child("register"));
        Block r = root.child("ramsey");
        const std::vector<double> waits = r.grid("wait_us");
        const double t2_star = r.positive("t2_star_us");
        const double weight = r.probability("electron_up_weight", 1.0);
        const std::string env = r.text("envelope", "gaussian");
        r.finish();
        RamseyEnvelope envelope = RamseyEnvelope::Gaussian;
        if (env == "exponential") {
            envelope = RamseyEnvelope::Exponential;
        } else if (env == "none") {
            envelope = RamseyEnvelope::None;
        } else if (env != "gaussian") {
            r.fail("envelope", "expected 'gaussian', 'exponential' or 'none'");
        }
        Block b = root.child("rabi");
        const double rabi = b.positive("rabi_khz");
        const std::vector<double> durations = b.grid("duration_us");
        const int electron = b.integer("electron", 0);
        const bool simulate = b.flag("simulate", false);
        b.finish();
        if (electron != 0 && electron != 1) b.fail("electron", "must be 0 (up) or 1 (down)");
        return [=](RunContext& ctx) {
            const std::vector<double> p = nuclear_ramsey(hf, waits, t2_star, weight, envelope);
            Rows rows;
            for (size_t i = 0; i < waits.size(); ++i) rows.push_back({waits[i], p[i]});
            ctx.write_csv("ramsey.csv", {"wait_us", "p_nuclear_down"}, rows);
            const std::vector<double> model = rf_rabi(rabi, durations);
            std::vector<double> sim;
            if (simulate) sim = rf_rabi_simulated(hf, electron, rabi, durations);
            Rows rr;
            for (size_t i = 0; i < durations.size(); ++i) rr.push_back({durations[i], model[i], simulate ? sim[i] : model[i]});
            ctx.write_csv("rabi.csv", {"duration_us", "p_flip_model", "p_flip_simulated"}, rr);
            return json{{"precession_khz",
                         {{"electron_up", nuclear_precession_khz(hf, 0)}, {"electron_down", nuclear_precession_khz(hf, 1)}}},
                        {"simulated_rabi", simulate}};
        };
    };
    return e;
}

Experiment readout_experiment() {
    Experiment e;
    e.name = "readout-calibration";
    e.description = "Photon-count readout fidelities, exact and from simulated calibration shots";
    e.blocks = {"readout", "calibration"};
    e.prepare = [](Block& root) -> Runner {
        const ReadoutModel m = parse_readout(root.child("readout"));
        Block c = root.child("calibration");
        const std::uint64_t shots = c.count("shots");
        const int max_count = c.integer("max_count", 40);
        c.finish();
        if (shots == 0) c.fail("shots", "must be >= 1");
        if (max_count < 1) c.fail("max_count", "must be >= 1");
        return [m, shots, max_count](RunContext& ctx) {
            Rows rows;
            for (int k = 0; k <= max_count; ++k) rows.push_back({static_cast<double>(k), bright_count_probability(m, k)});
            ctx.write_csv("bright_counts.csv", {"counts", "probability"}, rows);
            const ReadoutFidelity exact = readout_fidelity(m);
            const ReadoutFidelity mc = estimate_readout_fidelity(m, shots, ctx.seed());
            return json{{"exact", {{"f_up", exact.f_up}, {"f_down", exact.f_down}}},
                        {"simulated", {{"f_up", mc.f_up}, {"f_down", mc.f_down}, {"shots", shots}}},
                        {"model",
                         {{"mean_detected_bright", m.mean_detected_bright},
                          {"spin_flip_per_scatter", m.spin_flip_per_scatter},
                          {"collection_efficiency", m.collection_efficiency},
                          {"dark_counts", m.dark_counts},
                          {"threshold", m.threshold}}}};
        };
    };
    return e;
}

Experiment bell_experiment() {
    Experiment e;
    e.name = "bell-protocol";
    e.description = "Spin-photon Bell state Monte Carlo with raw and readout-corrected tomography";
    e.blocks = {"protocol"};
    e.prepare = [](Block& root) -> Runner {
        ExperimentConfig cfg = parse_protocol(root.child("protocol"));
        int resamples = 200;
        if (auto a = root.optional_child("analysis")) {
            resamples = a->integer("bootstrap_resamples", resamples);
            a->finish();
            if (resamples < 0) a->fail("bootstrap_resamples", "must be >= 0");
        }
        return [cfg, resamples](RunContext& ctx) {
            ExperimentConfig c = cfg;
            c.seed = ctx.seed();
            c.workers = ctx.workers();
            const std::vector<Histogram> hs = run_experiment(c, {Basis::Z, Basis::X});
            Rows rows;
            for (const Histogram& h : hs)
                for (int k = 0; k < 4; ++k)
                    rows.push_back({static_cast<double>(h.basis == Basis::X), static_cast<double>(k / 2),
                                    static_cast<double>(k % 2), static_cast<double>(h.counts[static_cast<size_t>(k)])});
            ctx.write_csv("histograms.csv", {"basis_x", "photon_outcome", "spin_outcome", "counts"}, rows);

            const ReadoutFidelity rf = readout_fidelity(c.readout);
            ReadoutFidelities fid;
            fid.f_up_e = rf.f_up;
            fid.f_down_e = rf.f_down;
            auto analyse = [fid](const CorrelationData& d) {
                const CorrectedData cd = correct_readout_spin_photon(d, fid);
                return std::array<double, 4>{fidelity_bell(d), fidelity_bell(cd.data), concurrence_bound(d),
                                             concurrence_bound(cd.data)};
            };
            const CorrelationData data = CorrelationData::from_histograms(hs[0], hs[1]);
            const auto values = analyse(data);
            const auto model = analyse(CorrelationData::from_probabilities(expected_cell_probabilities(c, Basis::Z),
                                                                           expected_cell_probabilities(c, Basis::X)));
            std::array<double, 4> errors{};
            if (resamples > 0)
                for (size_t k = 0; k < 4; ++k)
                    errors[k] = bootstrap(hs, resamples, c.seed + 7, [&](const std::vector<Histogram>& r) {
                                    return analyse(CorrelationData::from_histograms(r[0], r[1]))[k];
                                }).std_error;
            const Reconstruction rec = rho_from_correlations(data);
            return json{{"heralds", {{"z", hs[0].total()}, {"x", hs[1].total()}}},
                        {"double_heralds", {{"z", hs[0].double_heralds}, {"x", hs[1].double_heralds}}},
                        {"readout", {{"f_up", rf.f_up}, {"f_down", rf.f_down}}},
                        {"fidelity_raw", values[0]},
                        {"fidelity_corrected", values[1]},
                        {"concurrence_raw", values[2]},
                        {"concurrence_corrected", values[3]},
                        {"std_error",
                         {{"fidelity_raw", errors[0]},
                          {"fidelity_corrected", errors[1]},
                          {"concurrence_raw", errors[2]},
                          {"concurrence_corrected", errors[3]}}},
                        {"model",
                         {{"fidelity_raw", model[0]},
                          {"fidelity_corrected", model[1]},
                          {"concurrence_raw", model[2]},
                          {"concurrence_corrected", model[3]}}},
                        {"coherence_clipped", rec.clipped},
                        {"data", correlation_json(data)}};
        };
    };
    return e;
}

Experiment tomography_experiment() {
    Experiment e;
    e.name = "tomography";
    e.description = "Reconstruct a two-qubit state from ZZ/XX correlations with readout correction";
    e.blocks = {"tomography"};
    e.prepare = [](Block& root) -> Runner {
        Block t = root.child("tomography");
        const std::string layout = t.text("layout", "spin-photon");
        const std::vector<double> zz = t.numbers("zz");
        const std::vector<double> xx = t.numbers("xx");
        const std::uint64_t zz_shots = t.count("zz_shots", 0);
        const std::uint64_t xx_shots = t.count("xx_shots", 0);
        std::optional<ReadoutFidelities> fid;
        if (auto r = t.optional_child("readout")) fid = parse_fidelities(*r);
        t.finish();
        if (layout != "spin-photon" && layout != "electron-nuclear")
            t.fail("layout", "expected 'spin-photon' or 'electron-nuclear'");
        if (zz.size() != 4) t.fail("zz", "expected 4 probabilities");
        if (xx.size() != 4) t.fail("xx", "expected 4 probabilities");
        CorrelationData d;
        std::copy(zz.begin(), zz.end(), d.zz.begin());
        std::copy(xx.begin(), xx.end(), d.xx.begin());
        d.zz_shots = zz_shots;
        d.xx_shots = xx_shots;
        checked(t.path(), [&] { d.validate(); });
        if (layout == "electron-nuclear" && fid && !(fid->f_up_n && fid->f_down_n))
            throw ValidationError(t.path() + ".readout: electron-nuclear layout needs nuclear fidelities");
        const bool en = layout == "electron-nuclear";
        return [d, fid, en](RunContext& ctx) {
            json report{{"layout", en ? "electron-nuclear" : "spin-photon"}};
            auto describe = [en](const CorrelationData& c) {
                const Reconstruction rec = rho_from_correlations(c);
                json j{{"coherence", rec.coherence},
                       {"raw_coherence", rec.raw_coherence},
                       {"clipped", rec.clipped},
                       {"concurrence_wootters", concurrence_wootters(rec.rho)}};
                if (en) {
                    j["concurrence_bound"] = en_concurrence_bound(c);
                } else {
                    j["fidelity"] = fidelity_bell(c);
                    j["fidelity_literal"] = fidelity_bell(c, BellSign::Plus, FidelityIndexing::Literal);
                    j["concurrence_bound"] = concurrence_bound(c);
                }
                return j;
            };
            report["raw"] = describe(d);
            CorrelationData final_data = d;
            if (fid) {
                const CorrectedData cd = en ? correct_readout_electron_nuclear(d, *fid) : correct_readout_spin_photon(d, *fid);
                report["corrected"] = describe(cd.data);
                report["corrected"]["negative"] = cd.negative;
                report["corrected"]["most_negative"] = cd.most_negative;
                final_data = cd.data;
            }
            const Reconstruction rec = rho_from_correlations(final_data);
            Rows rows;
            for (int r = 0; r < 4; ++r)
                for (int c = 0; c < 4; ++c) rows.push_back({double(r), double(c), rec.rho(r, c).real(), rec.rho(r, c).imag()});
            ctx.write_csv("rho.csv", {"row", "col", "real", "imag"}, rows);
            return report;
        };
    };
    return e;
}

Experiment cnot_experiment() {
    Experiment e;
    e.name = "cnot-mle";
    e.description = "Maximum-likelihood transfer matrix of a noisy electron-nuclear CNOT from synthetic counts";
    e.blocks = {"cnot"};
    e.prepare = [](Block& root) -> Runner {
        Block c = root.child("cnot");
        const std::uint64_t shots = c.count("shots_per_input");
        const double error = c.probability("gate_error", 0.05);
        const ReadoutFidelities fid = parse_fidelities(c.child("readout"));
        CnotMleOptions opt;
        opt.starts = c.integer("starts", opt.starts);
        opt.bootstrap_resamples = c.integer("bootstrap_resamples", opt.bootstrap_resamples);
        c.finish();
        if (shots == 0) c.fail("shots_per_input", "must be >= 1");
        if (!(fid.f_up_n && fid.f_down_n)) c.fail("readout", "nuclear fidelities are required");
        if (opt.starts < 1) c.fail("starts", "must be >= 1");
        if (opt.bootstrap_resamples < 0) c.fail("bootstrap_resamples", "must be >= 0");
        return [shots, error, fid, opt](RunContext& ctx) {
            const Eigen::Matrix4d conf = electron_nuclear_confusion(fid);
            const Eigen::Matrix4d truth = (1.0 - error) * cnot_permutation() + error * Eigen::Matrix4d::Identity();
            std::mt19937_64 rng(ctx.seed());
            std::vector<OutcomeCounts> control, gate;
            for (int k = 0; k < 4; ++k) {
                std::array<double, 4> pc{}, pg{};
                const Eigen::Vector4d g = conf * truth.col(k);
                for (int j = 0; j < 4; ++j) {
                    pc[static_cast<size_t>(j)] = conf(j, k);
                    pg[static_cast<size_t>(j)] = g[j];
                }
                control.push_back(multinomial(shots, pc, rng));
                gate.push_back(multinomial(shots, pg, rng));
            }
            CnotMleOptions o = opt;
            o.seed = ctx.seed();
            const CnotEstimate est = cnot_mle(control, gate, o);
            Rows rows;
            for (int k = 0; k < 4; ++k)
                for (int j = 0; j < 4; ++j)
                    rows.push_back({double(j), double(k), truth(j, k), est.transfer(j, k), est.std_error(j, k),
                                    est.lower(j, k), est.upper(j, k)});
            ctx.write_csv("transfer.csv", {"output", "input", "truth", "estimate", "std_error", "lower", "upper"}, rows);
            return json{{"max_abs_error", (est.transfer - truth).cwiseAbs().maxCoeff()},
                        {"log_likelihood", est.log_likelihood},
                        {"iterations", est.iterations},
                        {"transfer", matrix_json(est.transfer)},
                        {"truth", matrix_json(truth)},
                        {"diagonal_fidelity", (est.transfer.cwiseProduct(cnot_permutation())).sum() / 4.0}};
        };
    };
    return e;
}

json design_json(const CavityDesign& d) {
    json tapered = json::array();
    for (TaperedParameter p : d.taper.parameters)
        tapered.push_back(p == TaperedParameter::LatticeConstant ? "lattice" : p == TaperedParameter::HoleHx ? "hx" : "hy");
    return {{"lattice_nm", d.base.lattice_const},
            {"hole_hx_nm", d.base.hole_hx},
            {"hole_hy_nm", d.base.hole_hy},
            {"width_nm", d.base.waveguide_width},
            {"etch_angle_deg", d.base.etch_angle},
            {"dmax", d.taper.dmax},
            {"taper_cells", d.taper.n_taper_cells},
            {"mirror_cells_input", d.mirror_cells_input},
            {"mirror_cells_output", d.mirror_cells_output},
            {"tapered", tapered}};
}

json surrogate_json(const SurrogateResult& s) {
    return {{"resonant", s.resonant},
            {"wavelength_nm", s.wavelength},
            {"q", s.q},
            {"mode_volume", s.mode_volume},
            {"peak_transmission", s.peak_transmission},
            {"gap_depth", s.gap_depth},
            {"band_nm", {1.0 / s.band.upper, 1.0 / s.band.lower}}};
}

Experiment cavity_design_experiment() {
    Experiment e;
    e.name = "cavity-design";
    e.description = "Surrogate nanobeam cavity: resonance, field profile and Q/V optimisation";
    e.blocks = {"design", "optimizer"};
    e.prepare = [](Block& root) -> Runner {
        const CavityDesign d = parse_design(root.child("design"));
        Block o = root.child("optimizer");
        OptimizerOptions opt;
        opt.max_iters = o.integer("max_iters", opt.max_iters);
        opt.initial_step = o.positive("initial_step", opt.initial_step);
        const double fraction = o.positive("bound_fraction", 0.1);
        const double q_cutoff = o.positive("q_cutoff", kDefaultQCutoff);
        o.finish();
        if (opt.max_iters < 0) o.fail("max_iters", "must be >= 0");
        if (fraction >= 1.0) o.fail("bound_fraction", "must be < 1");
        return [d, opt, fraction, q_cutoff](RunContext& ctx) {
            const SurrogateResult s0 = surrogate_spectrum(build_design(d));
            if (!s0.resonant) throw std::domain_error("cavity-design: initial design has no resonance");
            Rows profile;
            for (const FieldSample& f : s0.profile) profile.push_back({f.position, f.energy});
            ctx.write_csv("field_profile.csv", {"position_nm", "energy"}, profile);
            const DesignOptimization run = optimize(d, DesignBounds::around(d, fraction), opt, q_cutoff);
            Rows trace;
            for (size_t i = 0; i < run.run.trace.size(); ++i) {
                const TracePoint& t = run.run.trace[i];
                trace.push_back({double(i), t.x[0], t.x[1], t.x[2], t.x[3], t.x[4], t.score});
            }
            ctx.write_csv("optimizer_trace.csv", {"step", "lattice_nm", "hole_hx_nm", "hole_hy_nm", "width_nm", "dmax", "score"},
                          trace);
            const std::optional<DesignScore> best = score(run.best, q_cutoff);
            json report{{"initial", surrogate_json(s0)},
                        {"initial_score", run.run.trace.front().score},
                        {"best_score", run.run.score},
                        {"iterations", run.run.iterations},
                        {"stop_reason", run.run.stop_reason},
                        {"best_design", design_json(run.best)}};
            if (best)
                report["best"] = {{"q", best->quality_q},
                                  {"mode_volume", best->mode_volume_v},
                                  {"waveguide_fraction", best->waveguide_fraction}};
            return report;
        };
    };
    return e;
}

Experiment unit_cell_sweep_experiment() {
    Experiment e;
    e.name = "unit-cell-sweep";
    e.description = "Mirror stopband over a grid of unit-cell dimensions";
    e.blocks = {"design", "sweep"};
    e.prepare = [](Block& root) -> Runner {
        const CavityDesign d = parse_design(root.child("design"));
        Block s = root.child("sweep");
        const std::vector<double> a = s.grid("lattice_nm", std::vector<double>{d.base.lattice_const});
        const std::vector<double> hx = s.grid("hole_hx_nm", std::vector<double>{d.base.hole_hx});
        const std::vector<double> hy = s.grid("hole_hy_nm", std::vector<double>{d.base.hole_hy});
        const std::vector<double> w = s.grid("width_nm", std::vector<double>{d.base.waveguide_width});
        s.finish();
        return [d, a, hx, hy, w](RunContext& ctx) {
            const std::vector<SweepRow> sweep = sweep_unit_cells(d.base, a, hx, hy, w);
            Rows rows;
            const SweepRow* best = nullptr;
            for (const SweepRow& r : sweep) {
                rows.push_back({r.cell.lattice_const, r.cell.hole_hx, r.cell.hole_hy, r.cell.waveguide_width,
                                r.valid ? 1.0 : 0.0, r.valid ? 1.0 / r.band.upper : 0.0, r.valid ? 1.0 / r.band.lower : 0.0,
                                r.valid ? r.band.relative_width() : 0.0});
                if (r.valid && (!best || r.band.relative_width() > best->band.relative_width())) best = &r;
            }
            ctx.write_csv("stopband_sweep.csv",
                          {"lattice_nm", "hole_hx_nm", "hole_hy_nm", "width_nm", "valid", "band_low_nm", "band_high_nm",
                           "relative_width"},
                          rows);
            json report{{"cells", sweep.size()}};
            if (best)
                report["widest"] = {{"lattice_nm", best->cell.lattice_const},
                                    {"hole_hx_nm", best->cell.hole_hx},
                                    {"hole_hy_nm", best->cell.hole_hy},
                                    {"width_nm", best->cell.waveguide_width},
                                    {"relative_width", best->band.relative_width()}};
            return report;
        };
    };
    return e;
}

Experiment coupling_experiment() {
    Experiment e;
    e.name = "waveguide-coupling";
    e.description = "Waveguide coupling fraction and loaded Q versus removed input mirror cells";
    e.blocks = {"design", "coupling"};
    e.prepare = [](Block& root) -> Runner {
        const CavityDesign d = parse_design(root.child("design"));
        Block c = root.child("coupling");
        const std::vector<int> removed = c.integers("removed_cells");
        const double intrinsic = c.positive("intrinsic_q", kDefaultIntrinsicQ);
        c.finish();
        for (int r : removed)
            if (r < 0 || r > d.mirror_cells_input) c.fail("removed_cells", "entries must lie in [0, mirror_cells_input]");
        return [d, removed, intrinsic](RunContext& ctx) {
            Rows rows;
            json best = nullptr;
            for (int r : removed) {
                const CouplingResult cr = waveguide_coupling(d, r, intrinsic);
                rows.push_back({double(r), cr.waveguide_fraction, cr.loaded_q, cr.mirror_q});
                if (best.is_null() && cr.waveguide_fraction > 0.95) best = r;
            }
            ctx.write_csv("coupling.csv", {"removed_cells", "waveguide_fraction", "loaded_q", "mirror_q"}, rows);
            return json{{"intrinsic_q", intrinsic}, {"first_removed_above_0_95", best}};
        };
    };
    return e;
}

}  // namespace

const std::vector<Experiment>& catalog() {
    static const std::vector<Experiment> list = {
        cooperativity_experiment(),   reflection_spectrum_experiment(), spectrum_fit_experiment(),
        strain_sensitivity_experiment(), g_factor_experiment(),         t2_scaling_experiment(),
        coherence_curves_experiment(), bath_fit_experiment(),           deer_experiment(),
        spin_density_experiment(),    heating_experiment(),             nuclear_gates_experiment(),
        nuclear_ramsey_experiment(),  readout_experiment(),             bell_experiment(),
        tomography_experiment(),      cnot_experiment(),                cavity_design_experiment(),
        unit_cell_sweep_experiment(), coupling_experiment(),
    };
    return list;
}

}  // namespace sivsim
