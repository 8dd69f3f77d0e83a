#include "blocks.hpp"

#include <algorithm>
#include <cmath>

namespace sivsim {

using namespace sivnode;

namespace {
constexpr double kDeg = 3.14159265358979323846 / 180.0;
}

CavityAtomParams parse_cavity(Block b) {
    const double g = b.non_negative("g_ghz");
    const double kappa = b.positive("kappa_ghz");
    const double fraction = b.probability("input_fraction", kDefaultInputFraction);
    const double gamma = b.positive("gamma_ghz");
    const double f_cav = b.number("cavity_ghz", 0.0);
    const double f_atom = b.number("atom_ghz", 0.0);
    b.finish();
    CavityAtomParams p;
    checked(b.path(), [&] { p = CavityAtomParams::from_ghz(fraction * kappa, kappa, f_cav, f_atom, g, gamma); });
    checked(b.path(), [&] { p.validate(); });
    return p;
}

SpinSetup parse_spin(Block b) {
    SpinSetup s;
    s.ground = SivParameters::ground();
    s.excited = SivParameters::excited();
    s.ground.lambda_so = b.positive("lambda_ground_ghz", s.ground.lambda_so);
    s.excited.lambda_so = b.positive("lambda_excited_ghz", s.excited.lambda_so);
    s.ground.strain_susceptibility = b.positive("susceptibility_ground_ghz", s.ground.strain_susceptibility);
    s.excited.strain_susceptibility = b.positive("susceptibility_excited_ghz", s.excited.strain_susceptibility);
    if (b.has("strain_zx")) {
        s.strain_zx = b.non_negative("strain_zx");
    } else {
        const double split = b.positive("ground_splitting_ghz", 140.0);
        if (!(split >= 2.0 * s.ground.lambda_so)) b.fail("ground_splitting_ghz", "must be >= 2 * lambda_ground_ghz");
        s.strain_zx = strain_from_splitting(split, s.ground.lambda_so, s.ground.strain_susceptibility);
    }
    s.field.magnitude = b.non_negative("field_tesla", 0.0);
    s.field.polar_angle = b.number("polar_deg", 0.0) * kDeg;
    s.field.azimuthal_angle = b.number("azimuth_deg", 0.0) * kDeg;
    b.finish();
    s.ground = s.ground.with_strain(s.strain_zx);
    s.excited = s.excited.with_strain(s.strain_zx);
    checked(b.path(), [&] {
        s.ground.validate();
        s.excited.validate();
        s.field.validate();
    });
    return s;
}

BathSet parse_baths(Block& parent, const std::string& key) {
    BathSet set;
    for (Block b : parent.children(key)) {
        LorentzianBath bath;
        bath.strength_b = b.positive("strength_khz");
        bath.correlation_tau = b.positive("tau_us");
        b.finish();
        set.baths.push_back(bath);
    }
    checked(parent.path().empty() ? key : parent.path() + "." + key, [&] { set.validate(); });
    return set;
}

HeatingParams parse_heating(Block b) {
    HeatingParams hp;
    hp.tau_thermal = b.positive("tau_thermal_us", hp.tau_thermal);
    hp.delta_t_per_pulse = b.non_negative("rise_per_pulse_mk", hp.delta_t_per_pulse);
    hp.base_temp = b.positive("base_temp_mk", hp.base_temp);
    b.finish();
    checked(b.path(), [&] { hp.validate(); });
    return hp;
}

ThermalDephasing parse_dephasing(Block b) {
    ThermalDephasing d;
    d.amplitude = b.non_negative("amplitude_per_us", d.amplitude);
    d.splitting_ghz = b.positive("orbital_splitting_ghz", d.splitting_ghz);
    b.finish();
    return d;
}

HyperfineParams parse_hyperfine(Block b) {
    HyperfineParams hf;
    hf.a_parallel = b.number("a_parallel_khz", hf.a_parallel);
    hf.a_perp = b.number("a_perp_khz", hf.a_perp);
    hf.nuclear_larmor = b.number("larmor_khz", hf.nuclear_larmor);
    b.finish();
    checked(b.path(), [&] { hf.validate(); });
    return hf;
}

ReadoutModel parse_readout(Block b) {
    const std::string preset = b.text("preset", "custom");
    ReadoutModel m;
    if (preset == "spin-photon") {
        m = ReadoutModel::spin_photon_preset();
    } else if (preset == "misaligned") {
        m = ReadoutModel::misaligned_field_preset();
    } else if (preset == "aligned") {
        m = ReadoutModel::aligned_field_preset();
    } else if (preset == "calibrate") {
        const double fu = b.probability("fidelity_up");
        const double fd = b.probability("fidelity_down");
        const int threshold = b.integer("threshold", 1);
        const double q = b.probability("spin_flip_per_scatter", 0.01);
        const double eta = b.probability("collection_efficiency", 0.4);
        try {
            m = ReadoutModel::calibrated(fu, fd, threshold, q, eta);
        } catch (const std::exception& e) {
            b.fail("preset", std::string("calibration failed: ") + e.what());
        }
    } else if (preset == "custom") {
        m.mean_detected_bright = b.non_negative("mean_detected_bright", m.mean_detected_bright);
        m.spin_flip_per_scatter = b.probability("spin_flip_per_scatter", m.spin_flip_per_scatter);
        m.collection_efficiency = b.probability("collection_efficiency", m.collection_efficiency);
        m.dark_counts = b.non_negative("dark_counts", m.dark_counts);
        m.threshold = b.integer("threshold", m.threshold);
    } else {
        b.fail("preset", "expected one of spin-photon, misaligned, aligned, calibrate, custom");
    }
    b.finish();
    checked(b.path(), [&] { m.validate(); });
    return m;
}

ExperimentConfig parse_protocol(Block b) {
    ExperimentConfig c;
    c.qubit.mean_photons = b.positive("mean_photons", c.qubit.mean_photons);
    c.qubit.bin_delay = b.positive("bin_delay_ns", c.qubit.bin_delay);
    c.qubit.pulse_width = b.positive("pulse_width_ns", c.qubit.pulse_width);
    c.qubit.relative_phase = b.number("relative_phase_rad", c.qubit.relative_phase);
    c.r_up = {b.number("r_up", c.r_up.real()), b.number("r_up_imag", c.r_up.imag())};
    c.r_down = {b.number("r_down", c.r_down.real()), b.number("r_down_imag", c.r_down.imag())};
    c.mw_depolarizing = b.probability("mw_depolarizing", c.mw_depolarizing);
    c.collection_efficiency = b.probability("collection_efficiency", c.collection_efficiency);
    c.dark_count_probability = b.probability("dark_count_probability", c.dark_count_probability);
    c.interferometer_phase = b.number("interferometer_phase_rad", c.interferometer_phase);
    c.shots = b.count("shots", c.shots);
    c.shards = b.integer("shards", c.shards);
    if (auto r = b.optional_child("readout")) c.readout = parse_readout(*r);
    b.finish();
    checked(b.path(), [&] { c.validate(); });
    return c;
}

CavityDesign parse_design(Block b) {
    CavityDesign d;
    d.base.lattice_const = b.positive("lattice_nm", d.base.lattice_const);
    d.base.hole_hx = b.positive("hole_hx_nm", d.base.hole_hx);
    d.base.hole_hy = b.positive("hole_hy_nm", d.base.hole_hy);
    d.base.waveguide_width = b.positive("width_nm", d.base.waveguide_width);
    d.base.etch_angle = b.positive("etch_angle_deg", d.base.etch_angle);
    d.taper.dmax = b.number("dmax", d.taper.dmax);
    d.taper.n_taper_cells = b.integer("taper_cells", d.taper.n_taper_cells);
    d.mirror_cells_input = b.integer("mirror_cells_input", d.mirror_cells_input);
    d.mirror_cells_output = b.integer("mirror_cells_output", d.mirror_cells_output);
    if (b.has("tapered")) {
        d.taper.parameters.clear();
        for (const std::string& name : b.texts("tapered")) {
            if (name == "lattice") {
                d.taper.parameters.push_back(TaperedParameter::LatticeConstant);
            } else if (name == "hx") {
                d.taper.parameters.push_back(TaperedParameter::HoleHx);
            } else if (name == "hy") {
                d.taper.parameters.push_back(TaperedParameter::HoleHy);
            } else {
                b.fail("tapered", "entries must be 'lattice', 'hx' or 'hy'");
            }
        }
    }
    b.finish();
    checked(b.path(), [&] { d.validate(); });
    return d;
}

std::array<std::uint64_t, 4> multinomial(std::uint64_t n, const std::array<double, 4>& p, std::mt19937_64& rng) {
    std::array<std::uint64_t, 4> out{};
    double rest = 1.0;
    for (size_t j = 0; j < 3; ++j) {
        const double q = rest > 0.0 ? std::clamp(p[j] / rest, 0.0, 1.0) : 0.0;
        std::binomial_distribution<std::uint64_t> draw(n, q);
        out[j] = draw(rng);
        n -= out[j];
        rest -= p[j];
    }
    out[3] = n;
    return out;
}

}  // namespace sivsim
