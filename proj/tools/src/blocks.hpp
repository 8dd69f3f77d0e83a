#pragma once

#include <random>

#include "config.hpp"
#include "sivnode/cavity_qed.hpp"
#include "sivnode/heating.hpp"
#include "sivnode/noise.hpp"
#include "sivnode/photonics.hpp"
#include "sivnode/protocol.hpp"
#include "sivnode/readout.hpp"
#include "sivnode/register.hpp"
#include "sivnode/spin_model.hpp"

namespace sivsim {

// Config block parsers. Each consumes its block, rejects unknown fields and
// runs the module validation.

sivnode::CavityAtomParams parse_cavity(Block b);

struct SpinSetup {
    sivnode::SivParameters ground;
    sivnode::SivParameters excited;
    double strain_zx = 0.0;
    sivnode::MagneticField field;
};
SpinSetup parse_spin(Block b);

sivnode::BathSet parse_baths(Block& parent, const std::string& key = "baths");
sivnode::HeatingParams parse_heating(Block b);
sivnode::ThermalDephasing parse_dephasing(Block b);
sivnode::HyperfineParams parse_hyperfine(Block b);
sivnode::ReadoutModel parse_readout(Block b);
sivnode::ExperimentConfig parse_protocol(Block b);
sivnode::CavityDesign parse_design(Block b);

// Counts for n draws from probabilities p (sequential binomials).
std::array<std::uint64_t, 4> multinomial(std::uint64_t n, const std::array<double, 4>& p, std::mt19937_64& rng);

}  // namespace sivsim
