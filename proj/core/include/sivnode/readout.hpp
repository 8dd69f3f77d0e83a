#pragma once

#include <cstdint>
#include <random>

namespace sivnode {

// Single-shot spin readout by counting reflected photons. The bright spin
// (up) scatters Poisson(mean_detected_bright / collection_efficiency) probe
// photons until a spin flip ends the cycle; each scatter flips with
// probability spin_flip_per_scatter, so the cycle length is geometric. Each
// scattered photon is detected with collection_efficiency. Both states add
// Poisson(dark_counts) background. Up is declared when counts >= threshold.
struct ReadoutModel {
    double mean_detected_bright = 5.0;
    double spin_flip_per_scatter = 0.01;
    double collection_efficiency = 0.4;
    double dark_counts = 0.1;
    int threshold = 1;

    void validate() const;

    // Solves dark_counts and mean_detected_bright for the requested
    // fidelities at fixed threshold, flip probability and efficiency.
    static ReadoutModel calibrated(double f_up, double f_down, int threshold, double flip_per_scatter,
                                   double efficiency);

    static ReadoutModel spin_photon_preset();      // F_up 0.85, F_down 0.84, threshold 1
    static ReadoutModel misaligned_field_preset(); // F 0.92, threshold 2
    static ReadoutModel aligned_field_preset();    // F 0.97, threshold 13
};

struct ReadoutFidelity {
    double f_up = 0.0;
    double f_down = 0.0;
    double average() const { return 0.5 * (f_up + f_down); }
};

// Exact fidelities from the counting distribution.
ReadoutFidelity readout_fidelity(const ReadoutModel& m);

// Probability of each photon count for the bright state, up to max_count.
double bright_count_probability(const ReadoutModel& m, int count);

struct ReadoutShot {
    bool declared_up = false;
    int counts = 0;
};

ReadoutShot simulate_spin_readout(bool spin_up, const ReadoutModel& m, std::mt19937_64& rng);
// Spin given as up-population; the projective outcome is drawn first.
ReadoutShot simulate_spin_readout(double p_up, const ReadoutModel& m, std::mt19937_64& rng);

// Monte Carlo confusion matrix estimate.
ReadoutFidelity estimate_readout_fidelity(const ReadoutModel& m, std::uint64_t shots, std::uint64_t seed);

}  // namespace sivnode
