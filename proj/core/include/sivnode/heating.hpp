#pragma once

#include <functional>
#include <vector>

#include "sivnode/noise.hpp"

namespace sivnode {

struct HeatingParams {
    double tau_thermal = 70.0;        // us
    double delta_t_per_pulse = 10.0;  // mK, peak rise from one isolated pulse
    double base_temp = 100.0;         // mK

    void validate() const;
};

// Rise per pulse grows with dissipated power, i.e. with the square of the
// Rabi frequency.
double heating_impulse(double rabi_mhz, double mk_per_mhz2);

// Single-pulse response normalised to a unit peak; zero before the pulse.
double heating_kernel(double since_pulse, double tau_thermal);
inline double heating_kernel_peak_time(double tau_thermal) { return tau_thermal * 0.27465307216702745; }  // ln 9 / 8

double temperature_at(double t, const std::vector<double>& pulse_times, const HeatingParams& hp);

struct HeatingTrace {
    std::vector<double> times;
    std::vector<double> temperature;
    double t_max = 0.0;          // maximum over [0, window_end], found exactly
    double time_of_max = 0.0;
};

// Samples the temperature on n_samples evenly spaced points of
// [0, window_end]. The maximum uses the closed form inside each interval.
HeatingTrace heating_trace(const std::vector<double>& pulse_times, const HeatingParams& hp, double window_end,
                           int n_samples = 200);

// The temperature seen during a decoupling sequence (window = its length).
HeatingTrace sequence_heating(const DecouplingSequence& seq, const HeatingParams& hp, int n_samples = 200);

// Dephasing rate from thermal population of the upper orbital branch:
// amplitude / (exp(h f / k T) - 1).
struct ThermalDephasing {
    double amplitude = 1.0;         // 1/us
    double splitting_ghz = 50.0;

    double rate(double temperature_mk) const;
};

using RateModel = std::function<double(double temperature_mk)>;

// Bath coherence times exp(-integral of rate(T(t)) over the sequence).
double coherence_with_heating(const DecouplingSequence& seq, const BathSet& baths, const HeatingParams& hp,
                              const RateModel& rate, CoherenceMethod method = CoherenceMethod::TimeDomain);

}  // namespace sivnode
