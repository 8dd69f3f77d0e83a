#include "sivnode/heating.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sivnode/quadrature.hpp"

namespace sivnode {

namespace {

// Value of exp(-s) - exp(-9 s) at its maximum s = ln 9 / 8.
const double kKernelPeak = std::pow(9.0, -1.0 / 8.0) - std::pow(9.0, -9.0 / 8.0);

// h / k_B in mK per GHz.
constexpr double kPlanckOverBoltzmannMk = 47.99243073;

void check_sorted(const std::vector<double>& p) {
    if (!std::is_sorted(p.begin(), p.end())) throw std::invalid_argument("pulse times must be sorted");
}

}  // namespace

void HeatingParams::validate() const {
    if (!(tau_thermal > 0.0) || !(delta_t_per_pulse > 0.0) || !(base_temp > 0.0))
        throw std::invalid_argument("heating parameters must all be positive");
}

double heating_impulse(double rabi_mhz, double mk_per_mhz2) { return mk_per_mhz2 * rabi_mhz * rabi_mhz; }

double heating_kernel(double since_pulse, double tau_thermal) {
    if (since_pulse <= 0.0) return 0.0;
    const double u = since_pulse / tau_thermal;
    return (std::exp(-u) - std::exp(-9.0 * u)) / kKernelPeak;
}

double temperature_at(double t, const std::vector<double>& pulse_times, const HeatingParams& hp) {
    double sum = 0.0;
    for (double p : pulse_times) sum += heating_kernel(t - p, hp.tau_thermal);
    return hp.base_temp + hp.delta_t_per_pulse * sum;
}

HeatingTrace heating_trace(const std::vector<double>& pulse_times, const HeatingParams& hp, double window_end,
                           int n_samples) {
    hp.validate();
    check_sorted(pulse_times);
    if (!(window_end > 0.0)) throw std::invalid_argument("heating_trace: window must be positive");
    HeatingTrace out;
    for (int i = 0; i < n_samples; ++i) {
        const double t = n_samples == 1 ? window_end : window_end * i / (n_samples - 1);
        out.times.push_back(t);
        out.temperature.push_back(temperature_at(t, pulse_times, hp));
    }

    // Between pulses T = base + a exp(-s/tau) - c exp(-9 s/tau) with s measured
    // from the interval start, so the interior maximum has a closed form.
    out.t_max = hp.base_temp;
    out.time_of_max = 0.0;
    const double tau = hp.tau_thermal;
    std::vector<double> edges{0.0};
    for (double p : pulse_times)
        if (p > 0.0 && p < window_end) edges.push_back(p);
    edges.push_back(window_end);
    for (size_t k = 0; k + 1 < edges.size(); ++k) {
        const double t0 = edges[k], t1 = edges[k + 1];
        double a = 0.0, c = 0.0;
        for (double p : pulse_times) {
            if (p > t0) break;
            a += std::exp(-(t0 - p) / tau);
            c += std::exp(-9.0 * (t0 - p) / tau);
        }
        std::vector<double> cand{t0, t1};
        if (a > 0.0 && c > 0.0) {
            const double s = tau / 8.0 * std::log(9.0 * c / a);
            if (s > 0.0 && t0 + s < t1) cand.push_back(t0 + s);
        }
        for (double t : cand) {
            const double v = temperature_at(t, pulse_times, hp);
            if (v > out.t_max) {
                out.t_max = v;
                out.time_of_max = t;
            }
        }
    }
    return out;
}

HeatingTrace sequence_heating(const DecouplingSequence& seq, const HeatingParams& hp, int n_samples) {
    seq.validate();
    return heating_trace(seq.pulse_times(), hp, seq.total_time(), n_samples);
}

double ThermalDephasing::rate(double temperature_mk) const {
    if (temperature_mk <= 0.0) return 0.0;
    const double x = kPlanckOverBoltzmannMk * splitting_ghz / temperature_mk;
    return amplitude / std::expm1(x);
}

double coherence_with_heating(const DecouplingSequence& seq, const BathSet& baths, const HeatingParams& hp,
                              const RateModel& rate, CoherenceMethod method) {
    seq.validate();
    hp.validate();
    const double bath = coherence(seq, baths, method);
    const std::vector<double> pulses = seq.pulse_times();
    auto f = [&](double t) { return rate(temperature_at(t, pulses, hp)); };
    double integral = 0.0;
    double prev = 0.0;
    // Integrate piecewise so the kinks at pulse times sit on panel edges.
    for (size_t k = 0; k <= pulses.size(); ++k) {
        const double next = k < pulses.size() ? pulses[k] : seq.total_time();
        integral += integrate_gk(f, prev, next, 1e-10).value;
        prev = next;
    }
    return bath * std::exp(-integral);
}

}  // namespace sivnode
