#include <benchmark/benchmark.h>

#include "sivnode/cavity_qed.hpp"
#include "sivnode/noise.hpp"
#include "sivnode/photonics.hpp"
#include "sivnode/protocol.hpp"
#include "sivnode/register.hpp"

using namespace sivnode;

namespace {

const BathSet kBaths{{{5.0, 1.0}, {180.0, 1000.0}}};

void BM_Reflectance(benchmark::State& state) {
    const auto p = CavityAtomParams::from_ghz(0.45 * 33.0, 33.0, 0.0, 16.5, 5.6, 0.1);
    double f = -80.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(reflectance(kTwoPi * f, p));
        f = f > 80.0 ? -80.0 : f + 0.05;
    }
}
BENCHMARK(BM_Reflectance);

void BM_FilterFunction(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    double w = 0.01;
    for (auto _ : state) {
        benchmark::DoNotOptimize(filter_function(100.0, w, n));
        w = w > 10.0 ? 0.01 : w * 1.01;
    }
}
BENCHMARK(BM_FilterFunction)->Arg(2)->Arg(64);

void BM_CoherenceQuadrature(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(coherence(500.0, n, kBaths, CoherenceMethod::Quadrature));
}
BENCHMARK(BM_CoherenceQuadrature)->Arg(2)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_CoherenceTimeDomain(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(coherence(500.0, n, kBaths, CoherenceMethod::TimeDomain));
}
BENCHMARK(BM_CoherenceTimeDomain)->Arg(2)->Arg(64);

void BM_PropagateDecoupling(benchmark::State& state) {
    const TwoSpinSequence seq = decoupling_sequence(static_cast<int>(state.range(0)), 2.859);
    const HyperfineParams hf;
    for (auto _ : state) benchmark::DoNotOptimize(propagate(seq, hf));
}
BENCHMARK(BM_PropagateDecoupling)->Arg(8)->Arg(64);

void BM_RunExperiment(benchmark::State& state) {
    ExperimentConfig cfg;
    cfg.shots = static_cast<std::uint64_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(run_experiment(cfg, {Basis::Z, Basis::X}));
    state.SetItemsProcessed(state.iterations() * state.range(0) * 2);
}
BENCHMARK(BM_RunExperiment)->Arg(100000)->Unit(benchmark::kMillisecond);

void BM_SurrogateSpectrum(benchmark::State& state) {
    const std::vector<UnitCell> cells = build_design(CavityDesign{});
    for (auto _ : state) benchmark::DoNotOptimize(surrogate_spectrum(cells));
}
BENCHMARK(BM_SurrogateSpectrum)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
