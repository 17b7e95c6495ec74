#include "starch/montecarlo.hpp"

#include <benchmark/benchmark.h>

namespace {

starch::DgpConfig m1_config(int side, starch::Index T) {
    const auto e = starch::design_config(starch::Design::M1, side, T, starch::ErrorLaw::gaussian());
    starch::DgpConfig d;
    d.spec = e.spec;
    d.theta = e.theta0;
    d.weights = e.weights;
    d.T = T;
    d.seed = 11;
    return d;
}

void BM_Simulate(benchmark::State& state) {
    const auto cfg = m1_config(static_cast<int>(state.range(0)), state.range(1));
    for (auto _ : state) benchmark::DoNotOptimize(starch::simulate(cfg));
}
BENCHMARK(BM_Simulate)->Args({8, 20})->Args({10, 40})->Unit(benchmark::kMillisecond);

void BM_Estimate(benchmark::State& state, starch::Stage stage) {
    const auto cfg = m1_config(static_cast<int>(state.range(0)), state.range(1));
    const auto sim = starch::simulate(cfg);
    const auto data = starch::make_estimation_data(sim.panel, cfg.weights, cfg.spec);
    for (auto _ : state) benchmark::DoNotOptimize(starch::estimate(data, stage));
}
BENCHMARK_CAPTURE(BM_Estimate, twosls, starch::Stage::TwoSls)->Args({8, 20})->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Estimate, optimal, starch::Stage::Optimal)->Args({8, 20})->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Estimate, best, starch::Stage::Best)
    ->Args({8, 20})
    ->Args({10, 40})
    ->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
