// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "tworay/channel.hpp"
#include "tworay/fitting.hpp"

using namespace tworay;

namespace {

AmplitudePdf rician_target() {
    AmplitudePdf f;
    for (int i = 0; i < 100; ++i) f.grid.push_back(2.5 * i / 99.0);
    for (double r : f.grid) f.density.push_back(rician_pdf(10.0, 0.5 / 11.0, r));
    f.second_moment = 1.0;
    return f;
}

void BM_FitIftrSmall(benchmark::State& state) {
    const auto f = rician_target();
    GaSettings ga;
    ga.population = 40;
    ga.generations = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(fit_iftr(f, ga, 1).selected.k_factor);
}
BENCHMARK(BM_FitIftrSmall)->Arg(20)->Arg(80)->Unit(benchmark::kMillisecond);

void BM_FitGtrvSmall(benchmark::State& state) {
    const auto f = rician_target();
    GaSettings ga;
    ga.population = 40;
    ga.generations = 20;
    for (auto _ : state) benchmark::DoNotOptimize(fit_gtrv(f, {12.04, -0.1, 0.0, false}, ga, 1).selected.k_factor);
}
BENCHMARK(BM_FitGtrvSmall)->Unit(benchmark::kMillisecond);

void BM_Objectives(benchmark::State& state) {
    const auto f = rician_target();
    std::vector<double> g(f.density);
    for (auto& v : g) v *= 1.01;
    for (auto _ : state) benchmark::DoNotOptimize(objectives(f.density, g));
}
BENCHMARK(BM_Objectives);

void BM_Synth(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(synth_scenario(Scenario::indoor, 3).size());
}
BENCHMARK(BM_Synth)->Unit(benchmark::kMillisecond);

void BM_EmpiricalPdf(benchmark::State& state) {
    const auto set = synth_scenario(Scenario::indoor, 3);
    for (auto _ : state) benchmark::DoNotOptimize(empirical_pdf(merge(set[0], set[40])).bandwidth);
}
BENCHMARK(BM_EmpiricalPdf)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
