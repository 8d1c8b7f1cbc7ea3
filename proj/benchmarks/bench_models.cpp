// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include <benchmark/benchmark.h>

#include "tworay/models.hpp"

using namespace tworay;

namespace {

std::vector<double> grid(std::size_t n, double hi = 2.5) {
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = hi * static_cast<double>(i) / static_cast<double>(n - 1);
    return g;
}

void BM_ClosedForm(benchmark::State& state) {
    const IftrParams p{10.0, 0.5, 2.0, static_cast<double>(state.range(0)), 1.0};
    double r = 0.9;
    for (auto _ : state) {
        benchmark::DoNotOptimize(iftr_pdf_closed(p, r));
        r = r > 1.5 ? 0.3 : r + 0.01;
    }
}
BENCHMARK(BM_ClosedForm)->Arg(1)->Arg(4)->Arg(10);

void BM_QuadratureGrid(benchmark::State& state) {
    const IftrParams p{std::pow(10.0, state.range(0) / 10.0), 0.7, 5.0, 30.0, 1.0};
    const auto g = grid(100);
    for (auto _ : state) benchmark::DoNotOptimize(iftr_pdf_quadrature(p, g));
}
BENCHMARK(BM_QuadratureGrid)->Arg(0)->Arg(10)->Arg(25)->Unit(benchmark::kMillisecond);

void BM_Spectral(benchmark::State& state) {
    const auto g = grid(100);
    const IftrSpectral model(g, {1000.0, 1.0, state.range(0) ? 0.04 : 0.0});
    std::vector<double> out(g.size());
    double k = 1.0;
    for (auto _ : state) {
        model.evaluate({k, 0.6, 7.0, 23.0, 1.0}, out);
        benchmark::DoNotOptimize(out.data());
        k = k > 700.0 ? 1.0 : k * 1.37;
    }
}
BENCHMARK(BM_Spectral)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

void BM_SpectralBuild(benchmark::State& state) {
    const auto g = grid(100);
    for (auto _ : state) benchmark::DoNotOptimize(IftrSpectral(g, {1000.0, 1.0, 0.04}).rho_count());
}
BENCHMARK(BM_SpectralBuild)->Unit(benchmark::kMillisecond);

void BM_GtrvGrid(benchmark::State& state) {
    const auto g = grid(100);
    const GtrvGridEvaluator model(g, 12.04, -0.10, state.range(0) ? 0.04 : 0.0);
    std::vector<double> out(g.size());
    double k = 1.0;
    for (auto _ : state) {
        model.evaluate(k, 0.45, 1.0, out);
        benchmark::DoNotOptimize(out.data());
        k = k > 700.0 ? 1.0 : k * 1.37;
    }
}
BENCHMARK(BM_GtrvGrid)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_GtrvPointwise(benchmark::State& state) {
    const GtrvParams p{95.5, 0.45, 12.04, -0.10, 1.0};
    double r = 0.5;
    for (auto _ : state) {
        benchmark::DoNotOptimize(gtrv_pdf(p, r));
        r = r > 1.5 ? 0.5 : r + 0.01;
    }
}
BENCHMARK(BM_GtrvPointwise)->Unit(benchmark::kMicrosecond);

void BM_IftrSample(benchmark::State& state) {
    const IftrParams p{316.0, 0.9, 5.0, 30.0, 1.0};
    for (auto _ : state) benchmark::DoNotOptimize(iftr_sample(p, 100000, 7));
}
BENCHMARK(BM_IftrSample)->Unit(benchmark::kMillisecond);

}  // namespace
