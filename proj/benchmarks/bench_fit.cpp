// Closed-form fit pieces as functions of sample count and basis size.

#include <benchmark/benchmark.h>

#include "messy/basis.hpp"
#include "messy/bench.hpp"
#include "messy/lagrange.hpp"

using namespace messy;

namespace {

template <int order>
void BM_Orthonormalize(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const SampleSet s = gen_samples("bimodal", n, 1);
  const BasisSet raw = build_basis(polynomial_basis(1, order), 1);
  for (auto _ : state) benchmark::DoNotOptimize(orthonormalize(raw, s));
  state.SetComplexityN(state.range(0));
}
BENCHMARK_TEMPLATE(BM_Orthonormalize, 4)->RangeMultiplier(4)->Range(1000, 64000)->Complexity(benchmark::oN);
BENCHMARK_TEMPLATE(BM_Orthonormalize, 8)->RangeMultiplier(4)->Range(1000, 64000)->Complexity(benchmark::oN);

void BM_FitMultipliers(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const SampleSet s = gen_samples("bimodal", n, 2);
  const BasisSet o = orthonormalize(build_basis(polynomial_basis(1, 4), 1), s);
  for (auto _ : state) benchmark::DoNotOptimize(fit_multipliers(o, s));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_FitMultipliers)->RangeMultiplier(4)->Range(1000, 64000)->Complexity(benchmark::oN);

void BM_FitMultipliersByDimension(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const SampleSet s = gen_samples("gaussNd:" + std::to_string(d), 4000, 3);
  const BasisSet o = orthonormalize(build_basis(polynomial_basis(d, 2), d), s);
  for (auto _ : state) benchmark::DoNotOptimize(fit_multipliers(o, s));
}
BENCHMARK(BM_FitMultipliersByDimension)->DenseRange(1, 8);

}  // namespace
