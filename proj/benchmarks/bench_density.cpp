// Expression evaluation, normalization and the KDE baseline.

#include <benchmark/benchmark.h>

#include "messy/baseline.hpp"
#include "messy/bench.hpp"
#include "messy/density.hpp"
#include "messy/expr.hpp"

using namespace messy;

namespace {

void BM_EvalRows(benchmark::State& state) {
  const Expr e = parse_expr("x^2*cos(x) - 0.5*sin(3*x)");
  const Eigen::MatrixXd pts = gen_samples("normal", static_cast<std::size_t>(state.range(0)), 4).values();
  for (auto _ : state) benchmark::DoNotOptimize(eval_rows(e, pts));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EvalRows)->RangeMultiplier(8)->Range(1000, 512000);

void BM_Normalize1D(benchmark::State& state) {
  const Expr e = parse_expr("-0.5*x^2 + 0.3*sin(2*x)");
  const SampleSet s = gen_samples("normal", 2000, 5);
  const Box support = unbounded_box(1);
  const Reference ref = make_reference(s, support);
  for (auto _ : state) benchmark::DoNotOptimize(normalize(e, support, ref));
}
BENCHMARK(BM_Normalize1D)->Unit(benchmark::kMillisecond);

void BM_Normalize2D(benchmark::State& state) {
  const Expr e = parse_expr("-0.5*x1^2 - 0.5*x2^2 + 0.4*x1*x2");
  const SampleSet s = gen_samples("gauss2d", 2000, 6);
  const Box support = unbounded_box(2);
  const Reference ref = make_reference(s, support);
  for (auto _ : state) benchmark::DoNotOptimize(normalize(e, support, ref));
}
BENCHMARK(BM_Normalize2D)->Unit(benchmark::kMillisecond);

void BM_KdeFit(benchmark::State& state) {
  const SampleSet s = gen_samples("bimodal", static_cast<std::size_t>(state.range(0)), 7);
  for (auto _ : state) benchmark::DoNotOptimize(kde_fit(s));
}
BENCHMARK(BM_KdeFit)->RangeMultiplier(4)->Range(100, 1600)->Unit(benchmark::kMillisecond);

}  // namespace
