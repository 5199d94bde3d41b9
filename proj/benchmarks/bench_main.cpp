#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "snfl/distance.hpp"
#include "snfl/functionals.hpp"
#include "snfl/kernel_regression.hpp"
#include "snfl/noise.hpp"
#include "snfl/path_engine.hpp"
#include "snfl/skeleton.hpp"

using namespace snfl;

namespace {

void BM_Increments(benchmark::State& state) {
  std::vector<double> out(static_cast<std::size_t>(state.range(0)));
  std::uint64_t id = 0;
  for (auto _ : state) {
    fill_increments(NoiseKey{1, id++, 0}, 1.0 / static_cast<double>(out.size()), out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Increments)->Arg(128)->Arg(1024);

void BM_SimulateSde(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const Problem p = builtin("P2");
  const SkeletonPath sk = solve_skeleton(p, n);
  const NoiseStream ns = noise(2, 0, n, p.horizon);
  for (auto _ : state) benchmark::DoNotOptimize(simulate_sde(p, 0.1, ns, sk));
}
BENCHMARK(BM_SimulateSde)->Arg(128)->Arg(512);

// one full O(n) pathwise pass: scheme, D F, Theta and D Theta
void BM_PathwiseKernel(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const Problem p = builtin("P2");
  const SkeletonPath sk = solve_skeleton(p, n);
  PathwiseKernel k(p, sk, 0.1, n, Functional::terminal_state);
  const ProjectionFn g = [](std::size_t, double x) { return 1.0 + 0.1 * std::sin(x); };
  const ProjectionFn gp = [](std::size_t, double x) { return 0.1 * std::cos(x); };
  std::uint64_t id = 0;
  for (auto _ : state) {
    k.simulate(NoiseKey{3, id++, 0});
    benchmark::DoNotOptimize(k.assemble(g, gp, true));
  }
}
BENCHMARK(BM_PathwiseKernel)->Arg(128)->Arg(512);

void BM_LocalLinear(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  std::vector<double> x(n), y(n), knots(128);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = standard_normal(NoiseKey{4, i, 0}, 0);
    y[i] = std::sin(x[i]);
  }
  for (std::size_t j = 0; j < knots.size(); ++j) knots[j] = -2.5 + 5.0 * static_cast<double>(j) / 127.0;
  const double bw = silverman_bandwidth(x);
  for (auto _ : state) benchmark::DoNotOptimize(local_linear(x, y, knots, bw));
}
BENCHMARK(BM_LocalLinear)->Arg(10000)->Arg(100000);

void BM_Kolmogorov(benchmark::State& state) {
  std::vector<double> x(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = standard_normal(NoiseKey{5, i, 0}, 0);
  for (auto _ : state) benchmark::DoNotOptimize(kolmogorov_distance(x, 0.0, 1.0));
}
BENCHMARK(BM_Kolmogorov)->Arg(100000);

}  // namespace

BENCHMARK_MAIN();
