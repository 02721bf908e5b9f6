#include <benchmark/benchmark.h>

#include <cmath>

#include "tailscore/kernel_score.hpp"
#include "tailscore/oracle.hpp"
#include "tailscore/reverse_sampler.hpp"
#include "tailscore/targets.hpp"

using namespace tailscore;

static void BM_KdeScore(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const double t = 0.5;
  Stream rng(7);
  const TargetDistribution target = make_laplace(1);
  const KdeScoreModel model(target.sample(rng, n), t);
  double x[1] = {0.3}, s[1];
  for (auto _ : state) {
    model.evaluate(x, {}, s);
    benchmark::DoNotOptimize(s[0]);
    x[0] = std::fmod(x[0] + 0.37, 6.0) - 3.0;
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(n));
}
BENCHMARK(BM_KdeScore)->RangeMultiplier(10)->Range(1000, 100000);

static void BM_KdeScoreSmallT(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Stream rng(7);
  const KdeScoreModel model(make_laplace(1).sample(rng, n), 1e-3);
  double x[1] = {0.3}, s[1];
  for (auto _ : state) {
    model.evaluate(x, {}, s);
    benchmark::DoNotOptimize(s[0]);
    x[0] = std::fmod(x[0] + 0.37, 6.0) - 3.0;
  }
}
BENCHMARK(BM_KdeScoreSmallT)->RangeMultiplier(10)->Range(1000, 100000);

static void BM_OracleScore(benchmark::State& state) {
  const DiffusedOracle oracle(make_builtin_target(state.range(0) == 0 ? "laplace" : "student_t(nu=3)"));
  double x[1] = {0.3}, s[1];
  for (auto _ : state) {
    benchmark::DoNotOptimize(oracle.density_and_score(0.1, x, s));
    x[0] = std::fmod(x[0] + 0.37, 6.0) - 3.0;
  }
}
BENCHMARK(BM_OracleScore)->Arg(0)->Arg(1);

static void BM_ReverseStepsOracle(benchmark::State& state) {
  const DiffusedOracle oracle(make_gaussian(1));
  DiffusionSchedule s;
  s.T = 10.0;
  s.t0 = 1e-3;
  s.steps = 100;
  s.seed = 3;
  const auto m = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    auto batch = integrate_reverse(oracle_source(oracle), s, m, 1, 1);
    benchmark::DoNotOptimize(batch.endpoints.data().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(m) * s.steps);
}
BENCHMARK(BM_ReverseStepsOracle)->Arg(1000)->Arg(10000);

static void BM_ReverseStepsKde(benchmark::State& state) {
  Stream rng(11);
  const auto n = static_cast<std::size_t>(state.range(0));
  const KdeScoreModel model(make_laplace(1).sample(rng, n), 1e-2);
  DiffusionSchedule s;
  s.T = 30.0;
  s.t0 = 1e-2;
  s.steps = 50;
  s.seed = 3;
  for (auto _ : state) {
    auto batch = integrate_reverse(kde_source(model), s, 200, 1, 1);
    benchmark::DoNotOptimize(batch.endpoints.data().data());
  }
  state.SetItemsProcessed(state.iterations() * 200 * s.steps);
}
BENCHMARK(BM_ReverseStepsKde)->Arg(1000)->Arg(10000);
BENCHMARK_MAIN();
