// Serial reference vs OpenMP path for each data-parallel kernel.
//   build/bench/bench_kernels --benchmark_filter=nearest

#include <benchmark/benchmark.h>

#include "dmarch/field.hpp"
#include "dmarch/losses.hpp"
#include "dmarch/metrics.hpp"
#include "dmarch/oracles.hpp"
#include "dmarch/samplers.hpp"

using namespace dmarch;

namespace {

FieldModel bench_model() {
  FieldConfig c;
  c.seed = 1;
  return init_field(c);
}

void BM_eval(benchmark::State& state, Exec exec) {
  const FieldModel m = bench_model();
  const Mat x = gaussian_noise(2, state.range(0), 1).points;
  for (auto _ : state) {
    BatchOutput o = exec == Exec::serial ? kernels::eval_serial(m, x) : kernels::eval_omp(m, x);
    benchmark::DoNotOptimize(o.u.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_loss_gradients(benchmark::State& state, Exec exec) {
  const FieldModel m = bench_model();
  const PairBatch b = sample_pairs(two_moons(4096, 0.05, 1), state.range(0), TimeDistribution{},
                                   CouplingStrategy{CouplingKind::random}, 2);
  const CombinedLoss loss(b, LossConfig{});
  for (auto _ : state) {
    LossGradients g = loss_gradients(m, b.x, loss, exec);
    benchmark::DoNotOptimize(g.grad.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_nearest(benchmark::State& state, Exec exec) {
  const Mat q = gaussian_noise(2, state.range(0), 1).points;
  const Mat r = gaussian_noise(2, state.range(0), 2).points;
  for (auto _ : state) {
    NearestResult n = nearest_neighbors(q, r, exec);
    benchmark::DoNotOptimize(n.dist2.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_oracle_sweep(benchmark::State& state, Exec exec) {
  const PointCloud data = two_moons(64, 0.05, 1);
  const Mat xs = gaussian_noise(2, state.range(0), 3).points;
  const OracleConfig cfg;
  for (auto _ : state) {
    auto r = minimizer_reports(xs, data, cfg, exec);
    benchmark::DoNotOptimize(r.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_chains(benchmark::State& state, Exec exec) {
  const FieldModel m = bench_model();
  const Mat x0 = eight_gaussians(state.range(0), 2.0, 0.2, 4).points;
  SamplerPlan plan;
  plan.sampler.max_steps = 1;
  plan.then_hmc = true;
  for (auto _ : state) {
    ChainBatch b = run_chains(m, x0, plan, 5, false, exec);
    benchmark::DoNotOptimize(b.final_states.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK_CAPTURE(BM_eval, serial, Exec::serial)->Arg(1024)->Arg(8192);
BENCHMARK_CAPTURE(BM_eval, omp, Exec::parallel)->Arg(1024)->Arg(8192);
BENCHMARK_CAPTURE(BM_loss_gradients, serial, Exec::serial)->Arg(512);
BENCHMARK_CAPTURE(BM_loss_gradients, omp, Exec::parallel)->Arg(512);
BENCHMARK_CAPTURE(BM_nearest, serial, Exec::serial)->Arg(2048)->Arg(10000);
BENCHMARK_CAPTURE(BM_nearest, omp, Exec::parallel)->Arg(2048)->Arg(10000);
BENCHMARK_CAPTURE(BM_oracle_sweep, serial, Exec::serial)->Arg(256);
BENCHMARK_CAPTURE(BM_oracle_sweep, omp, Exec::parallel)->Arg(256);
BENCHMARK_CAPTURE(BM_chains, serial, Exec::serial)->Arg(256);
BENCHMARK_CAPTURE(BM_chains, omp, Exec::parallel)->Arg(256);

BENCHMARK_MAIN();
