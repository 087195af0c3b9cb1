#include <benchmark/benchmark.h>

#include "bench_common.hpp"
#include "ministone/learner/learner.hpp"

using namespace ministone;

// One optimizer step on a 512-step minibatch of 8-step segments.
static void BM_LearnerUpdate(benchmark::State& st) {
  LearnerConfig cfg;
  cfg.enforce_reuse = false;
  const auto segs = bench::segments(12, cfg.unroll);
  Learner learner(init_params<float>(bench::encoder().schema(), 1, static_cast<int>(st.range(0))), cfg);
  const std::size_t per_batch = static_cast<std::size_t>(cfg.batch_steps / cfg.unroll);
  std::vector<const TrajectorySegment*> batch;
  std::size_t i = 0;
  for (auto _ : st) {
    st.PauseTiming();
    batch.clear();
    for (std::size_t k = 0; k < per_batch; ++k) batch.push_back(&segs[i++ % segs.size()]);
    st.ResumeTiming();
    benchmark::DoNotOptimize(learner.update(batch));
  }
  st.SetItemsProcessed(st.iterations() * cfg.batch_steps);
}
BENCHMARK(BM_LearnerUpdate)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

static void BM_VTraceTargets(benchmark::State& st) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 2);
  std::vector<double> r(8), V(8), rho(8), d(8, 1.0);
  for (int i = 0; i < 8; ++i) {
    r[i] = u(rng) - 1;
    V[i] = u(rng) - 1;
    rho[i] = u(rng);
  }
  for (auto _ : st) benchmark::DoNotOptimize(vtrace_targets<double>(r, V, 0.3, rho, d, VTraceConfig::clipped()));
}
BENCHMARK(BM_VTraceTargets);
