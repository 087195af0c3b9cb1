#include <benchmark/benchmark.h>

#include "bench_common.hpp"
#include "ministone/policy/sampler.hpp"

using namespace ministone;

namespace {

std::vector<ObservationBundle> observations(std::size_t n) {
  const auto& all = bench::states();
  std::vector<ObservationBundle> out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = all[(i * 7) % all.size()];
    out.push_back(bench::encoder().encode(s, s.active, 0));
  }
  return out;
}

}  // namespace

static void BM_SampleAction(benchmark::State& st) {
  const auto params = init_params<float>(bench::encoder().schema(), 1, static_cast<int>(st.range(0)));
  const auto obs = observations(256);
  std::mt19937_64 rng(1);
  std::size_t i = 0;
  for (auto _ : st) benchmark::DoNotOptimize(sample_action(params, obs[i++ % obs.size()], rng));
}
BENCHMARK(BM_SampleAction)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);

static void BM_BatchedForward(benchmark::State& st) {
  const auto params = init_params<float>(bench::encoder().schema(), 1, 256);
  const auto obs = observations(static_cast<std::size_t>(st.range(0)));
  std::vector<const ObservationBundle*> batch;
  for (const auto& o : obs) batch.push_back(&o);
  PolicyNet<float>::Cache cache;
  for (auto _ : st) {
    PolicyNet<float>::forward(params, batch, cache);
    benchmark::DoNotOptimize(cache);
  }
  st.SetItemsProcessed(st.iterations() * st.range(0));
}
BENCHMARK(BM_BatchedForward)->Arg(32)->Arg(512)->Unit(benchmark::kMillisecond);
