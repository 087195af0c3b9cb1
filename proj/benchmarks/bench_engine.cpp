#include <benchmark/benchmark.h>

#include "bench_common.hpp"
#include "ministone/engine/replay.hpp"

using namespace ministone;

static void BM_LegalActions(benchmark::State& st) {
  const auto& e = bench::encoder().engine();
  const auto& all = bench::states();
  std::size_t i = 0;
  for (auto _ : st) {
    benchmark::DoNotOptimize(e.legal_actions(all[i++ % all.size()]));
  }
}
BENCHMARK(BM_LegalActions);

static void BM_ApplyAction(benchmark::State& st) {
  const auto& e = bench::encoder().engine();
  const auto& all = bench::states();
  std::mt19937_64 rng(1);
  std::size_t i = 0;
  for (auto _ : st) {
    st.PauseTiming();
    GameState s = all[i++ % all.size()];
    const auto legal = e.legal_actions(s);
    const ActionId a = legal[rng() % legal.size()];
    st.ResumeTiming();
    e.apply_in_place(s, a);
    benchmark::DoNotOptimize(s);
  }
}
BENCHMARK(BM_ApplyAction);

// Whole uniformly random match, deck building included.
static void BM_RandomPlayout(benchmark::State& st) {
  const auto& e = bench::encoder().engine();
  std::mt19937_64 rng(2);
  std::int64_t steps = 0;
  for (auto _ : st) {
    GameState s = e.new_match(Hero::Mage, Hero::Warrior, rng());
    while (s.stage != Stage::Terminal) {
      const auto legal = e.legal_actions(s);
      e.apply_in_place(s, legal[rng() % legal.size()]);
      ++steps;
    }
  }
  st.counters["steps/s"] = benchmark::Counter(static_cast<double>(steps), benchmark::Counter::kIsRate);
}
BENCHMARK(BM_RandomPlayout)->Unit(benchmark::kMillisecond);

static void BM_ReplaySimulate(benchmark::State& st) {
  const auto& e = bench::encoder().engine();
  std::mt19937_64 rng(4);
  Replay r;
  r.pool_checksum = e.pool().checksum();
  r.heroes = {Hero::Hunter, Hero::Mage};
  r.seed = 17;
  GameState s = e.new_match(r.heroes[0], r.heroes[1], r.seed);
  while (s.stage != Stage::Terminal) {
    const auto legal = e.legal_actions(s);
    r.actions.push_back(legal[rng() % legal.size()]);
    e.apply_in_place(s, r.actions.back());
  }
  for (auto _ : st) benchmark::DoNotOptimize(r.simulate(e));
}
BENCHMARK(BM_ReplaySimulate)->Unit(benchmark::kMicrosecond);

static void BM_Encode(benchmark::State& st) {
  const auto& all = bench::states();
  const int cheat = static_cast<int>(st.range(0));
  std::size_t i = 0;
  for (auto _ : st) {
    const auto& s = all[i++ % all.size()];
    benchmark::DoNotOptimize(bench::encoder().encode(s, s.active, cheat));
  }
}
BENCHMARK(BM_Encode)->Arg(0)->Arg(30);
