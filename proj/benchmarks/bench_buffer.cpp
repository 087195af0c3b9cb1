#include <benchmark/benchmark.h>

#include "ministone/pipeline/buffer.hpp"

using namespace ministone;

namespace {

SegmentPtr seg(std::uint64_t id) {
  auto s = std::make_shared<TrajectorySegment>();
  s->id = id;
  return s;
}

}  // namespace

// Push four, pop the batch twice (queue) or once per two pushes (ring).
static void BM_BufferCycle(benchmark::State& st) {
  const auto d = st.range(0) ? BufferDiscipline::Ring : BufferDiscipline::Queue;
  SegmentBuffer b({d, 256, 2});
  std::uint64_t id = 0;
  for (auto _ : st) {
    for (int i = 0; i < 4; ++i) b.push(seg(id++));
    b.pop_batch(4);
    b.pop_batch(4);
  }
  st.SetItemsProcessed(st.iterations() * 4);
}
BENCHMARK(BM_BufferCycle)->Arg(0)->Arg(1)->ArgNames({"ring"});
