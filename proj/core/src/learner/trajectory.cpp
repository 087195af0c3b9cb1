#include "ministone/learner/trajectory.hpp"

#include <stdexcept>

namespace ministone {

std::vector<TrajectorySegment> cut_segments(std::vector<TrajectoryStep>&& steps, int unroll, int learner_tag,
                                            Hero hero, std::uint64_t& next_id) {
  if (unroll <= 0) throw std::invalid_argument("unroll length must be positive");
  std::vector<TrajectorySegment> out;
  const std::size_t n = steps.size();
  for (std::size_t begin = 0; begin < n; begin += static_cast<std::size_t>(unroll)) {
    const std::size_t end = std::min(n, begin + static_cast<std::size_t>(unroll));
    TrajectorySegment seg;
    seg.id = next_id++;
    seg.learner_tag = learner_tag;
    seg.hero = hero;
    seg.steps.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) seg.steps.push_back(std::move(steps[i]));
    if (end < n) seg.bootstrap = steps[end].obs;
    out.push_back(std::move(seg));
  }
  return out;
}

}  // namespace ministone
