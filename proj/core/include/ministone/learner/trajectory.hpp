#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ministone/obsact/observation.hpp"

namespace ministone {

inline constexpr int kDefaultUnroll = 16;

struct TrajectoryStep {
  ObservationBundle obs;
  ActionId action;
  float behavior_prob = 1.f;   // mu(a_t | o_t)
  float reward = 0.f;          // -1, 0 or +1
  float behavior_value = 0.f;  // V_t from the actor's forward pass
  bool done = false;           // last decision of this seat in the match

  friend bool operator==(const TrajectoryStep&, const TrajectoryStep&) = default;
};

// Up to k consecutive decisions of one seat. A segment that does not end the
// match carries the observation of the seat's next decision for the value
// bootstrap. Segments that end early are simply shorter; nothing is padded.
struct TrajectorySegment {
  std::uint64_t id = 0;
  // Learner instance the segment belongs to (hero tag under isolation, -1 otherwise).
  int learner_tag = -1;
  Hero hero = Hero::Mage;
  std::vector<TrajectoryStep> steps;
  std::optional<ObservationBundle> bootstrap;

  bool terminal() const { return !steps.empty() && steps.back().done; }
  friend bool operator==(const TrajectorySegment&, const TrajectorySegment&) = default;
};

// Splits one seat's decisions into segments of at most `unroll` steps.
// `next_id` provides fresh segment ids.
std::vector<TrajectorySegment> cut_segments(std::vector<TrajectoryStep>&& steps, int unroll, int learner_tag,
                                            Hero hero, std::uint64_t& next_id);

}  // namespace ministone
