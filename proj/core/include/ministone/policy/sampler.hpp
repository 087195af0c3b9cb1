#pragma once

#include <random>

#include "ministone/policy/network.hpp"

namespace ministone {

struct PolicyDecision {
  ActionId action;
  float prob = 0;   // probability of `action` under the distribution it was drawn from
  float value = 0;  // V(o) from the same forward pass
};

// Draws an action from the masked policy. With random_cb on a deck-building
// observation the pick is uniform over legal picks instead.
PolicyDecision sample_action(const PolicyParams& params, const ObservationBundle& obs, std::mt19937_64& rng,
                             bool random_cb = false);

// Most probable legal action; ties go to the lowest index.
PolicyDecision greedy_action(const PolicyParams& params, const ObservationBundle& obs);

}  // namespace ministone
