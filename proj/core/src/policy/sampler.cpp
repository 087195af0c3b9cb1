#include "ministone/policy/sampler.hpp"

#include <stdexcept>

namespace ministone {

PolicyDecision sample_action(const PolicyParams& params, const ObservationBundle& obs, std::mt19937_64& rng,
                             bool random_cb) {
  auto out = PolicyNet<float>::forward_one(params, obs);
  if (random_cb && obs.delta == 1) out = random_cb_override(out, true);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double x = u(rng);
  int last = -1;
  for (int a = 0; a < action::kTableSize; ++a) {
    const float p = out.probs[static_cast<std::size_t>(a)];
    if (!(p > 0.f)) continue;
    last = a;
    x -= p;
    if (x < 0) break;
  }
  if (last < 0) throw std::runtime_error("policy assigns no mass to any legal action");
  return {ActionId(last), out.probs[static_cast<std::size_t>(last)], out.value};
}

PolicyDecision greedy_action(const PolicyParams& params, const ObservationBundle& obs) {
  auto out = PolicyNet<float>::forward_one(params, obs);
  int best = -1;
  for (int a = 0; a < action::kTableSize; ++a) {
    if (!obs.mask.test(static_cast<std::size_t>(a))) continue;
    if (best < 0 || out.probs[static_cast<std::size_t>(a)] > out.probs[static_cast<std::size_t>(best)]) best = a;
  }
  if (best < 0) throw std::invalid_argument("no legal action");
  return {ActionId(best), out.probs[static_cast<std::size_t>(best)], out.value};
}

}  // namespace ministone
