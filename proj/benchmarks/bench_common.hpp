#pragma once

#include <memory>
#include <random>
#include <vector>

#include "ministone/engine/card_pool.hpp"
#include "ministone/learner/trajectory.hpp"
#include "ministone/obsact/observation.hpp"

namespace ministone::bench {

inline const Encoder& encoder() {
  static Encoder enc(Engine(std::make_shared<const CardPool>(CardPool::load(default_pool_path()))));
  return enc;
}

// Every decision state of a few random matches.
inline const std::vector<GameState>& states() {
  static const std::vector<GameState> all = [] {
    const auto& e = encoder().engine();
    std::vector<GameState> out;
    std::mt19937_64 rng(3);
    for (int m = 0; m < 20; ++m) {
      GameState s = e.new_match(kAllHeroes[m % 3], kAllHeroes[(m / 3) % 3], rng());
      while (s.stage != Stage::Terminal) {
        out.push_back(s);
        auto legal = e.legal_actions(s);
        e.apply_in_place(s, legal[rng() % legal.size()]);
      }
    }
    return out;
  }();
  return all;
}

// Random-play segments of both seats with uniform behaviour probabilities.
inline std::vector<TrajectorySegment> segments(int matches, int unroll) {
  const auto& e = encoder().engine();
  std::mt19937_64 rng(5);
  std::vector<TrajectorySegment> out;
  std::uint64_t id = 0;
  for (int m = 0; m < matches; ++m) {
    GameState s = e.new_match(kAllHeroes[m % 3], kAllHeroes[(m + 1) % 3], rng());
    std::vector<TrajectoryStep> steps[2];
    while (s.stage != Stage::Terminal) {
      const int p = s.active;
      auto legal = e.legal_actions(s);
      TrajectoryStep st;
      st.obs = encoder().encode(s, p, 0);
      st.action = legal[rng() % legal.size()];
      st.behavior_prob = 1.f / static_cast<float>(legal.size());
      e.apply_in_place(s, st.action);
      steps[p].push_back(std::move(st));
    }
    const auto r = terminal_reward(s.outcome);
    for (int p = 0; p < 2; ++p) {
      steps[p].back().done = true;
      steps[p].back().reward = static_cast<float>(r[static_cast<std::size_t>(p)]);
      for (auto& g : cut_segments(std::move(steps[p]), unroll, -1, s.players[p].hero, id)) out.push_back(std::move(g));
    }
  }
  return out;
}

}  // namespace ministone::bench
