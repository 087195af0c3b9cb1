#pragma once

#include <functional>
#include <memory>
#include <random>

#include "ministone/engine/card_pool.hpp"
#include "ministone/engine/engine.hpp"

namespace ministone::testing {

inline std::shared_ptr<const CardPool> shipped_pool() {
  static auto pool = std::make_shared<const CardPool>(CardPool::load(default_pool_path()));
  return pool;
}

inline const Engine& shipped_engine() {
  static Engine engine(shipped_pool());
  return engine;
}

inline int card_by_name(const CardPool& pool, std::string_view name) {
  for (const auto& c : pool.cards()) {
    if (c.name == name) return c.id;
  }
  throw std::invalid_argument("no card named " + std::string(name));
}

// Plays uniformly random legal actions until the match ends. on_step sees
// every state after an action; returns the terminal state.
inline GameState random_playout(const Engine& engine, std::uint64_t seed,
                                const std::function<void(const GameState&, ActionId)>& on_step = {},
                                std::vector<ActionId>* actions = nullptr) {
  std::mt19937_64 rng(seed ^ 0xa5a5a5a5ull);
  Hero h0 = kAllHeroes[rng() % 3];
  Hero h1 = kAllHeroes[rng() % 3];
  GameState s = engine.new_match(h0, h1, seed);
  while (s.stage != Stage::Terminal) {
    auto legal = engine.legal_actions(s);
    ActionId a = legal[rng() % legal.size()];
    engine.apply_in_place(s, a);
    if (actions) actions->push_back(a);
    if (on_step) on_step(s, a);
  }
  return s;
}

// Builds a BT state with empty zones, both players at full health, player 0 to act.
inline GameState blank_battle(Hero h0 = Hero::Mage, Hero h1 = Hero::Mage) {
  GameState s;
  s.stage = Stage::Battle;
  s.players[0].hero = h0;
  s.players[1].hero = h1;
  s.turn_number = 1;
  s.active = 0;
  for (auto& p : s.players) {
    p.mana_cap = 1;
    p.mana = 1;
    p.turns_started = 1;
  }
  return s;
}

inline MinionInstance minion(const CardPool& pool, std::string_view name, bool can_attack = true) {
  const auto& c = pool.card(static_cast<CardId>(card_by_name(pool, name)));
  MinionInstance m;
  m.card = c.id;
  m.attack = static_cast<std::int16_t>(c.attack);
  m.health = static_cast<std::int16_t>(c.health);
  m.max_health = m.health;
  m.can_attack = can_attack;
  m.taunt = c.taunt;
  return m;
}

}  // namespace ministone::testing

namespace ministone::testing {

// Collects every intermediate state of `matches` random playouts (including
// the deck-building ones), thinned by keeping one in `stride`.
inline std::vector<GameState> sample_states(const Engine& engine, int matches, std::uint64_t seed, int stride = 1) {
  std::vector<GameState> out;
  int counter = 0;
  for (int m = 0; m < matches; ++m) {
    std::mt19937_64 rng(seed * 1000003 + m);
    GameState s = engine.new_match(kAllHeroes[rng() % 3], kAllHeroes[rng() % 3], rng());
    while (s.stage != Stage::Terminal) {
      if (counter++ % stride == 0) out.push_back(s);
      auto legal = engine.legal_actions(s);
      engine.apply_in_place(s, legal[rng() % legal.size()]);
    }
  }
  return out;
}

}  // namespace ministone::testing

#include "ministone/learner/trajectory.hpp"
#include "ministone/obsact/observation.hpp"

namespace ministone::testing {

inline const Encoder& shipped_encoder() {
  static Encoder enc(shipped_engine());
  return enc;
}

// Random-play trajectories of both seats cut into segments. Behaviour
// probabilities are drawn from [0.05, 1] unless uniform_mu, in which case they
// are 1 / #legal.
inline std::vector<TrajectorySegment> random_segments(int matches, std::uint64_t seed, int unroll = 8,
                                                      bool uniform_mu = false) {
  const auto& e = shipped_engine();
  const auto& enc = shipped_encoder();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> mu(0.05f, 1.f);
  std::vector<TrajectorySegment> out;
  std::uint64_t next_id = seed * 100000;
  for (int m = 0; m < matches; ++m) {
    GameState s = e.new_match(kAllHeroes[rng() % 3], kAllHeroes[rng() % 3], rng());
    std::vector<TrajectoryStep> steps[2];
    while (s.stage != Stage::Terminal) {
      const int p = s.active;
      auto legal = e.legal_actions(s);
      TrajectoryStep st;
      st.obs = enc.encode(s, p, static_cast<int>(rng() % 4));
      st.action = legal[rng() % legal.size()];
      st.behavior_prob = uniform_mu ? 1.f / static_cast<float>(legal.size()) : mu(rng);
      e.apply_in_place(s, st.action);
      steps[p].push_back(std::move(st));
    }
    auto r = terminal_reward(s.outcome);
    for (int p = 0; p < 2; ++p) {
      steps[p].back().done = true;
      steps[p].back().reward = static_cast<float>(r[static_cast<std::size_t>(p)]);
      for (auto& sg : cut_segments(std::move(steps[p]), unroll, -1, s.players[p].hero, next_id)) {
        out.push_back(std::move(sg));
      }
    }
  }
  return out;
}

}  // namespace ministone::testing
