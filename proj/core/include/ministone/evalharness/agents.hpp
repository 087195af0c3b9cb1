#pragma once

#include <array>
#include <memory>
#include <random>
#include <string>

#include "ministone/obsact/observation.hpp"
#include "ministone/policy/network.hpp"

namespace ministone {

// What a seat sees when it has to move.
struct SeatView {
  const Encoder& encoder;
  const GameState& state;
  int seat = 0;
  int cheat_n = 0;
};

// A playing agent. act() is called only when `seat` is to move and must
// return a legal action. Agents hold no per-match state; all randomness
// comes from the per-seat stream handed in by the match runner.
class Agent {
 public:
  virtual ~Agent() = default;
  virtual std::string name() const = 0;
  virtual ActionId act(const SeatView& view, std::mt19937_64& rng) const = 0;
};

using AgentPtr = std::shared_ptr<const Agent>;

// Uniform over legal actions.
class UniformRandomAgent final : public Agent {
 public:
  std::string name() const override { return "random"; }
  ActionId act(const SeatView& view, std::mt19937_64& rng) const override;
};

// Picks the legal action that removes the most enemy hero health (hp plus
// armor) right away; a first operation is scored by its best follow-up
// target. Ties, including every deck-building pick, go to the lowest index.
class GreedyDamageAgent final : public Agent {
 public:
  std::string name() const override { return "greedy"; }
  ActionId act(const SeatView& view, std::mt19937_64& rng) const override;
  // Immediate enemy-hero damage of `a` for the player to move.
  static int damage_of(const Engine& engine, const GameState& state, ActionId a);
};

// Network policy, either sampling from the masked distribution or taking
// its argmax.
class PolicyAgent final : public Agent {
 public:
  enum class Mode { Sample, Greedy };
  PolicyAgent(std::shared_ptr<const PolicyParams> params, Mode mode, std::string name = "policy");
  std::string name() const override { return name_; }
  ActionId act(const SeatView& view, std::mt19937_64& rng) const override;
  const PolicyParams& params() const { return *params_; }

 private:
  std::shared_ptr<const PolicyParams> params_;
  Mode mode_;
  std::string name_;
};

// Routes each decision to the agent of the hero the seat plays (for
// hero-isolated training runs).
class PerHeroAgent final : public Agent {
 public:
  PerHeroAgent(std::array<AgentPtr, kNumHeroes> by_hero, std::string name);
  std::string name() const override { return name_; }
  ActionId act(const SeatView& view, std::mt19937_64& rng) const override;

 private:
  std::array<AgentPtr, kNumHeroes> by_hero_;
  std::string name_;
};

// Agent from a command-line spec:
//   random | greedy | <checkpoint file or run dir>[@sample|@greedy]
// Policies sample by default. A hero-isolated run dir gives a PerHeroAgent.
// Throws std::invalid_argument (bad spec) or CheckpointError.
AgentPtr make_agent(const std::string& spec, const Encoder& encoder);

}  // namespace ministone
