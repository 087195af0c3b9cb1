#pragma once

#include <array>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ministone/engine/action_table.hpp"
#include "ministone/engine/card_pool.hpp"
#include "ministone/engine/game_state.hpp"

namespace ministone {

class IllegalAction : public std::invalid_argument {
 public:
  IllegalAction(ActionId action, const std::string& why)
      : std::invalid_argument("illegal action " + action::describe(action) + ": " + why), action_(action) {}
  ActionId action() const { return action_; }

 private:
  ActionId action_;
};

struct MatchOptions {
  // A player with a preset deck skips deck building; the deck must be 30
  // hero-eligible cards within copy limits.
  std::array<std::optional<std::vector<CardId>>, 2> preset_decks;
};

struct StepResult {
  GameState state;
  // Terminal reward per player: +1 winner, -1 loser, 0 otherwise or on draws.
  std::array<int, 2> reward{0, 0};
};

// Second operation kinds, also used as the observation decision type.
enum class PendingKind : std::uint8_t { None, Battlecry, Spell, Attack, HeroPower };

class Engine {
 public:
  explicit Engine(std::shared_ptr<const CardPool> pool);

  const CardPool& pool() const { return *pool_; }
  std::shared_ptr<const CardPool> pool_ptr() const { return pool_; }

  GameState new_match(Hero hero0, Hero hero1, std::uint64_t seed, const MatchOptions& options = {}) const;

  // Throws std::logic_error on a terminal state.
  ActionMask legal_mask(const GameState& state) const;
  std::vector<ActionId> legal_actions(const GameState& state) const;
  bool is_legal(const GameState& state, ActionId action) const;

  // Pure transition; throws IllegalAction and leaves the input untouched.
  StepResult apply_action(const GameState& state, ActionId action) const;
  // In-place transition used on hot paths. On IllegalAction the state is unchanged.
  std::array<int, 2> apply_in_place(GameState& state, ActionId action) const;

  static std::optional<Outcome> outcome(const GameState& state) { return state.outcome; }

  // Removes dead minions and decides the match if a hero is at 0 hp. When both
  // heroes die in the same resolution the non-active player wins.
  void settle(GameState& state) const;

  PendingKind pending_kind(const GameState& state) const;

  // Checks every GameState invariant; returns human-readable violations.
  std::vector<std::string> check_invariants(const GameState& state) const;

  // Validates a 30-card deck for a hero. Throws std::invalid_argument.
  void validate_deck(Hero hero, const std::vector<CardId>& deck) const;

 private:
  void begin_battle(GameState& s) const;
  void start_turn(GameState& s, int player) const;
  void end_turn(GameState& s) const;
  void draw(GameState& s, int player) const;
  void damage_hero(PlayerState& p, int amount) const;
  void apply_effect(GameState& s, const EffectSpec& e, std::optional<ActionId> target) const;
  void resolve_play(GameState& s, int hand_slot, std::optional<ActionId> target) const;
  void resolve_attack(GameState& s, ActionId attacker, ActionId target) const;
  void resolve_hero_power(GameState& s, std::optional<ActionId> target) const;
  void spend_mana(PlayerState& p, int cost) const;
  bool play_needs_target(const GameState& s, int hand_slot) const;
  void target_mask(const GameState& s, ActionId type, ActionMask& mask) const;
  int card_cost(CardId id) const;

  std::shared_ptr<const CardPool> pool_;
};

inline std::array<int, 2> terminal_reward(const std::optional<Outcome>& outcome) {
  if (!outcome || *outcome == Outcome::Draw) return {0, 0};
  return *outcome == Outcome::P0Win ? std::array<int, 2>{1, -1} : std::array<int, 2>{-1, 1};
}

}  // namespace ministone
