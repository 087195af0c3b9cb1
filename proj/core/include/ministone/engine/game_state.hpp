#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ministone/engine/action_table.hpp"
#include "ministone/engine/card_pool.hpp"

namespace ministone {

enum class Stage : std::uint8_t { PickHero, DeckBuilding, Battle, Terminal };
enum class Outcome : std::uint8_t { P0Win, P1Win, Draw };

std::string_view to_string(Stage s);
std::string_view to_string(Outcome o);

inline constexpr int kMaxHeroHp = 30;
inline constexpr int kMaxMana = 10;
inline constexpr int kHalfTurnCap = 120;

struct MinionInstance {
  CardId card = 0;
  std::int16_t attack = 0;
  std::int16_t health = 0;
  std::int16_t max_health = 0;
  bool can_attack = false;
  bool taunt = false;

  friend bool operator==(const MinionInstance&, const MinionInstance&) = default;
};

struct Weapon {
  CardId card = 0;
  std::int16_t attack = 0;
  std::int16_t durability = 0;

  friend bool operator==(const Weapon&, const Weapon&) = default;
};

struct PlayerState {
  Hero hero = Hero::Mage;
  // Cards in the order they were chosen during deck building (or the preset
  // deck order). Never changes after deck building ends.
  std::vector<CardId> picks;
  // Remaining deck; the top card is back().
  std::vector<CardId> deck;
  std::vector<CardId> hand;
  std::vector<MinionInstance> board;
  std::vector<CardId> graveyard;
  std::int16_t hero_hp = kMaxHeroHp;
  std::int16_t armor = 0;
  std::optional<Weapon> weapon;
  std::int16_t mana = 0;
  std::int16_t mana_cap = 0;
  // Temporary mana from the Coin; spent before regular mana, cleared at end of turn.
  std::int16_t temp_mana = 0;
  std::int16_t fatigue = 0;
  std::int16_t turns_started = 0;
  bool coin = false;  // received the Coin as second player
  bool hero_power_used = false;
  bool hero_attacked = false;
  bool preset_deck = false;

  int available_mana() const { return mana + temp_mana; }

  friend bool operator==(const PlayerState&, const PlayerState&) = default;
};

// Full authoritative state of one match. A value type: engine operations
// take a state and return a new one.
struct GameState {
  Stage stage = Stage::DeckBuilding;
  std::array<PlayerState, 2> players;
  // Battle half-turns started so far.
  std::int16_t turn_number = 0;
  // Deck builder during CB, turn owner during BT.
  std::uint8_t active = 0;
  // First operation of a (type, target) pair awaiting its target.
  std::optional<ActionId> pending;
  std::uint64_t rng_state = 0;
  std::optional<Outcome> outcome;

  const PlayerState& me() const { return players[active]; }
  const PlayerState& opponent() const { return players[1 - active]; }

  friend bool operator==(const GameState&, const GameState&) = default;
};

// Deterministic byte encoding of every field; equal states encode equally.
std::string serialize(const GameState& state);

}  // namespace ministone
