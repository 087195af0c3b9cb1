#pragma once

#include <bitset>
#include <compare>
#include <cstdint>
#include <string>
#include <vector>

namespace ministone {

// Index into the fixed action table shared by the engine, the observation
// mask and the policy logits.
struct ActionId {
  std::uint16_t value = 0;

  constexpr ActionId() = default;
  constexpr explicit ActionId(int v) : value(static_cast<std::uint16_t>(v)) {}
  constexpr int index() const { return value; }
  friend constexpr auto operator<=>(ActionId, ActionId) = default;
};

namespace action {

inline constexpr int kHandSlots = 10;
inline constexpr int kBoardSlots = 7;
inline constexpr int kDeckSize = 30;
// One CB slot per pool card visible to the building hero.
inline constexpr int kCbSlots = 56;

// Layout:
//   [0, 56)     CB picks
//   [56, 83)    BT first operation ("type"): hand, my board, opponent board,
//               hero attack, hero power, end turn
//   [83, 99)    BT second operation ("target"): my hero, opponent hero,
//               my board, opponent board
inline constexpr int kCbBegin = 0;
inline constexpr int kTypeBegin = kCbBegin + kCbSlots;
inline constexpr int kTypeHandBegin = kTypeBegin;
inline constexpr int kTypeMyBoardBegin = kTypeHandBegin + kHandSlots;
inline constexpr int kTypeOppBoardBegin = kTypeMyBoardBegin + kBoardSlots;
inline constexpr int kTypeHeroAttack = kTypeOppBoardBegin + kBoardSlots;
inline constexpr int kTypeHeroPower = kTypeHeroAttack + 1;
inline constexpr int kTypeEndTurn = kTypeHeroPower + 1;
inline constexpr int kTypeEnd = kTypeEndTurn + 1;
inline constexpr int kTargetBegin = kTypeEnd;
inline constexpr int kTargetMyHero = kTargetBegin;
inline constexpr int kTargetOppHero = kTargetMyHero + 1;
inline constexpr int kTargetMyBoardBegin = kTargetOppHero + 1;
inline constexpr int kTargetOppBoardBegin = kTargetMyBoardBegin + kBoardSlots;
inline constexpr int kTargetEnd = kTargetOppBoardBegin + kBoardSlots;
inline constexpr int kTableSize = kTargetEnd;

constexpr ActionId cb_pick(int slot) { return ActionId(kCbBegin + slot); }
constexpr ActionId hand(int slot) { return ActionId(kTypeHandBegin + slot); }
constexpr ActionId my_board(int slot) { return ActionId(kTypeMyBoardBegin + slot); }
constexpr ActionId opp_board(int slot) { return ActionId(kTypeOppBoardBegin + slot); }
constexpr ActionId hero_attack() { return ActionId(kTypeHeroAttack); }
constexpr ActionId hero_power() { return ActionId(kTypeHeroPower); }
constexpr ActionId end_turn() { return ActionId(kTypeEndTurn); }
constexpr ActionId target_my_hero() { return ActionId(kTargetMyHero); }
constexpr ActionId target_opp_hero() { return ActionId(kTargetOppHero); }
constexpr ActionId target_my_board(int slot) { return ActionId(kTargetMyBoardBegin + slot); }
constexpr ActionId target_opp_board(int slot) { return ActionId(kTargetOppBoardBegin + slot); }

constexpr bool is_cb(ActionId a) { return a.index() < kTypeBegin; }
constexpr bool is_type(ActionId a) { return a.index() >= kTypeBegin && a.index() < kTypeEnd; }
constexpr bool is_target(ActionId a) { return a.index() >= kTargetBegin && a.index() < kTargetEnd; }

// Human-readable label, e.g. "hand[3]", "target:opp_board[0]".
std::string describe(ActionId a);

}  // namespace action

using ActionMask = std::bitset<action::kTableSize>;

std::vector<ActionId> mask_to_actions(const ActionMask& mask);

}  // namespace ministone
