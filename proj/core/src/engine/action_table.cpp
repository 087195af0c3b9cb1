#include "ministone/engine/action_table.hpp"

namespace ministone {

namespace action {

std::string describe(ActionId a) {
  const int i = a.index();
  auto slot = [](const char* name, int k) { return std::string(name) + "[" + std::to_string(k) + "]"; };
  if (i < kTypeBegin) return slot("cb", i - kCbBegin);
  if (i < kTypeMyBoardBegin) return slot("hand", i - kTypeHandBegin);
  if (i < kTypeOppBoardBegin) return slot("my_board", i - kTypeMyBoardBegin);
  if (i < kTypeHeroAttack) return slot("opp_board", i - kTypeOppBoardBegin);
  if (i == kTypeHeroAttack) return "hero_attack";
  if (i == kTypeHeroPower) return "hero_power";
  if (i == kTypeEndTurn) return "end_turn";
  if (i == kTargetMyHero) return "target:my_hero";
  if (i == kTargetOppHero) return "target:opp_hero";
  if (i < kTargetOppBoardBegin) return "target:" + slot("my_board", i - kTargetMyBoardBegin);
  if (i < kTargetEnd) return "target:" + slot("opp_board", i - kTargetOppBoardBegin);
  return "invalid(" + std::to_string(i) + ")";
}

}  // namespace action

std::vector<ActionId> mask_to_actions(const ActionMask& mask) {
  std::vector<ActionId> out;
  out.reserve(mask.count());
  for (int i = 0; i < action::kTableSize; ++i) {
    if (mask.test(static_cast<std::size_t>(i))) out.emplace_back(i);
  }
  return out;
}

}  // namespace ministone
