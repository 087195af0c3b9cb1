#include <gtest/gtest.h>

#include <algorithm>

#include "fixtures.hpp"
#include "ministone/obsact/observation.hpp"

using namespace ministone;
using namespace ministone::testing;

namespace {

const Encoder& encoder() {
  static Encoder enc(shipped_engine());
  return enc;
}

std::vector<float> slice(const std::vector<float>& v, const FieldSpec& f) {
  return {v.begin() + f.offset, v.begin() + f.offset + f.width};
}

GameState battle_state(std::uint64_t seed) {
  const auto& e = shipped_engine();
  std::mt19937_64 rng(seed);
  GameState s = e.new_match(Hero::Mage, Hero::Hunter, seed);
  while (s.stage == Stage::DeckBuilding) {
    auto legal = e.legal_actions(s);
    e.apply_in_place(s, legal[rng() % legal.size()]);
  }
  for (int i = 0; i < 25 && s.stage == Stage::Battle; ++i) {
    auto legal = e.legal_actions(s);
    e.apply_in_place(s, legal[rng() % legal.size()]);
  }
  return s;
}

std::vector<float> without(const std::vector<float>& v, const std::vector<FieldSpec>& fields,
                           std::initializer_list<std::string_view> drop) {
  std::vector<float> out = v;
  for (const auto& f : fields) {
    if (std::find(drop.begin(), drop.end(), f.name) != drop.end()) {
      std::fill(out.begin() + f.offset, out.begin() + f.offset + f.width, -7.f);
    }
  }
  return out;
}

}  // namespace

TEST(DecisionType, FollowsStageAndPending) {
  const auto& e = shipped_engine();
  const auto& pool = *shipped_pool();
  GameState s = e.new_match(Hero::Mage, Hero::Mage, 1);
  EXPECT_EQ(decision_type(e, s), DecisionType::Construct);
  GameState b = blank_battle();
  EXPECT_EQ(decision_type(e, b), DecisionType::Select);
  b.players[0].mana = b.players[0].mana_cap = 2;
  b.players[0].hand = {static_cast<CardId>(card_by_name(pool, "Zap"))};
  e.apply_in_place(b, action::hand(0));
  EXPECT_EQ(decision_type(e, b), DecisionType::Spell);
}

TEST(Encode, DeckBuildingPickedMultiset) {
  const auto& e = shipped_engine();
  GameState s = e.new_match(Hero::Warrior, Hero::Mage, 4);
  for (int slot : {3, 3, 40}) e.apply_in_place(s, action::cb_pick(slot));
  auto o = encoder().encode(s, 0, 0);
  EXPECT_EQ(o.delta, 1);
  EXPECT_EQ(o.decision, DecisionType::Construct);
  auto picked = slice(o.cb, encoder().schema().cb_field("picked_counts"));
  std::vector<float> expect(56, 0.f);
  expect[3] = 2.f;
  expect[40] = 1.f;
  EXPECT_EQ(picked, expect);
  auto can = slice(o.cb, encoder().schema().cb_field("can_select"));
  EXPECT_EQ(can[3], 0.f);
  EXPECT_EQ(can[40], 1.f);
  EXPECT_TRUE(std::all_of(o.bt.begin(), o.bt.end(), [](float x) { return x == 0.f; }));
  for (int i = action::kTypeBegin; i < action::kTableSize; ++i) EXPECT_FALSE(o.mask.test(i));
}

TEST(Encode, ZeroCheatEqualsPlainAndBlockIsEmpty) {
  GameState s = battle_state(3);
  auto o = encoder().encode(s, s.active, 0);
  const auto& sc = encoder().schema();
  for (auto name : {"cheat_counts", "cheat_n"}) {
    auto v = slice(o.bt, sc.bt_field(name));
    EXPECT_TRUE(std::all_of(v.begin(), v.end(), [](float x) { return x == 0.f; }));
    auto c = slice(o.cb, sc.cb_field(name));
    EXPECT_TRUE(std::all_of(c.begin(), c.end(), [](float x) { return x == 0.f; }));
  }
  for (const auto& b : o.bt_bags) EXPECT_NE(b.slot, sc.bt_slot("cheat_deck"));
}

TEST(Encode, CheatRevealsExactPrefix) {
  GameState s = battle_state(5);
  const int me = s.active;
  const auto& opp = s.players[1 - me];
  const auto& sc = encoder().schema();
  for (int n : {1, 7, 30}) {
    auto o = encoder().encode(s, me, n);
    auto counts = slice(o.bt, sc.bt_field("cheat_counts"));
    std::vector<float> expect(static_cast<std::size_t>(sc.pool_size()), 0.f);
    for (int k = 0; k < n; ++k) expect[static_cast<std::size_t>(opp.picks[static_cast<std::size_t>(k)])] += 1.f;
    EXPECT_EQ(counts, expect) << "n=" << n;
  }
}

TEST(Encode, CheatIsMonotonePrefixExtension) {
  GameState s = battle_state(6);
  const auto& sc = encoder().schema();
  auto prev = encoder().encode(s, s.active, 0);
  for (int n = 1; n <= 30; ++n) {
    auto cur = encoder().encode(s, s.active, n);
    EXPECT_EQ(without(cur.bt, sc.bt_fields(), {"cheat_counts", "cheat_n"}),
              without(prev.bt, sc.bt_fields(), {"cheat_counts", "cheat_n"}));
    EXPECT_EQ(without(cur.cb, sc.cb_fields(), {"cheat_counts", "cheat_n"}),
              without(prev.cb, sc.cb_fields(), {"cheat_counts", "cheat_n"}));
    auto pc = slice(prev.bt, sc.bt_field("cheat_counts"));
    auto cc = slice(cur.bt, sc.bt_field("cheat_counts"));
    float added = 0;
    for (std::size_t i = 0; i < pc.size(); ++i) {
      EXPECT_GE(cc[i], pc[i]);
      added += cc[i] - pc[i];
    }
    EXPECT_EQ(added, 1.f);
    prev = cur;
  }
}

TEST(Encode, OpponentHiddenZonesNeverLeak) {
  for (std::uint64_t seed = 10; seed < 30; ++seed) {
    GameState s = battle_state(seed);
    if (s.stage != Stage::Battle) continue;
    const int me = s.active;
    const int cheat = static_cast<int>(seed % 10);
    auto base = encoder().encode(s, me, cheat);
    GameState t = s;
    auto& opp = t.players[1 - me];
    // Reorder the opponent hand and replace every hidden card with another id.
    std::reverse(opp.hand.begin(), opp.hand.end());
    for (auto& c : opp.hand) {
      if (c != kCoinCard) c = static_cast<CardId>((c + 11) % 48);
    }
    std::reverse(opp.deck.begin(), opp.deck.end());
    for (auto& c : opp.deck) c = static_cast<CardId>((c + 5) % 48);
    for (std::size_t k = static_cast<std::size_t>(cheat); k < opp.picks.size(); ++k) {
      opp.picks[k] = static_cast<CardId>((opp.picks[k] + 3) % 48);
    }
    EXPECT_EQ(encoder().encode(t, me, cheat), base) << "seed " << seed;
  }
}

TEST(Encode, PlayerSwapIsConsistent) {
  const auto& sc = encoder().schema();
  for (std::uint64_t seed = 40; seed < 50; ++seed) {
    GameState s = battle_state(seed);
    if (s.stage != Stage::Battle) continue;
    auto a = encoder().encode(s, 0, 0);
    auto b = encoder().encode(s, 1, 0);
    EXPECT_EQ(slice(a.bt, sc.bt_field("my_board")), slice(b.bt, sc.bt_field("opp_board")));
    EXPECT_EQ(slice(a.bt, sc.bt_field("opp_board")), slice(b.bt, sc.bt_field("my_board")));
    EXPECT_EQ(slice(a.bt, sc.bt_field("my_stats")), slice(b.bt, sc.bt_field("opp_stats")));
    EXPECT_EQ(slice(a.bt, sc.bt_field("my_graveyard")), slice(b.bt, sc.bt_field("opp_graveyard")));
    EXPECT_EQ(slice(a.bt, sc.bt_field("my_hero")), slice(b.bt, sc.bt_field("opp_hero")));
    // Only the acting player gets a mask.
    EXPECT_EQ((s.active == 0 ? a : b).mask, shipped_engine().legal_mask(s));
    EXPECT_TRUE((s.active == 0 ? b : a).mask.none());
  }
}

TEST(Encode, RejectsTerminalAndBadCheat) {
  GameState s = blank_battle();
  EXPECT_THROW(encoder().encode(s, 0, 31), std::invalid_argument);
  EXPECT_THROW(encoder().encode(s, 0, -1), std::invalid_argument);
  s.stage = Stage::Terminal;
  s.outcome = Outcome::Draw;
  EXPECT_THROW(encoder().encode(s, 0, 0), std::invalid_argument);
}

TEST(ActionMask, MatchesLegalActions) {
  const auto& e = shipped_engine();
  auto states = sample_states(e, 40, 77, 3);
  ASSERT_GT(states.size(), 1000u);
  for (const auto& s : states) {
    auto o = encoder().encode(s, s.active, 0);
    EXPECT_EQ(mask_to_actions(o.mask), e.legal_actions(s));
    EXPECT_GE(o.mask.count(), 1u);
    if (s.pending) {
      for (int i = 0; i < action::kTargetBegin; ++i) EXPECT_FALSE(o.mask.test(i));
    }
  }
}

TEST(ActionMask, ManaStarvedFixture) {
  const auto& pool = *shipped_pool();
  GameState s = blank_battle();
  s.players[0].hand = {static_cast<CardId>(card_by_name(pool, "Yeti"))};
  s.players[0].board.push_back(minion(pool, "Boar", true));
  auto m = encoder().action_mask(s, 0);
  EXPECT_EQ(mask_to_actions(m), (std::vector<ActionId>{action::my_board(0), action::end_turn()}));
}

TEST(Schema, JsonListsEveryField) {
  auto doc = encoder().schema().to_json();
  for (const auto& f : encoder().schema().bt_fields()) EXPECT_NE(doc.find("\"" + f.name + "\""), std::string::npos);
  EXPECT_NE(doc.find("hero_attack"), std::string::npos);
  // Fields tile the dense block with no gaps.
  int next = 0;
  for (const auto& f : encoder().schema().bt_fields()) {
    EXPECT_EQ(f.offset, next);
    next += f.width;
  }
  EXPECT_EQ(next, encoder().schema().bt_dense_width());
}
