#include <gtest/gtest.h>

#include <set>

#include "fixtures.hpp"
#include "ministone/evalharness/eval.hpp"

using namespace ministone;
using namespace ministone::testing;

namespace {

// Never plays a card: lowest legal pick while building, then ends every turn.
class PassiveAgent final : public Agent {
 public:
  std::string name() const override { return "passive"; }
  ActionId act(const SeatView& v, std::mt19937_64&) const override {
    const auto legal = v.encoder.engine().legal_actions(v.state);
    if (v.state.stage == Stage::DeckBuilding) return legal.front();
    return action::end_turn();
  }
};

AgentPtr random_agent() { return std::make_shared<UniformRandomAgent>(); }
AgentPtr greedy_agent() { return std::make_shared<GreedyDamageAgent>(); }
AgentPtr init_policy(std::uint64_t seed, const std::string& name = "policy") {
  auto p = std::make_shared<PolicyParams>(init_params<float>(shipped_encoder().schema(), seed, 16));
  return std::make_shared<PolicyAgent>(p, PolicyAgent::Mode::Sample, name);
}

EvalSpec small(int n, std::uint64_t seed = 3) {
  EvalSpec s;
  s.matches_per_cell = n;
  s.seed = seed;
  return s;
}

}  // namespace

TEST(GreedyBot, ScoresImmediateDamage) {
  const auto& pool = *shipped_pool();
  const auto& e = shipped_engine();
  GameState s = blank_battle(Hero::Hunter, Hero::Mage);
  s.players[0].mana = s.players[0].mana_cap = 2;
  s.players[0].board.push_back(minion(pool, "Brute"));  // 4 attack, ready
  s.players[1].deck = {0, 1, 2};  // no fatigue when the turn passes
  EXPECT_EQ(GreedyDamageAgent::damage_of(e, s, action::hero_power()), 2);
  EXPECT_EQ(GreedyDamageAgent::damage_of(e, s, action::my_board(0)), 4);
  EXPECT_EQ(GreedyDamageAgent::damage_of(e, s, action::end_turn()), 0);
  s.players[1].deck.clear();
  EXPECT_EQ(GreedyDamageAgent::damage_of(e, s, action::end_turn()), 1);  // fatigue counts
  std::mt19937_64 rng(0);
  EXPECT_EQ(GreedyDamageAgent().act({shipped_encoder(), s, 0, 0}, rng), action::my_board(0));
}

TEST(GreedyBot, AttacksThroughTauntIsZeroDamage) {
  const auto& pool = *shipped_pool();
  const auto& e = shipped_engine();
  GameState s = blank_battle();
  s.players[0].board.push_back(minion(pool, "Brute"));
  s.players[1].board.push_back(minion(pool, "Bulwark"));
  EXPECT_EQ(GreedyDamageAgent::damage_of(e, s, action::my_board(0)), 0);
}

TEST(GreedyBot, BuildsWithLowestPickAndAlwaysActsLegally) {
  const auto& e = shipped_engine();
  auto states = sample_states(e, 20, 11, 3);
  GreedyDamageAgent g;
  std::mt19937_64 rng(1);
  for (const auto& s : states) {
    const ActionId a = g.act({shipped_encoder(), s, s.active, 0}, rng);
    ASSERT_TRUE(e.is_legal(s, a));
    if (s.stage == Stage::DeckBuilding) EXPECT_EQ(a, e.legal_actions(s).front());
  }
}

TEST(PlayMatch, ReplayReproducesOutcome) {
  const auto& enc = shipped_encoder();
  MatchSpec m;
  m.heroes = {Hero::Hunter, Hero::Warrior};
  m.seed = 77;
  m.cheat_n = {5, 0};
  auto rec = play_match(enc, *init_policy(1), *greedy_agent(), m);
  EXPECT_EQ(rec.replay.actions.size(), static_cast<std::size_t>(rec.decisions));
  const auto end = rec.replay.simulate(enc.engine());
  EXPECT_EQ(end.outcome, rec.outcome);
  const auto again = play_match(enc, *init_policy(1), *greedy_agent(), m);
  EXPECT_EQ(again.replay, rec.replay);
  const auto back = Replay::parse(rec.replay.to_text());
  EXPECT_EQ(back.cheat_n, (std::array<int, 2>{5, 0}));
}

TEST(Winrate, SelfPlayIsExactlyHalf) {
  const auto& enc = shipped_encoder();
  for (const auto& a : {random_agent(), init_policy(4), greedy_agent()}) {
    auto r = run_winrate(enc, a, a, small(3));
    EXPECT_EQ(r.winrate, 0.5) << a->name();
    EXPECT_EQ(r.wins, r.losses);
  }
}

TEST(Winrate, AntisymmetricUnderSwap) {
  const auto& enc = shipped_encoder();
  const auto a = init_policy(5, "p5");
  const auto b = random_agent();
  auto ab = run_winrate(enc, a, b, small(4));
  auto ba = run_winrate(enc, b, a, small(4));
  EXPECT_EQ(ab.winrate + ba.winrate, 1.0);
  EXPECT_EQ(ab.wins, ba.losses);
  EXPECT_EQ(ab.draws, ba.draws);
}

TEST(Winrate, CellBalanceAndLayout) {
  auto r = run_winrate(shipped_encoder(), greedy_agent(), random_agent(), small(5));
  ASSERT_EQ(r.cells.size(), 18u);
  for (const auto& c : r.cells) EXPECT_EQ(c.matches, 5);
  EXPECT_EQ(r.matches, 90);
  EXPECT_EQ(r.cells[0].a_seat, 0);
  EXPECT_EQ(r.cells[17].a_seat, 1);
  EXPECT_EQ(r.cells[17].hero_b, Hero::Warrior);
}

TEST(Winrate, GreedyBeatsRandom) {
  // 12 per cell, 216 matches.
  auto r = run_winrate(shipped_encoder(), greedy_agent(), random_agent(), small(12, 9));
  EXPECT_GT(r.winrate, 0.6);
  EXPECT_GT(r.ci95, 0.0);
}

TEST(Winrate, ReproducibleAndThreadIndependent) {
  const auto& enc = shipped_encoder();
  auto s = small(2, 21);
  auto r1 = run_winrate(enc, init_policy(2), random_agent(), s);
  s.threads = 4;
  auto r2 = run_winrate(enc, init_policy(2), random_agent(), s);
  EXPECT_EQ(r1.scores, r2.scores);
}

TEST(Winrate, CheatFlagOnlyFeedsAgentA) {
  auto s = small(1, 5);
  s.cheat_a = true;
  auto r = run_winrate(shipped_encoder(), init_policy(6), random_agent(), s);
  EXPECT_EQ(r.matches, 18);
}

TEST(Winrate, RejectsBadSpec) {
  EXPECT_THROW(run_winrate(shipped_encoder(), random_agent(), random_agent(), small(0)), std::invalid_argument);
  EXPECT_THROW(run_winrate(shipped_encoder(), nullptr, random_agent(), small(1)), std::invalid_argument);
}

TEST(Report, TwoAgentMatrixHasHalfDiagonal) {
  auto m = winrate_matrix(shipped_encoder(), {greedy_agent(), random_agent()}, small(2));
  ASSERT_EQ(m.percent.size(), 2u);
  EXPECT_EQ(m.percent[0][0], 50.0);
  EXPECT_EQ(m.percent[1][1], 50.0);
  EXPECT_EQ(m.percent[0][1] + m.percent[1][0], 100.0);
  auto doc = nlohmann::json::parse(report(m));
  EXPECT_EQ(doc["agents"][0], "greedy");
}

TEST(Report, ThreeAgentsAntisymmetric) {
  auto m = winrate_matrix(shipped_encoder(), {greedy_agent(), random_agent(), init_policy(8)}, small(1));
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(m.percent[i][j] + m.percent[j][i], 100.0);
  }
}

TEST(Report, EmptyResultsAreAnError) {
  EXPECT_THROW(report(std::vector<WinrateResult>{}), std::invalid_argument);
  EXPECT_THROW(report(WinrateMatrix{}), std::invalid_argument);
}

TEST(Conquest, SweepRetiresEveryWinningHero) {
  TournamentSpec spec;
  spec.seed = 4;
  auto r = run_conquest_bo5(shipped_encoder(), greedy_agent(), std::make_shared<PassiveAgent>(), spec);
  EXPECT_EQ(r.winner, 0);
  EXPECT_EQ(r.wins, (std::array<int, 2>{3, 0}));
  ASSERT_EQ(r.games.size(), 3u);
  std::set<Hero> used;
  for (const auto& g : r.games) {
    const int seat = g.first == 0 ? 0 : 1;
    used.insert(g.heroes[static_cast<std::size_t>(seat)]);
  }
  EXPECT_EQ(used.size(), 3u);
}

TEST(Conquest, WinnerHeroUnavailableAfterwards) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    TournamentSpec spec;
    spec.seed = seed;
    auto r = run_conquest_bo5(shipped_encoder(), greedy_agent(), random_agent(), spec);
    std::array<std::set<Hero>, 2> retired;
    for (const auto& g : r.games) {
      std::array<Hero, 2> by_player{};
      by_player[static_cast<std::size_t>(g.first)] = g.heroes[0];
      by_player[static_cast<std::size_t>(1 - g.first)] = g.heroes[1];
      for (int p = 0; p < 2; ++p) EXPECT_FALSE(retired[static_cast<std::size_t>(p)].count(by_player[static_cast<std::size_t>(p)]));
      if (g.outcome == Outcome::Draw) continue;
      const int winner_seat = g.outcome == Outcome::P0Win ? 0 : 1;
      const int winner = winner_seat == 0 ? g.first : 1 - g.first;
      retired[static_cast<std::size_t>(winner)].insert(by_player[static_cast<std::size_t>(winner)]);
    }
    ASSERT_GE(r.winner, 0);
    EXPECT_EQ(r.wins[static_cast<std::size_t>(r.winner)], 3);
    EXPECT_LE(r.games.size(), 5u);
  }
}

TEST(Conquest, LogReplaysDeterministically) {
  TournamentSpec spec;
  spec.seed = 12;
  const auto& enc = shipped_encoder();
  auto r1 = run_conquest_bo5(enc, init_policy(3), random_agent(), spec);
  auto r2 = run_conquest_bo5(enc, init_policy(3), random_agent(), spec);
  ASSERT_EQ(r1.games.size(), r2.games.size());
  for (std::size_t i = 0; i < r1.games.size(); ++i) {
    EXPECT_EQ(r1.games[i].replay, r2.games[i].replay);
    EXPECT_EQ(r1.games[i].replay.simulate(enc.engine()).outcome, r1.games[i].outcome);
  }
}

TEST(Conquest, LineupDecksAreUsedAndValidated) {
  const auto& enc = shipped_encoder();
  const auto& pool = *shipped_pool();
  std::vector<CardId> deck;
  for (CardId c = 0; deck.size() < 30; ++c) {
    if (!pool.card(c).visible_to(Hero::Mage)) continue;
    for (int k = 0; k < pool.card(c).max_copies && deck.size() < 30; ++k) deck.push_back(c);
  }
  TournamentSpec spec;
  spec.lineups[0].decks[Hero::Mage] = deck;
  auto r = run_conquest_bo5(enc, greedy_agent(), random_agent(), spec);
  for (const auto& g : r.games) {
    const int seat = g.first == 0 ? 0 : 1;
    if (g.heroes[static_cast<std::size_t>(seat)] == Hero::Mage) {
      ASSERT_TRUE(g.replay.preset_decks[static_cast<std::size_t>(seat)].has_value());
      EXPECT_EQ(*g.replay.preset_decks[static_cast<std::size_t>(seat)], deck);
    }
  }
  deck.pop_back();
  spec.lineups[0].decks[Hero::Mage] = deck;
  EXPECT_THROW(run_conquest_bo5(enc, greedy_agent(), random_agent(), spec), std::invalid_argument);
}
