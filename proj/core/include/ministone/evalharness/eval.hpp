#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ministone/engine/replay.hpp"
#include "ministone/evalharness/agents.hpp"

namespace ministone {

struct MatchSpec {
  std::array<Hero, 2> heroes{Hero::Mage, Hero::Mage};
  std::uint64_t seed = 0;
  std::array<int, 2> cheat_n{0, 0};
  std::array<std::optional<std::vector<CardId>>, 2> decks;
};

struct MatchRecord {
  Outcome outcome = Outcome::Draw;
  int decisions = 0;
  Replay replay;
};

// Plays one match to the end. Seat s draws from an RNG stream seeded by
// (spec.seed, s) only, so the same agent in the same seat replays identically.
MatchRecord play_match(const Encoder& encoder, const Agent& a0, const Agent& a1, const MatchSpec& spec);

// Score of seat 0: 1 win, 0.5 draw, 0 loss.
double seat_score(Outcome o, int seat);

struct EvalSpec {
  int matches_per_cell = 100;
  std::uint64_t seed = 1;
  // Cheat-evaluation: agent A sees the first n ~ Uniform{0..30} opponent picks.
  bool cheat_a = false;
  int threads = 1;
};

struct CellResult {
  int a_seat = 0;
  Hero hero_a = Hero::Mage;
  Hero hero_b = Hero::Mage;
  int matches = 0;
  int wins = 0, losses = 0, draws = 0;
  double winrate() const { return matches ? (wins + 0.5 * draws) / matches : 0.0; }
};

struct WinrateResult {
  std::string a, b;
  int matches = 0;
  int wins = 0, losses = 0, draws = 0;
  double winrate = 0;    // (wins + draws / 2) / matches
  double ci95 = 0;       // normal-approximation half width
  std::vector<CellResult> cells;  // 18 = a_seat x hero_a x hero_b
  std::vector<double> scores;     // per match, in cell order
};

// 2 x 3 x 3 cells of N matches. The match set is shared: the match for
// (seat heroes, k) has the same seed whichever agent sits in which seat, so
// run_winrate(A, A) is exactly 0.5 and run_winrate(A, B) + run_winrate(B, A)
// is exactly 1.
WinrateResult run_winrate(const Encoder& encoder, const AgentPtr& a, const AgentPtr& b, const EvalSpec& spec);

void to_json(nlohmann::json& j, const WinrateResult& r);

struct WinrateMatrix {
  std::vector<std::string> agents;
  std::vector<std::vector<double>> percent;  // (i, j): winrate of i against j
  std::vector<std::vector<double>> ci95;
};

// Pairwise matrix over `agents`. Each unordered pair is played once; the
// lower triangle is the complement of the upper one and the diagonal 50.
WinrateMatrix winrate_matrix(const Encoder& encoder, const std::vector<AgentPtr>& agents, const EvalSpec& spec);

// Structured report of a finished evaluation. Throws std::invalid_argument
// on an empty result set.
std::string report(const WinrateMatrix& m);
std::string report(const std::vector<WinrateResult>& results);

// Conquest best-of-five: a player's hero that wins a game is retired for
// that player; first to three wins takes the series. Drawn games do not
// count and retire nothing.
class ConquestTracker {
 public:
  ConquestTracker();
  const std::vector<Hero>& available(int player) const { return available_.at(static_cast<std::size_t>(player)); }
  // winner: 0, 1, or -1 for a draw. Throws std::invalid_argument when a
  // retired hero is reported or the series is already decided.
  void record(std::array<Hero, 2> heroes_by_player, int winner);
  const std::array<int, 2>& wins() const { return wins_; }
  int winner() const { return winner_; }
  bool finished() const { return winner_ >= 0; }

 private:
  std::array<std::vector<Hero>, 2> available_;
  std::array<int, 2> wins_{0, 0};
  int winner_ = -1;
};

struct Lineup {
  // Deck per hero; heroes without a deck build one with the agent's CB policy.
  std::map<Hero, std::vector<CardId>> decks;
};

struct TournamentSpec {
  std::array<Lineup, 2> lineups;
  std::uint64_t seed = 1;
  int max_games = 25;  // guards against endless draws
};

struct SeriesGame {
  std::array<Hero, 2> heroes;
  int first = 0;  // player in seat 0
  Outcome outcome;
  Replay replay;
};

struct SeriesResult {
  std::array<int, 2> wins{0, 0};
  int winner = -1;  // -1 when max_games ran out
  std::vector<SeriesGame> games;
};

SeriesResult run_conquest_bo5(const Encoder& encoder, const AgentPtr& p0, const AgentPtr& p1, const TournamentSpec& spec);

}  // namespace ministone
