#include "ministone/evalharness/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "ministone/util/seed.hpp"

namespace ministone {

MatchRecord play_match(const Encoder& encoder, const Agent& a0, const Agent& a1, const MatchSpec& spec) {
  const auto& engine = encoder.engine();
  MatchOptions opt;
  opt.preset_decks = spec.decks;
  GameState s = engine.new_match(spec.heroes[0], spec.heroes[1], spec.seed, opt);
  std::array<std::mt19937_64, 2> rng{std::mt19937_64(derive_seed(spec.seed, {0, 0xa6e47})),
                                     std::mt19937_64(derive_seed(spec.seed, {1, 0xa6e47}))};
  const std::array<const Agent*, 2> agents{&a0, &a1};
  MatchRecord rec;
  rec.replay.pool_checksum = engine.pool().checksum();
  rec.replay.heroes = spec.heroes;
  rec.replay.seed = spec.seed;
  rec.replay.preset_decks = spec.decks;
  rec.replay.cheat_n = spec.cheat_n;
  while (s.stage != Stage::Terminal) {
    const int seat = s.active;
    const SeatView view{encoder, s, seat, spec.cheat_n[static_cast<std::size_t>(seat)]};
    const ActionId a = agents[static_cast<std::size_t>(seat)]->act(view, rng[static_cast<std::size_t>(seat)]);
    engine.apply_in_place(s, a);
    rec.replay.actions.push_back(a);
    ++rec.decisions;
  }
  rec.outcome = *s.outcome;
  return rec;
}

double seat_score(Outcome o, int seat) {
  if (o == Outcome::Draw) return 0.5;
  return (o == Outcome::P0Win) == (seat == 0) ? 1.0 : 0.0;
}

namespace {

double ci95(double w, int n) { return n > 0 ? 1.96 * std::sqrt(w * (1.0 - w) / n) : 0.0; }

template <class F>
void parallel_for(int n, int threads, F&& body) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      try {
        for (int i = next++; i < n; i = next++) body(i);
      } catch (...) {
        std::lock_guard lk(err_mu);
        if (!err) err = std::current_exception();
        next = n;
      }
    });
  }
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace

WinrateResult run_winrate(const Encoder& encoder, const AgentPtr& a, const AgentPtr& b, const EvalSpec& spec) {
  if (!a || !b) throw std::invalid_argument("evaluation needs two agents");
  if (spec.matches_per_cell < 1) throw std::invalid_argument("matches per cell must be at least 1");
  const int n = spec.matches_per_cell;
  WinrateResult r;
  r.a = a->name();
  r.b = b->name();
  for (int seat = 0; seat < 2; ++seat) {
    for (Hero ha : kAllHeroes) {
      for (Hero hb : kAllHeroes) r.cells.push_back({seat, ha, hb, 0, 0, 0, 0});
    }
  }
  const int total = static_cast<int>(r.cells.size()) * n;
  r.scores.assign(static_cast<std::size_t>(total), 0.0);
  parallel_for(total, spec.threads, [&](int i) {
    const auto& cell = r.cells[static_cast<std::size_t>(i / n)];
    const int k = i % n;
    MatchSpec m;
    m.heroes = cell.a_seat == 0 ? std::array<Hero, 2>{cell.hero_a, cell.hero_b}
                                : std::array<Hero, 2>{cell.hero_b, cell.hero_a};
    // Depends on the seat heroes and k only, never on who sits where.
    m.seed = derive_seed(spec.seed, {static_cast<std::uint64_t>(m.heroes[0]), static_cast<std::uint64_t>(m.heroes[1]),
                                     static_cast<std::uint64_t>(k)});
    if (spec.cheat_a) {
      std::mt19937_64 crng(derive_seed(m.seed, {0xc4ea7}));
      m.cheat_n[static_cast<std::size_t>(cell.a_seat)] = std::uniform_int_distribution<int>(0, kMaxCheat)(crng);
    }
    const Agent& s0 = cell.a_seat == 0 ? *a : *b;
    const Agent& s1 = cell.a_seat == 0 ? *b : *a;
    const auto rec = play_match(encoder, s0, s1, m);
    r.scores[static_cast<std::size_t>(i)] = seat_score(rec.outcome, cell.a_seat);
  });
  for (int i = 0; i < total; ++i) {
    auto& cell = r.cells[static_cast<std::size_t>(i / n)];
    const double s = r.scores[static_cast<std::size_t>(i)];
    ++cell.matches;
    if (s == 1.0) {
      ++cell.wins;
    } else if (s == 0.0) {
      ++cell.losses;
    } else {
      ++cell.draws;
    }
  }
  for (const auto& c : r.cells) {
    r.matches += c.matches;
    r.wins += c.wins;
    r.losses += c.losses;
    r.draws += c.draws;
  }
  r.winrate = (r.wins + 0.5 * r.draws) / r.matches;
  r.ci95 = ci95(r.winrate, r.matches);
  return r;
}

void to_json(nlohmann::json& j, const WinrateResult& r) {
  j = {{"a", r.a},           {"b", r.b},         {"matches", r.matches},
       {"wins", r.wins},     {"losses", r.losses}, {"draws", r.draws},
       {"winrate", r.winrate}, {"ci95", r.ci95}};
  auto cells = nlohmann::json::array();
  for (const auto& c : r.cells) {
    cells.push_back({{"a_seat", c.a_seat},
                     {"hero_a", to_string(c.hero_a)},
                     {"hero_b", to_string(c.hero_b)},
                     {"matches", c.matches},
                     {"wins", c.wins},
                     {"losses", c.losses},
                     {"draws", c.draws},
                     {"winrate", c.winrate()}});
  }
  j["cells"] = cells;
}

WinrateMatrix winrate_matrix(const Encoder& encoder, const std::vector<AgentPtr>& agents, const EvalSpec& spec) {
  const std::size_t n = agents.size();
  WinrateMatrix m;
  for (const auto& a : agents) m.agents.push_back(a->name());
  m.percent.assign(n, std::vector<double>(n, 50.0));
  m.ci95.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto r = run_winrate(encoder, agents[i], agents[j], spec);
      m.percent[i][j] = 100.0 * r.winrate;
      m.percent[j][i] = 100.0 - m.percent[i][j];
      m.ci95[i][j] = m.ci95[j][i] = 100.0 * r.ci95;
    }
  }
  return m;
}

std::string report(const WinrateMatrix& m) {
  if (m.agents.empty()) throw std::invalid_argument("no agents to report");
  nlohmann::json j;
  j["agents"] = m.agents;
  j["winrate_percent"] = m.percent;
  j["ci95_percent"] = m.ci95;
  std::ostringstream table;
  table << "row vs column, winrate %\n";
  for (std::size_t i = 0; i < m.agents.size(); ++i) {
    table << m.agents[i];
    for (std::size_t k = 0; k < m.agents.size(); ++k) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "\t%.1f", m.percent[i][k]);
      table << buf;
    }
    table << '\n';
  }
  j["table"] = table.str();
  return j.dump(2);
}

std::string report(const std::vector<WinrateResult>& results) {
  if (results.empty()) throw std::invalid_argument("no evaluation results to report");
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : results) j.push_back(r);
  return j.dump(2);
}

ConquestTracker::ConquestTracker() {
  for (auto& av : available_) av.assign(std::begin(kAllHeroes), std::end(kAllHeroes));
}

void ConquestTracker::record(std::array<Hero, 2> heroes_by_player, int winner) {
  if (finished()) throw std::invalid_argument("series already decided");
  if (winner < -1 || winner > 1) throw std::invalid_argument("winner must be 0, 1 or -1");
  for (int p = 0; p < 2; ++p) {
    const auto& av = available_[static_cast<std::size_t>(p)];
    if (std::find(av.begin(), av.end(), heroes_by_player[static_cast<std::size_t>(p)]) == av.end()) {
      throw std::invalid_argument("player " + std::to_string(p) + " already won with " +
                                  std::string(to_string(heroes_by_player[static_cast<std::size_t>(p)])));
    }
  }
  if (winner < 0) return;
  const auto w = static_cast<std::size_t>(winner);
  auto& av = available_[w];
  av.erase(std::find(av.begin(), av.end(), heroes_by_player[w]));
  if (++wins_[w] == 3) winner_ = winner;
}

SeriesResult run_conquest_bo5(const Encoder& encoder, const AgentPtr& p0, const AgentPtr& p1,
                              const TournamentSpec& spec) {
  const std::array<const Agent*, 2> players{p0.get(), p1.get()};
  if (!p0 || !p1) throw std::invalid_argument("tournament needs two agents");
  for (const auto& l : spec.lineups) {
    for (const auto& [hero, deck] : l.decks) encoder.engine().validate_deck(hero, deck);
  }
  ConquestTracker series;
  std::mt19937_64 rng(derive_seed(spec.seed, {0xb05}));
  SeriesResult out;
  for (int g = 0; g < spec.max_games && !series.finished(); ++g) {
    std::array<Hero, 2> pick{};
    for (int p = 0; p < 2; ++p) {
      const auto& av = series.available(p);
      pick[static_cast<std::size_t>(p)] = av[std::uniform_int_distribution<std::size_t>(0, av.size() - 1)(rng)];
    }
    const int first = g % 2;
    MatchSpec m;
    m.seed = derive_seed(spec.seed, {static_cast<std::uint64_t>(g)});
    for (int seat = 0; seat < 2; ++seat) {
      const int p = seat == 0 ? first : 1 - first;
      m.heroes[static_cast<std::size_t>(seat)] = pick[static_cast<std::size_t>(p)];
      const auto& decks = spec.lineups[static_cast<std::size_t>(p)].decks;
      if (auto it = decks.find(pick[static_cast<std::size_t>(p)]); it != decks.end()) {
        m.decks[static_cast<std::size_t>(seat)] = it->second;
      }
    }
    const auto rec = play_match(encoder, *players[static_cast<std::size_t>(first)],
                                *players[static_cast<std::size_t>(1 - first)], m);
    out.games.push_back({m.heroes, first, rec.outcome, rec.replay});
    int winner = -1;
    if (rec.outcome != Outcome::Draw) {
      const int winner_seat = rec.outcome == Outcome::P0Win ? 0 : 1;
      winner = winner_seat == 0 ? first : 1 - first;
    }
    series.record(pick, winner);
  }
  out.wins = series.wins();
  out.winner = series.winner();
  return out;
}

}  // namespace ministone
