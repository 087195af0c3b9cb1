// ministone command line: training, evaluation, the match service and
// small engine utilities.

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>

#include <CLI11.hpp>

#include "ministone/evalharness/eval.hpp"
#include "ministone/matchsvc/server.hpp"
#include "ministone/osfp/trainer.hpp"
#include "ministone/policy/checkpoint.hpp"

using namespace ministone;
namespace fs = std::filesystem;

namespace {

std::shared_ptr<const CardPool> load_pool(const std::string& path) {
  return std::make_shared<const CardPool>(CardPool::load(path.empty() ? default_pool_path() : fs::path(path)));
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text << "\n";
    return;
  }
  std::ofstream out(path);
  out << text << "\n";
  if (!out) throw std::runtime_error("cannot write " + path);
}

struct TrainArgs {
  std::string run_dir, config;
  int lps = 2;
  std::int64_t samples = -1;
  bool isolation = false, cheat = false, governor = false, resume = false, no_random_cb = false;
  std::string buffer = "queue";
  int capacity = -1, actors = 0, hidden = -1;
  std::uint64_t seed = 1;
  double lr = -1;
  int batch_steps = -1;
};

int cmd_train(const TrainArgs& a, const std::string& pool_path) {
  auto pool = load_pool(pool_path);
  TrainConfig cfg;
  if (!a.config.empty()) {
    std::ifstream in(a.config);
    if (!in) throw std::runtime_error("cannot read " + a.config);
    cfg = nlohmann::json::parse(in).get<TrainConfig>();
  }
  cfg.lps = a.lps;
  if (a.samples > 0) cfg.osfp.samples_per_lp = a.samples;
  cfg.osfp.hero_isolation = cfg.osfp.hero_isolation || a.isolation;
  cfg.osfp.cheat = cfg.osfp.cheat || a.cheat;
  cfg.buffer.discipline = parse_discipline(a.buffer);
  if (a.capacity > 0) cfg.buffer.capacity = a.capacity;
  if (a.hidden > 0) cfg.hidden = a.hidden;
  if (a.lr > 0) cfg.learner.learning_rate = a.lr;
  if (a.batch_steps > 0) cfg.learner.batch_steps = a.batch_steps;
  if (a.no_random_cb) cfg.random_cb = false;
  cfg.actors = a.actors;
  cfg.governor = a.governor;
  cfg.seed = a.seed;
  if (fs::exists(fs::path(a.run_dir) / "osfp_state.json") && !a.resume) {
    throw std::runtime_error(a.run_dir + " already holds a run; pass --resume to continue it");
  }
  auto r = run_training(cfg, pool, a.run_dir, [](const LpSummary& s) {
    std::printf("lp %d: steps %lld matches %lld (vs H %lld) gate %s%s winrates [", s.lp,
                static_cast<long long>(s.steps), static_cast<long long>(s.matches),
                static_cast<long long>(s.historical_matches),
                s.gate.result == GateResult::Added ? "added" : "not added", s.gate.forced ? " (forced)" : "");
    for (std::size_t i = 0; i < s.gate.winrates.size(); ++i) std::printf("%s%.3f", i ? " " : "", s.gate.winrates[i]);
    std::printf("]\n");
    std::fflush(stdout);
  });
  std::printf("%s at lp %d, |H| = %zu\n", r.resumed ? "resumed run" : "run", r.state.lp_index, r.state.H.size());
  return 0;
}

int cmd_eval(const std::string& a, const std::string& b, const EvalSpec& spec, const std::string& out,
             const std::string& pool_path) {
  const Encoder enc{Engine(load_pool(pool_path))};
  const auto r = run_winrate(enc, make_agent(a, enc), make_agent(b, enc), spec);
  std::fprintf(stderr, "%s vs %s: %.1f%% +- %.1f over %d matches (W %d / D %d / L %d)\n", r.a.c_str(), r.b.c_str(),
               100 * r.winrate, 100 * r.ci95, r.matches, r.wins, r.draws, r.losses);
  write_text(out, report(std::vector<WinrateResult>{r}));
  return 0;
}

int cmd_matrix(const std::vector<std::string>& specs, const EvalSpec& spec, const std::string& out,
               const std::string& pool_path) {
  const Encoder enc{Engine(load_pool(pool_path))};
  std::vector<AgentPtr> agents;
  for (const auto& s : specs) agents.push_back(make_agent(s, enc));
  const auto m = winrate_matrix(enc, agents, spec);
  const auto rep = report(m);
  std::fprintf(stderr, "%s", nlohmann::json::parse(rep)["table"].get<std::string>().c_str());
  write_text(out, rep);
  return 0;
}

int cmd_tournament(const std::string& a, const std::string& b, std::uint64_t seed, const std::string& replays,
                   const std::string& pool_path) {
  const Encoder enc{Engine(load_pool(pool_path))};
  TournamentSpec spec;
  spec.seed = seed;
  const auto r = run_conquest_bo5(enc, make_agent(a, enc), make_agent(b, enc), spec);
  for (std::size_t g = 0; g < r.games.size(); ++g) {
    const auto& game = r.games[g];
    std::printf("game %zu: seat0 %s (player %d) vs seat1 %s -> %s\n", g + 1,
                std::string(to_string(game.heroes[0])).c_str(), game.first,
                std::string(to_string(game.heroes[1])).c_str(), std::string(to_string(game.outcome)).c_str());
    if (!replays.empty()) {
      fs::create_directories(replays);
      game.replay.save(fs::path(replays) / ("game_" + std::to_string(g + 1) + ".replay"));
    }
  }
  std::printf("series %d:%d, winner %s\n", r.wins[0], r.wins[1],
              r.winner < 0 ? "none" : (r.winner == 0 ? a.c_str() : b.c_str()));
  return 0;
}

matchsvc::HttpServer* g_server = nullptr;

int cmd_serve(const std::string& host, int port, const std::vector<std::string>& agents, const std::string& decks,
              bool baselines, const std::string& pool_path) {
  auto enc = std::make_shared<const Encoder>(Engine(load_pool(pool_path)));
  matchsvc::ServiceConfig cfg;
  cfg.deck_root = decks;
  matchsvc::Service svc(enc, cfg);
  for (const auto& spec : agents) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--agent expects name=path, got " + spec);
    svc.register_agent(matchsvc::load_agent_model(spec.substr(0, eq), spec.substr(eq + 1), *enc));
  }
  if (baselines) {
    for (AgentPtr a : {AgentPtr(std::make_shared<GreedyDamageAgent>()), AgentPtr(std::make_shared<UniformRandomAgent>())}) {
      matchsvc::AgentModel m{a->name(), {a, a, a}, enc->engine().pool().checksum()};
      svc.register_agent(m);
    }
  }
  if (svc.agent_names().empty()) throw std::invalid_argument("no agents: pass --agent name=path or --baselines");
  matchsvc::HttpServer server(svc);
  const int bound = server.bind(host, port);
  g_server = &server;
  std::signal(SIGINT, [](int) {
    if (g_server) g_server->stop();
  });
  std::fprintf(stderr, "serving %zu agent(s) on http://%s:%d\n", svc.agent_names().size(), host.c_str(), bound);
  server.serve();
  g_server = nullptr;
  return 0;
}

int cmd_replay(const std::string& file, bool verbose, const std::string& pool_path) {
  const Engine engine(load_pool(pool_path));
  const auto r = Replay::load(file);
  std::vector<GameState> trace;
  const auto end = r.simulate(engine, verbose ? &trace : nullptr);
  std::printf("heroes %s vs %s, seed %llu, %zu actions, cheat n %d/%d\n", std::string(to_string(r.heroes[0])).c_str(),
              std::string(to_string(r.heroes[1])).c_str(), static_cast<unsigned long long>(r.seed), r.actions.size(),
              r.cheat_n[0], r.cheat_n[1]);
  if (verbose) {
    for (std::size_t k = 0; k < r.actions.size(); ++k) {
      const auto& s = trace[k];
      std::printf("%4zu  seat %d  %s\n", k, s.active, action::describe(r.actions[k]).c_str());
    }
  }
  std::printf("outcome: %s\n", end.outcome ? std::string(to_string(*end.outcome)).c_str() : "unfinished");
  return 0;
}

int cmd_playout(int n, std::uint64_t seed, const std::string& pool_path) {
  const Engine engine(load_pool(pool_path));
  std::mt19937_64 rng(seed);
  std::array<int, 3> outcomes{};
  long long decisions = 0;
  int violations = 0;
  for (int m = 0; m < n; ++m) {
    auto s = engine.new_match(kAllHeroes[rng() % 3], kAllHeroes[rng() % 3], rng());
    while (s.stage != Stage::Terminal) {
      const auto legal = engine.legal_actions(s);
      engine.apply_in_place(s, legal[std::uniform_int_distribution<std::size_t>(0, legal.size() - 1)(rng)]);
      ++decisions;
      for (const auto& v : engine.check_invariants(s)) {
        if (violations++ < 10) std::fprintf(stderr, "match %d: %s\n", m, v.c_str());
      }
    }
    ++outcomes[static_cast<std::size_t>(*s.outcome)];
  }
  std::printf("%d matches, %.1f decisions/match, P0 %d / P1 %d / draw %d, invariant violations %d\n", n,
              n ? static_cast<double>(decisions) / n : 0.0, outcomes[0], outcomes[1], outcomes[2], violations);
  return violations == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MiniStone self-play training stack"};
  app.require_subcommand(1);
  std::string pool_path;
  app.add_option("--pool", pool_path, "card pool file (default: shipped pool)");

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "OSFP training into a run directory");
  train->add_option("--run-dir", ta.run_dir, "run directory")->required();
  train->add_option("--config", ta.config, "JSON training config to start from");
  train->add_option("--lps", ta.lps, "total learning periods to reach")->check(CLI::PositiveNumber);
  train->add_option("--samples-per-lp", ta.samples, "learner-side steps per LP");
  train->add_flag("--hero-isolation", ta.isolation, "one learner instance per hero");
  train->add_flag("--cheat", ta.cheat, "cheat-on-deck training");
  train->add_option("--buffer", ta.buffer, "queue or ring")->check(CLI::IsMember({"queue", "ring"}));
  train->add_option("--capacity", ta.capacity, "buffer capacity in segments");
  train->add_option("--actors", ta.actors, "actor threads (0 = inline)")->check(CLI::NonNegativeNumber);
  train->add_flag("--governor", ta.governor, "halve/resume actors to keep c near 1");
  train->add_option("--hidden", ta.hidden, "hidden width");
  train->add_option("--seed", ta.seed, "run seed");
  train->add_option("--lr", ta.lr, "learning rate");
  train->add_option("--batch-steps", ta.batch_steps, "steps per update");
  train->add_flag("--no-random-cb", ta.no_random_cb, "disable random deck-building prefixes");
  train->add_flag("--resume", ta.resume, "continue an existing run");

  std::string ea = "greedy", eb = "random", eout;
  EvalSpec es;
  auto* eval = app.add_subcommand("eval", "winrate of agent A against agent B");
  eval->add_option("--a", ea, "agent spec: random | greedy | <ckpt or run dir>[@greedy|@sample]");
  eval->add_option("--b", eb, "agent spec");
  eval->add_option("--n", es.matches_per_cell, "matches per (seat, hero, hero) cell")->check(CLI::PositiveNumber);
  eval->add_option("--seed", es.seed);
  eval->add_flag("--cheat-a", es.cheat_a, "A sees n ~ U{0..30} opponent picks");
  eval->add_option("--threads", es.threads);
  eval->add_option("--out", eout, "report file (default stdout)");

  std::vector<std::string> mspecs;
  std::string mout;
  EvalSpec ms;
  auto* matrix = app.add_subcommand("matrix", "pairwise winrate matrix");
  matrix->add_option("--agent", mspecs, "agent spec (repeat)")->required();
  matrix->add_option("--n", ms.matches_per_cell)->check(CLI::PositiveNumber);
  matrix->add_option("--seed", ms.seed);
  matrix->add_option("--threads", ms.threads);
  matrix->add_option("--out", mout);

  std::string ta_a = "greedy", ta_b = "random", replays;
  std::uint64_t tseed = 1;
  auto* tour = app.add_subcommand("tournament", "Conquest best-of-five series");
  tour->add_option("--a", ta_a);
  tour->add_option("--b", ta_b);
  tour->add_option("--seed", tseed);
  tour->add_option("--replays", replays, "directory for per-game replay files");

  std::string host = "127.0.0.1", decks = "decks";
  int port = 8080;
  std::vector<std::string> agents;
  bool baselines = false;
  auto* serve = app.add_subcommand("serve", "human-vs-agent match service");
  serve->add_option("--host", host);
  serve->add_option("--port", port);
  serve->add_option("--agent", agents, "name=<checkpoint or run dir> (repeat)");
  serve->add_option("--decks", decks, "saved deck directory");
  serve->add_flag("--baselines", baselines, "also serve the greedy and random bots");

  std::string replay_file;
  bool verbose = false;
  auto* replay = app.add_subcommand("replay", "re-simulate a replay file");
  replay->add_option("file", replay_file)->required();
  replay->add_flag("-v,--verbose", verbose, "list every action");

  auto* schema = app.add_subcommand("schema", "print the observation schema");

  std::string expect;
  auto* checksum = app.add_subcommand("pool-checksum", "print the card pool checksum");
  checksum->add_option("--expect", expect, "fail unless the checksum equals this hex value");

  int pn = 100;
  std::uint64_t pseed = 1;
  auto* playout = app.add_subcommand("playout", "random playouts with invariant checks");
  playout->add_option("--n", pn);
  playout->add_option("--seed", pseed);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*train) return cmd_train(ta, pool_path);
    if (*eval) return cmd_eval(ea, eb, es, eout, pool_path);
    if (*matrix) return cmd_matrix(mspecs, ms, mout, pool_path);
    if (*tour) return cmd_tournament(ta_a, ta_b, tseed, replays, pool_path);
    if (*serve) return cmd_serve(host, port, agents, decks, baselines, pool_path);
    if (*replay) return cmd_replay(replay_file, verbose, pool_path);
    if (*schema) {
      const Encoder enc{Engine(load_pool(pool_path))};
      std::cout << nlohmann::json::parse(enc.schema().to_json()).dump(2) << "\n";
      return 0;
    }
    if (*checksum) {
      const auto pool = load_pool(pool_path);
      const auto hex = checksum_hex(pool->checksum());
      std::cout << pool->name() << " " << hex << "\n";
      return expect.empty() || expect == hex ? 0 : 1;
    }
    if (*playout) return cmd_playout(pn, pseed, pool_path);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
