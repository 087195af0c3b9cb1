#include <gtest/gtest.h>

#include <unistd.h>

#include <future>
#include <set>
#include <thread>

#include "fixtures.hpp"
#include "ministone/evalharness/eval.hpp"
#include "ministone/matchsvc/server.hpp"
#include "ministone/policy/checkpoint.hpp"

// After the Eigen users: a resolver macro from the socket headers clashes with Eigen.
#include <httplib.h>

using namespace ministone;
using namespace ministone::matchsvc;
using namespace ministone::testing;
namespace fs = std::filesystem;

namespace {

std::shared_ptr<const Encoder> encoder_ptr() {
  static auto e = std::make_shared<const Encoder>(shipped_engine());
  return e;
}

AgentModel model_of(const std::string& name, AgentPtr a) {
  AgentModel m;
  m.name = name;
  m.by_hero = {a, a, a};
  m.pool_checksum = shipped_pool()->checksum();
  return m;
}

AgentModel tiny_policy(const std::string& name = "tiny") {
  auto p = std::make_shared<const PolicyParams>(init_params<float>(shipped_encoder().schema(), 7, 16));
  return model_of(name, std::make_shared<PolicyAgent>(p, PolicyAgent::Mode::Greedy, name));
}

std::vector<CardId> valid_deck(Hero h, int size = 30) {
  const auto& pool = *shipped_pool();
  std::vector<CardId> deck;
  for (CardId c = 0; static_cast<int>(deck.size()) < size; ++c) {
    if (!pool.card(c).visible_to(h)) continue;
    for (int k = 0; k < pool.card(c).max_copies && static_cast<int>(deck.size()) < size; ++k) deck.push_back(c);
  }
  return deck;
}

std::unique_ptr<Service> make_service(ServiceConfig cfg = {}) {
  auto s = std::make_unique<Service>(encoder_ptr(), cfg);
  s->register_agent(tiny_policy());
  s->register_agent(model_of("greedy", std::make_shared<GreedyDamageAgent>()));
  return s;
}

SessionOptions opts(int human_seat, std::uint64_t seed, std::optional<std::vector<CardId>> deck = {}) {
  SessionOptions o;
  o.agent = "tiny";
  o.human_hero = Hero::Mage;
  o.agent_hero = Hero::Hunter;
  o.human_seat = human_seat;
  o.seed = seed;
  o.human_deck = std::move(deck);
  return o;
}

std::vector<int> legal_ids(const nlohmann::json& v) {
  std::vector<int> out;
  for (const auto& l : v["legal"]) out.push_back(l["id"].get<int>());
  return out;
}

// Plays uniformly random legal human actions until the match ends.
nlohmann::json play_out(Service& svc, const std::string& id, std::uint64_t seed, int max_steps = 5000) {
  std::mt19937_64 rng(seed);
  auto v = svc.view(id);
  for (int k = 0; k < max_steps && v["decision_type"] != "terminal"; ++k) {
    const auto legal = legal_ids(v);
    EXPECT_FALSE(legal.empty());
    v = svc.submit_action(id, ActionId(legal[std::uniform_int_distribution<std::size_t>(0, legal.size() - 1)(rng)]));
  }
  return v;
}

std::set<std::string> keys(const nlohmann::json& j) {
  std::set<std::string> out;
  for (auto it = j.begin(); it != j.end(); ++it) out.insert(it.key());
  return out;
}

// Field whitelist of a view.
void expect_whitelisted(const nlohmann::json& v) {
  static const std::set<std::string> top = {"session", "version", "pool_checksum", "agent",  "human_seat",
                                            "stage",   "turn",    "active_seat",   "waiting", "decision_type",
                                            "outcome", "me",      "opponent",      "cheat_n", "pending",
                                            "legal",   "transcript"};
  static const std::set<std::string> opp = {"hero",     "hero_hp",    "armor",       "weapon",
                                            "mana",     "mana_cap",   "board",       "hand_count",
                                            "deck_count", "picks_count", "revealed_picks"};
  static const std::set<std::string> me = {"hero",      "hero_hp",     "armor", "weapon", "mana",
                                           "mana_cap",  "board",       "hand",  "picks",  "deck_count",
                                           "temp_mana", "fatigue",     "hero_power_used"};
  ASSERT_EQ(keys(v), top);
  ASSERT_EQ(keys(v["opponent"]), opp);
  ASSERT_EQ(keys(v["me"]), me);
}

fs::path fresh_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("ministone_svc_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(d);
  return d;
}

}  // namespace

TEST(MatchSvc, CreateWithoutDeckStartsInHumanDeckBuilding) {
  auto svc = make_service();
  const auto id = svc->create_session(opts(0, 1));
  EXPECT_EQ(id.size(), 32u);
  const auto v = svc->view(id);
  EXPECT_EQ(v["stage"], "CB");
  EXPECT_EQ(v["decision_type"], "deck_building");
  EXPECT_FALSE(v["waiting"].get<bool>());
  const auto legal = legal_ids(v);
  EXPECT_EQ(legal.size(), shipped_pool()->visible(Hero::Mage).size());
  for (const auto& l : v["legal"]) EXPECT_EQ(l["label"].get<std::string>().rfind("pick ", 0), 0u);
  EXPECT_EQ(v["opponent"]["picks_count"], 0);
}

TEST(MatchSvc, SavedDeckSkipsHumanBuildingAndAgentBuildsFirst) {
  auto svc = make_service();
  for (int seat = 0; seat < 2; ++seat) {
    const auto id = svc->create_session(opts(seat, 3, valid_deck(Hero::Mage)));
    const auto v = svc->view(id);
    EXPECT_EQ(v["stage"], "BT");
    EXPECT_EQ(v["decision_type"], "choose_action");
    EXPECT_EQ(v["opponent"]["picks_count"], 30);
    EXPECT_EQ(v["me"]["picks"].get<std::vector<CardId>>(), valid_deck(Hero::Mage));
    const auto snap = svc->snapshot(id);
    // The agent's 30 picks ran inside create; the human never saw them named.
    int picks = 0;
    for (const auto& l : snap.log) picks += action::is_cb(l.action);
    EXPECT_EQ(picks, 30);
    EXPECT_EQ(snap.state.players[static_cast<std::size_t>(seat)].picks, valid_deck(Hero::Mage));
  }
}

TEST(MatchSvc, CreateRejectsBadInput) {
  auto svc = make_service();
  EXPECT_THROW(svc->create_session(opts(0, 1, valid_deck(Hero::Mage, 29))), BadRequest);
  auto wrong_hero = opts(0, 1, valid_deck(Hero::Warrior));
  bool warrior_only = false;
  for (CardId c : *wrong_hero.human_deck) warrior_only |= !shipped_pool()->card(c).visible_to(Hero::Mage);
  if (warrior_only) EXPECT_THROW(svc->create_session(wrong_hero), BadRequest);
  auto o = opts(0, 1);
  o.agent = "nobody";
  EXPECT_THROW(svc->create_session(o), NotFound);
  auto bad = tiny_policy("foreign");
  bad.pool_checksum ^= 1;
  svc->register_agent(bad);
  o.agent = "foreign";
  try {
    svc->create_session(o);
    FAIL() << "pool mismatch accepted";
  } catch (const BadRequest& e) {
    EXPECT_NE(std::string(e.what()).find("pool mismatch"), std::string::npos);
  }
  o = opts(0, 1);
  o.human_cheat_n = 31;
  EXPECT_THROW(svc->create_session(o), BadRequest);
  EXPECT_THROW(svc->view("0123"), NotFound);
}

TEST(MatchSvc, AgentHeroAutoIsUniform) {
  auto svc = make_service();
  std::array<int, kNumHeroes> seen{};
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    auto o = opts(0, seed, valid_deck(Hero::Mage));
    o.agent = "greedy";
    o.agent_hero.reset();
    const auto id = svc->create_session(o);
    ++seen[static_cast<std::size_t>(svc->snapshot(id).heroes[1])];
    svc->close(id);
  }
  // Each hero expected 100 times; 4 sigma is about 33.
  for (int n : seen) EXPECT_NEAR(n, 100, 33);
}

TEST(MatchSvc, PendingSelectionOffersOnlyTargets) {
  auto svc = make_service();
  bool found = false;
  for (std::uint64_t seed = 0; seed < 40 && !found; ++seed) {
    const auto id = svc->create_session(opts(0, seed, valid_deck(Hero::Mage)));
    std::mt19937_64 rng(seed);
    auto v = svc->view(id);
    for (int k = 0; k < 400 && v["decision_type"] != "terminal"; ++k) {
      if (v["decision_type"] == "choose_target") {
        found = true;
        EXPECT_FALSE(v["pending"].is_null());
        for (int a : legal_ids(v)) EXPECT_TRUE(action::is_target(ActionId(a))) << a;
        break;
      }
      // Prefer first operations other than end turn to reach a pending pair.
      auto legal = legal_ids(v);
      std::vector<int> non_end;
      for (int a : legal) {
        if (a != action::end_turn().index()) non_end.push_back(a);
      }
      const auto& pool = non_end.empty() ? legal : non_end;
      v = svc->submit_action(id, ActionId(pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)]));
    }
  }
  EXPECT_TRUE(found);
}

TEST(MatchSvc, TranscriptListsAgentPairsInOrder) {
  auto svc = make_service();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto o = opts(0, seed, valid_deck(Hero::Mage));
    o.agent = "greedy";
    const auto id = svc->create_session(o);
    std::mt19937_64 rng(seed);
    auto v = svc->view(id);
    for (int turn = 0; turn < 12 && v["decision_type"] != "terminal"; ++turn) {
      v = svc->submit_action(id, action::end_turn());
      // Oracle: the agent's log entries after the human's last action,
      // folded into (type, target) pairs.
      const auto snap = svc->snapshot(id);
      std::size_t k = snap.log.size();
      while (k > 0 && snap.log[k - 1].seat == snap.agent_seat()) --k;
      std::vector<std::pair<int, int>> want;
      for (; k < snap.log.size(); ++k) {
        const ActionId a = snap.log[k].action;
        if (action::is_target(a) && !want.empty() && want.back().second < 0) {
          want.back().second = a.index();
        } else {
          want.push_back({a.index(), -1});
        }
      }
      std::vector<std::pair<int, int>> got;
      for (const auto& e : v["transcript"]) {
        got.push_back({e["type"].get<int>(), e["target"].is_null() ? -1 : e["target"].get<int>()});
        EXPECT_FALSE(e["text"].get<std::string>().empty());
      }
      EXPECT_EQ(got, want);
      if (v["decision_type"] != "terminal") {
        EXPECT_EQ(v["transcript"].back()["type"], action::end_turn().index());
      }
    }
  }
}

TEST(MatchSvc, IllegalActionIsRejectedAndStateUnchanged) {
  auto svc = make_service();
  const auto id = svc->create_session(opts(0, 4, valid_deck(Hero::Mage)));
  const auto before = svc->snapshot(id);
  try {
    svc->submit_action(id, action::target_opp_board(6));
    FAIL() << "illegal action accepted";
  } catch (const RejectedAction& e) {
    EXPECT_EQ(e.status(), 409);
    EXPECT_EQ(e.legal(), shipped_engine().legal_actions(before.state));
  }
  const auto after = svc->snapshot(id);
  EXPECT_EQ(after.state, before.state);
  EXPECT_EQ(after.version, before.version);
  EXPECT_EQ(after.log.size(), before.log.size());
}

TEST(MatchSvc, FullGameReplayReproducesTerminalStateExactly) {
  auto svc = make_service();
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const bool with_deck = seed % 2 == 0;
    auto o = opts(static_cast<int>(seed % 2), 100 + seed,
                  with_deck ? std::optional<std::vector<CardId>>(valid_deck(Hero::Mage)) : std::nullopt);
    o.agent_cheat_n = static_cast<int>(seed * 5);
    const auto id = svc->create_session(o);
    EXPECT_THROW(svc->export_replay(id), Conflict);
    const auto v = play_out(*svc, id, seed);
    ASSERT_EQ(v["decision_type"], "terminal");
    EXPECT_FALSE(v["outcome"].is_null());
    EXPECT_THROW(svc->submit_action(id, action::end_turn()), Conflict);
    const auto snap = svc->snapshot(id);
    const auto replay = Replay::parse(svc->export_replay(id).to_text());
    EXPECT_EQ(replay.cheat_n, snap.cheat_n);
    const auto end = replay.simulate(shipped_engine());
    EXPECT_EQ(serialize(end), serialize(snap.state));
    const double sc = seat_score(*end.outcome, snap.human_seat);
    EXPECT_EQ(v["outcome"]["result"], sc == 1.0 ? "win" : (sc == 0.0 ? "loss" : "draw"));
  }
}

TEST(MatchSvc, CheatExhibitionRevealsExactlyThePrefix) {
  auto svc = make_service();
  auto o = opts(1, 8, valid_deck(Hero::Mage));
  o.human_cheat_n = 5;
  const auto id = svc->create_session(o);
  const auto v = svc->view(id);
  const auto snap = svc->snapshot(id);
  const auto& agent_picks = snap.state.players[0].picks;
  EXPECT_EQ(v["opponent"]["revealed_picks"].get<std::vector<CardId>>(),
            std::vector<CardId>(agent_picks.begin(), agent_picks.begin() + 5));
  EXPECT_EQ(v["cheat_n"], 5);
  // Within the prefix the agent's picks are named, beyond it they are not.
  const auto& tr = v["transcript"];
  ASSERT_GE(tr.size(), 30u);
  for (std::size_t k = 0; k < 30; ++k) {
    if (k < 5) {
      EXPECT_EQ(tr[k]["type"], snap.log[k].action.index());
    } else {
      EXPECT_TRUE(tr[k]["type"].is_null());
      EXPECT_EQ(tr[k]["text"], "deck building pick");
    }
  }
}

TEST(MatchSvc, ViewsFollowWhitelistThroughoutPlay) {
  auto svc = make_service();
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    auto o = opts(static_cast<int>(seed % 2), 200 + seed);
    o.human_cheat_n = static_cast<int>(seed * 3);
    const auto id = svc->create_session(o);
    std::mt19937_64 rng(seed);
    auto v = svc->view(id);
    while (true) {
      expect_whitelisted(v);
      const auto snap = svc->snapshot(id);
      const auto& opp = snap.state.players[static_cast<std::size_t>(snap.agent_seat())];
      const auto n = std::min<std::size_t>(static_cast<std::size_t>(o.human_cheat_n), opp.picks.size());
      EXPECT_EQ(v["opponent"]["revealed_picks"].get<std::vector<CardId>>(),
                std::vector<CardId>(opp.picks.begin(), opp.picks.begin() + static_cast<std::ptrdiff_t>(n)));
      for (const auto& e : v["transcript"]) {
        if (!e["type"].is_null() && action::is_cb(ActionId(e["type"].get<int>()))) {
          EXPECT_NE(e["text"], "deck building pick");
        }
      }
      if (v["decision_type"] == "terminal") break;
      const auto legal = legal_ids(v);
      v = svc->submit_action(id, ActionId(legal[std::uniform_int_distribution<std::size_t>(0, legal.size() - 1)(rng)]));
    }
  }
}

TEST(MatchSvc, HiddenZonesDoNotAffectTheView) {
  // Censorship invariance: rewriting the agent's hand, deck and unrevealed
  // picks leaves the human view byte-identical.
  auto svc = make_service();
  const auto& engine = shipped_engine();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto o = opts(static_cast<int>(seed % 2), 300 + seed, valid_deck(Hero::Mage));
    o.human_cheat_n = static_cast<int>(seed);
    const auto id = svc->create_session(o);
    play_out(*svc, id, seed, 3 + static_cast<int>(seed));
    Session s = svc->snapshot(id);
    const auto base = render_view(engine, s).dump();
    auto& opp = s.state.players[static_cast<std::size_t>(s.agent_seat())];
    const auto vis = shipped_pool()->visible(opp.hero);
    std::mt19937_64 rng(seed);
    auto any_card = [&] { return vis[std::uniform_int_distribution<std::size_t>(0, vis.size() - 1)(rng)]; };
    for (auto& c : opp.hand) c = any_card();
    for (auto& c : opp.deck) c = any_card();
    for (std::size_t k = static_cast<std::size_t>(o.human_cheat_n); k < opp.picks.size(); ++k) opp.picks[k] = any_card();
    s.state.rng_state ^= 0x9e3779b97f4a7c15ull;
    EXPECT_EQ(render_view(engine, s).dump(), base) << "seed " << seed;
  }
}

TEST(MatchSvc, WaitingViewHasNoLegalActions) {
  auto svc = make_service();
  const auto id = svc->create_session(opts(0, 9, valid_deck(Hero::Mage)));
  Session s = svc->snapshot(id);
  s.state.active = static_cast<std::uint8_t>(s.agent_seat());
  const auto v = render_view(shipped_engine(), s);
  EXPECT_TRUE(v["waiting"].get<bool>());
  EXPECT_EQ(v["decision_type"], "waiting");
  EXPECT_TRUE(v["legal"].empty());
}

TEST(MatchSvc, AgentStepCapForcesEndOfTurn) {
  ServiceConfig cfg;
  cfg.agent_step_cap = 0;
  auto svc = make_service(cfg);
  auto o = opts(0, 10, valid_deck(Hero::Mage));
  o.agent = "greedy";
  const auto id = svc->create_session(o);
  for (int t = 0; t < 5; ++t) {
    const auto v = svc->submit_action(id, action::end_turn());
    if (v["decision_type"] == "terminal") break;
    ASSERT_EQ(v["transcript"].size(), 1u);
    EXPECT_EQ(v["transcript"][0]["type"], action::end_turn().index());
  }
}

TEST(MatchSvc, PollWakesOnChangeAndTimesOut) {
  auto svc = make_service();
  const auto id = svc->create_session(opts(0, 11, valid_deck(Hero::Mage)));
  const auto v0 = svc->view(id);
  const auto since = v0["version"].get<std::uint64_t>();
  const auto t0 = std::chrono::steady_clock::now();
  auto idle = svc->poll(id, since, std::chrono::milliseconds(50));
  EXPECT_GE(std::chrono::steady_clock::now() - t0, std::chrono::milliseconds(45));
  EXPECT_EQ(idle["version"], since);
  auto fut = std::async(std::launch::async, [&] { return svc->poll(id, since, std::chrono::seconds(20)); });
  std::this_thread::sleep_for(std::chrono::milliseconds(20));
  svc->submit_action(id, action::end_turn());
  const auto woke = fut.get();
  EXPECT_GT(woke["version"].get<std::uint64_t>(), since);
}

TEST(MatchSvc, ConcurrentSessionsPlayIndependently) {
  auto svc = make_service();
  std::vector<std::thread> ts;
  std::vector<std::string> results(4);
  for (int t = 0; t < 4; ++t) {
    ts.emplace_back([&, t] {
      const auto id = svc->create_session(opts(t % 2, 500 + static_cast<std::uint64_t>(t), valid_deck(Hero::Mage)));
      results[static_cast<std::size_t>(t)] = play_out(*svc, id, static_cast<std::uint64_t>(t))["decision_type"];
    });
  }
  for (auto& t : ts) t.join();
  for (const auto& r : results) EXPECT_EQ(r, "terminal");
  EXPECT_EQ(svc->session_count(), 4u);
}

TEST(DeckStore, CrudAndPersistence) {
  const auto dir = fresh_dir("decks");
  {
    DeckStore store(shipped_engine(), dir);
    SavedDeck d{"aggro", Hero::Mage, valid_deck(Hero::Mage), "alice", 0};
    const auto saved = store.save(d);
    EXPECT_GT(saved.created_ms, 0);
    EXPECT_THROW(store.save(d), Conflict);
    auto list = store.list("alice");
    ASSERT_EQ(list.size(), 1u);
    EXPECT_EQ(list[0].cards.size(), 30u);
    EXPECT_TRUE(store.list("bob").empty());
    d.name = "short";
    d.cards.pop_back();
    EXPECT_THROW(store.save(d), BadRequest);
    d.owner = "../etc";
    EXPECT_THROW(store.save(d), BadRequest);
    store.save({"second", Hero::Hunter, valid_deck(Hero::Hunter), "alice", 0});
  }
  DeckStore reopened(shipped_engine(), dir);
  EXPECT_EQ(reopened.list("alice").size(), 2u);
  EXPECT_EQ(reopened.get("alice", "second").hero, Hero::Hunter);
  reopened.remove("alice", "aggro");
  EXPECT_THROW(reopened.get("alice", "aggro"), NotFound);
  EXPECT_THROW(reopened.remove("alice", "aggro"), NotFound);
  EXPECT_EQ(DeckStore(shipped_engine(), dir).list("alice").size(), 1u);
  fs::remove_all(dir);
}

TEST(MatchSvc, LoadsCheckpointsAndRejectsForeignPools) {
  const auto dir = fresh_dir("agents");
  fs::create_directories(dir);
  auto p = init_params<float>(shipped_encoder().schema(), 3, 16);
  p.meta.pool_checksum = shipped_pool()->checksum();
  save_checkpoint(p, dir / "good.ckpt");
  p.meta.pool_checksum ^= 0xff;
  save_checkpoint(p, dir / "foreign.ckpt");
  const auto m = load_agent_model("good", dir / "good.ckpt", shipped_encoder());
  EXPECT_EQ(m.by_hero[0], m.by_hero[2]);
  try {
    load_agent_model("foreign", dir / "foreign.ckpt", shipped_encoder());
    FAIL() << "foreign pool accepted";
  } catch (const BadRequest& e) {
    EXPECT_NE(std::string(e.what()).find("pool"), std::string::npos);
  }
  EXPECT_THROW(load_agent_model("missing", dir / "missing.ckpt", shipped_encoder()), BadRequest);
  fs::remove_all(dir);
}

class MatchSvcHttp : public ::testing::Test {
 protected:
  void SetUp() override {
    svc_ = make_service();
    server_ = std::make_unique<HttpServer>(*svc_);
    port_ = server_->start("127.0.0.1", 0);
    cli_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
  }
  void TearDown() override { server_->stop(); }

  static nlohmann::json parse(const httplib::Result& r) { return nlohmann::json::parse(r->body); }
  httplib::Result post(const std::string& path, const nlohmann::json& body) {
    return cli_->Post(path, body.dump(), "application/json");
  }

  std::unique_ptr<Service> svc_;
  std::unique_ptr<HttpServer> server_;
  int port_ = 0;
  std::unique_ptr<httplib::Client> cli_;
};

TEST_F(MatchSvcHttp, SchemaPoolAndAgents) {
  auto r = cli_->Get("/api/health");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  r = cli_->Get("/api/schema");
  EXPECT_EQ(parse(r)["action_table"]["size"], action::kTableSize);
  EXPECT_EQ(parse(r)["pool"]["checksum"], checksum_hex(shipped_pool()->checksum()));
  r = cli_->Get("/api/pool?hero=mage");
  const auto pool = parse(r);
  ASSERT_EQ(pool["cards"].size(), shipped_pool()->visible(Hero::Mage).size());
  for (std::size_t k = 0; k < pool["cards"].size(); ++k) EXPECT_EQ(pool["cards"][k]["cb_action"], k);
  EXPECT_EQ(cli_->Get("/api/pool?hero=druid")->status, 400);
  EXPECT_EQ(parse(cli_->Get("/api/agents"))["agents"], (nlohmann::json{"greedy", "tiny"}));
}

TEST_F(MatchSvcHttp, SessionLifecycle) {
  auto r = post("/api/sessions", {{"agent", "greedy"},
                                  {"human_hero", "mage"},
                                  {"agent_hero", "auto"},
                                  {"human_seat", 0},
                                  {"seed", 42},
                                  {"cards", valid_deck(Hero::Mage)}});
  ASSERT_TRUE(r);
  ASSERT_EQ(r->status, 201) << r->body;
  auto v = parse(r);
  const std::string id = v["session"];
  EXPECT_EQ(parse(cli_->Get("/api/sessions/" + id)), v);
  r = post("/api/sessions/" + id + "/act", {{"action", action::target_opp_board(3).index()}});
  EXPECT_EQ(r->status, 409);
  EXPECT_EQ(parse(r)["legal"].size(), v["legal"].size());
  EXPECT_EQ(post("/api/sessions/" + id + "/act", {{"action", 5000}})->status, 400);
  EXPECT_EQ(cli_->Post("/api/sessions/" + id + "/act", "{not json", "application/json")->status, 400);
  EXPECT_EQ(cli_->Get("/api/sessions/" + id + "/replay")->status, 409);
  r = post("/api/sessions/" + id + "/act", {{"action", action::end_turn().index()}});
  ASSERT_EQ(r->status, 200);
  v = parse(r);
  EXPECT_GT(v["version"].get<int>(), 0);
  EXPECT_FALSE(v["transcript"].empty());
  r = cli_->Get("/api/sessions/" + id + "/poll?since=0&timeout_ms=10");
  EXPECT_EQ(parse(r)["version"], v["version"]);
  // Finish the match through the API, then export.
  std::mt19937_64 rng(1);
  for (int k = 0; k < 5000 && v["decision_type"] != "terminal"; ++k) {
    const auto legal = legal_ids(v);
    v = parse(post("/api/sessions/" + id + "/act",
                   {{"action", legal[std::uniform_int_distribution<std::size_t>(0, legal.size() - 1)(rng)]}}));
  }
  ASSERT_EQ(v["decision_type"], "terminal");
  r = cli_->Get("/api/sessions/" + id + "/replay");
  ASSERT_EQ(r->status, 200);
  const auto replay = Replay::parse(r->body);
  EXPECT_EQ(serialize(replay.simulate(shipped_engine())), serialize(svc_->snapshot(id).state));
  EXPECT_EQ(cli_->Delete("/api/sessions/" + id)->status, 200);
  EXPECT_EQ(cli_->Get("/api/sessions/" + id)->status, 404);
}

TEST_F(MatchSvcHttp, CreateErrors) {
  EXPECT_EQ(post("/api/sessions", {{"agent", "ghost"}, {"human_hero", "mage"}})->status, 404);
  EXPECT_EQ(post("/api/sessions", {{"agent", "tiny"}, {"human_hero", "paladin"}})->status, 400);
  EXPECT_EQ(post("/api/sessions", {{"agent", "tiny"}, {"human_hero", "mage"}, {"cards", valid_deck(Hero::Mage, 29)}})->status,
            400);
  EXPECT_EQ(post("/api/sessions", {{"human_hero", "mage"}})->status, 400);
}

TEST_F(MatchSvcHttp, DeckCrudAndSessionFromSavedDeck) {
  const nlohmann::json deck = {{"name", "control"}, {"hero", "mage"}, {"cards", valid_deck(Hero::Mage)}};
  auto r = post("/api/decks/carol", deck);
  ASSERT_EQ(r->status, 201) << r->body;
  EXPECT_EQ(post("/api/decks/carol", deck)->status, 409);
  auto bad = deck;
  bad["name"] = "tiny";
  bad["cards"] = valid_deck(Hero::Mage, 29);
  EXPECT_EQ(post("/api/decks/carol", bad)->status, 400);
  r = cli_->Get("/api/decks/carol");
  ASSERT_EQ(parse(r)["decks"].size(), 1u);
  EXPECT_EQ(parse(r)["decks"][0]["cards"].size(), 30u);
  EXPECT_EQ(parse(cli_->Get("/api/decks/carol/control"))["hero"], "mage");
  r = post("/api/sessions", {{"agent", "tiny"}, {"human_hero", "mage"}, {"human_seat", 0}, {"deck", {{"owner", "carol"}, {"name", "control"}}}});
  ASSERT_EQ(r->status, 201) << r->body;
  EXPECT_EQ(parse(r)["stage"], "BT");
  EXPECT_EQ(post("/api/sessions", {{"agent", "tiny"}, {"human_hero", "hunter"}, {"deck", {{"owner", "carol"}, {"name", "control"}}}})->status,
            400);
  EXPECT_EQ(cli_->Put("/api/decks/carol/control", nlohmann::json{{"hero", "mage"}, {"cards", valid_deck(Hero::Mage)}}.dump(),
                      "application/json")
                ->status,
            200);
  EXPECT_EQ(cli_->Delete("/api/decks/carol/control")->status, 200);
  EXPECT_EQ(cli_->Get("/api/decks/carol/control")->status, 404);
}

TEST_F(MatchSvcHttp, ConquestBookkeeping) {
  auto r = post("/api/conquest", {{"games",
                                   {{{"heroes", {"mage", "hunter"}}, {"winner", 0}},
                                    {{"heroes", {"hunter", "hunter"}}, {"winner", -1}},
                                    {{"heroes", {"hunter", "hunter"}}, {"winner", 0}}}}});
  ASSERT_EQ(r->status, 200) << r->body;
  const auto j = parse(r);
  EXPECT_EQ(j["wins"], (nlohmann::json{2, 0}));
  EXPECT_EQ(j["available"][0], (nlohmann::json{"warrior"}));
  EXPECT_EQ(j["winner"], -1);
  // A retired hero cannot be reported again.
  r = post("/api/conquest", {{"games", {{{"heroes", {"mage", "hunter"}}, {"winner", 0}}, {{"heroes", {"mage", "mage"}}, {"winner", 1}}}}});
  EXPECT_EQ(r->status, 400);
}
