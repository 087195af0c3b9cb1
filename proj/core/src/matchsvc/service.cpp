#include "ministone/matchsvc/service.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <random>
#include <regex>

#include "ministone/evalharness/eval.hpp"
#include "ministone/osfp/trainer.hpp"
#include "ministone/policy/checkpoint.hpp"
#include "ministone/util/seed.hpp"

namespace ministone::matchsvc {

namespace fs = std::filesystem;

namespace {

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

void check_owner(const std::string& owner) {
  static const std::regex ok("[A-Za-z0-9_-]{1,64}");
  if (!std::regex_match(owner, ok)) throw BadRequest("owner must be 1-64 characters of [A-Za-z0-9_-]");
}

nlohmann::json minion_json(const CardPool& pool, const MinionInstance& m) {
  return {{"card", m.card},          {"name", card_name(pool, m.card)}, {"attack", m.attack},
          {"health", m.health},      {"max_health", m.max_health},     {"taunt", m.taunt},
          {"can_attack", m.can_attack}};
}

nlohmann::json weapon_json(const CardPool& pool, const std::optional<Weapon>& w) {
  if (!w) return nullptr;
  return {{"card", w->card}, {"name", card_name(pool, w->card)}, {"attack", w->attack}, {"durability", w->durability}};
}

// Fields every player may see about a hero.
nlohmann::json public_hero(const CardPool& pool, const PlayerState& p) {
  nlohmann::json b = nlohmann::json::array();
  for (const auto& m : p.board) b.push_back(minion_json(pool, m));
  return {{"hero", to_string(p.hero)},
          {"hero_hp", p.hero_hp},
          {"armor", p.armor},
          {"weapon", weapon_json(pool, p.weapon)},
          {"mana", p.mana},
          {"mana_cap", p.mana_cap},
          {"board", b}};
}

std::string owner_of(int actor, int viewer) { return actor == viewer ? "your" : "their"; }

std::string board_label(const CardPool& pool, const PlayerState& p, int slot) {
  std::string s = "minion " + std::to_string(slot);
  if (slot < static_cast<int>(p.board.size())) s += " (" + card_name(pool, p.board[static_cast<std::size_t>(slot)].card) + ")";
  return s;
}

}  // namespace

std::string card_name(const CardPool& pool, CardId id) {
  if (id == kCoinCard) return "The Coin";
  return pool.contains(id) ? pool.card(id).name : "card " + std::to_string(id);
}

std::string action_label(const Engine& engine, const GameState& s, int viewer, ActionId a) {
  const auto& pool = engine.pool();
  const int actor = s.active;
  const auto& me = s.players[static_cast<std::size_t>(actor)];
  const auto& opp = s.players[static_cast<std::size_t>(1 - actor)];
  const int i = a.index();
  using namespace action;
  if (is_cb(a)) {
    const auto vis = pool.visible(me.hero);
    return i < static_cast<int>(vis.size()) ? "pick " + card_name(pool, vis[static_cast<std::size_t>(i)]) : "pick";
  }
  if (i >= kTypeHandBegin && i < kTypeMyBoardBegin) {
    const int k = i - kTypeHandBegin;
    if (k < static_cast<int>(me.hand.size())) return "play " + card_name(pool, me.hand[static_cast<std::size_t>(k)]);
    return "play hand " + std::to_string(k);
  }
  if (i >= kTypeMyBoardBegin && i < kTypeOppBoardBegin) {
    return "attack with " + owner_of(actor, viewer) + " " + board_label(pool, me, i - kTypeMyBoardBegin);
  }
  if (i >= kTypeOppBoardBegin && i < kTypeHeroAttack) {
    return "select " + owner_of(1 - actor, viewer) + " " + board_label(pool, opp, i - kTypeOppBoardBegin);
  }
  if (a == hero_attack()) return "attack with hero";
  if (a == hero_power()) return "hero power";
  if (a == end_turn()) return "end turn";
  if (a == target_my_hero()) return owner_of(actor, viewer) + " hero";
  if (a == target_opp_hero()) return owner_of(1 - actor, viewer) + " hero";
  if (i >= kTargetMyBoardBegin && i < kTargetOppBoardBegin) {
    return owner_of(actor, viewer) + " " + board_label(pool, me, i - kTargetMyBoardBegin);
  }
  if (i >= kTargetOppBoardBegin && i < kTargetEnd) {
    return owner_of(1 - actor, viewer) + " " + board_label(pool, opp, i - kTargetOppBoardBegin);
  }
  return describe(a);
}

std::string new_session_id() {
  std::random_device rd;
  char buf[33];
  for (int k = 0; k < 4; ++k) std::snprintf(buf + 8 * k, 9, "%08x", static_cast<unsigned>(rd()));
  return buf;
}

void to_json(nlohmann::json& j, const SavedDeck& d) {
  j = {{"name", d.name}, {"hero", to_string(d.hero)}, {"cards", d.cards}, {"owner", d.owner}, {"created_ms", d.created_ms}};
}

void from_json(const nlohmann::json& j, SavedDeck& d) {
  d.name = j.at("name").get<std::string>();
  d.hero = hero_from_string(j.at("hero").get<std::string>());
  d.cards = j.at("cards").get<std::vector<CardId>>();
  d.owner = j.value("owner", std::string());
  d.created_ms = j.value("created_ms", std::int64_t{0});
}

// ---- decks ----

DeckStore::DeckStore(const Engine& engine, fs::path root) : engine_(engine), root_(std::move(root)) {
  if (!root_.empty()) fs::create_directories(root_);
}

std::vector<SavedDeck>& DeckStore::owner_decks(const std::string& owner) const {
  auto it = decks_.find(owner);
  if (it != decks_.end()) return it->second;
  auto& v = decks_[owner];
  if (!root_.empty()) {
    std::ifstream in(root_ / (owner + ".json"));
    if (in) v = nlohmann::json::parse(in).get<std::vector<SavedDeck>>();
  }
  return v;
}

void DeckStore::persist(const std::string& owner) const {
  if (root_.empty()) return;
  const auto path = root_ / (owner + ".json");
  const auto tmp = fs::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << nlohmann::json(decks_.at(owner)).dump(2);
    if (!out) throw ServiceError(500, "cannot write deck file " + tmp.string());
  }
  fs::rename(tmp, path);
}

SavedDeck DeckStore::save(SavedDeck deck, bool replace) {
  check_owner(deck.owner);
  if (deck.name.empty() || deck.name.size() > 64) throw BadRequest("deck name must be 1-64 characters");
  try {
    engine_.validate_deck(deck.hero, deck.cards);
  } catch (const std::invalid_argument& e) {
    throw BadRequest(std::string("malformed deck: ") + e.what());
  }
  std::lock_guard lk(mu_);
  auto& v = owner_decks(deck.owner);
  auto it = std::find_if(v.begin(), v.end(), [&](const SavedDeck& d) { return d.name == deck.name; });
  if (it != v.end() && !replace) throw Conflict("deck '" + deck.name + "' already exists");
  if (deck.created_ms == 0) deck.created_ms = now_ms();
  if (it != v.end()) {
    *it = deck;
  } else {
    v.push_back(deck);
  }
  persist(deck.owner);
  return deck;
}

std::vector<SavedDeck> DeckStore::list(const std::string& owner) const {
  check_owner(owner);
  std::lock_guard lk(mu_);
  return owner_decks(owner);
}

SavedDeck DeckStore::get(const std::string& owner, const std::string& name) const {
  check_owner(owner);
  std::lock_guard lk(mu_);
  for (const auto& d : owner_decks(owner)) {
    if (d.name == name) return d;
  }
  throw NotFound("no deck '" + name + "' for " + owner);
}

void DeckStore::remove(const std::string& owner, const std::string& name) {
  check_owner(owner);
  std::lock_guard lk(mu_);
  auto& v = owner_decks(owner);
  auto it = std::find_if(v.begin(), v.end(), [&](const SavedDeck& d) { return d.name == name; });
  if (it == v.end()) throw NotFound("no deck '" + name + "' for " + owner);
  v.erase(it);
  persist(owner);
}

// ---- agents ----

AgentModel load_agent_model(const std::string& name, const fs::path& path, const Encoder& encoder) {
  const auto& schema = encoder.schema();
  const auto checksum = encoder.engine().pool().checksum();
  std::vector<PolicyParams> params;
  try {
    if (fs::is_directory(path)) {
      params = load_run_params(path, schema, checksum);
    } else {
      params.push_back(load_checkpoint<float>(path, schema, checksum));
    }
  } catch (const std::exception& e) {
    throw BadRequest("cannot load agent '" + name + "': " + e.what());
  }
  AgentModel m;
  m.name = name;
  m.pool_checksum = checksum;
  std::vector<AgentPtr> agents;
  for (auto& p : params) {
    agents.push_back(std::make_shared<PolicyAgent>(std::make_shared<const PolicyParams>(std::move(p)),
                                                   PolicyAgent::Mode::Greedy, name));
  }
  for (int h = 0; h < kNumHeroes; ++h) {
    m.by_hero[static_cast<std::size_t>(h)] = agents.size() == 1 ? agents[0] : agents.at(static_cast<std::size_t>(h));
  }
  return m;
}

// ---- sessions ----

Replay Session::replay() const {
  Replay r;
  r.pool_checksum = pool_checksum;
  r.heroes = heroes;
  r.seed = seed;
  r.preset_decks = preset_decks;
  r.cheat_n = cheat_n;
  for (const auto& l : log) r.actions.push_back(l.action);
  return r;
}

struct Service::Slot {
  mutable std::mutex mu;
  mutable std::condition_variable cv;
  Session s;
  AgentModel model;
};

Service::Service(std::shared_ptr<const Encoder> encoder, ServiceConfig cfg)
    : encoder_(std::move(encoder)), cfg_(std::move(cfg)), decks_(encoder_->engine(), cfg_.deck_root) {}

Service::~Service() = default;

void Service::register_agent(AgentModel model) {
  if (model.name.empty()) throw BadRequest("agent needs a name");
  for (const auto& a : model.by_hero) {
    if (!a) throw BadRequest("agent '" + model.name + "' lacks a policy for some hero");
  }
  std::unique_lock lk(mu_);
  agents_[model.name] = std::move(model);
}

std::vector<std::string> Service::agent_names() const {
  std::shared_lock lk(mu_);
  std::vector<std::string> out;
  for (const auto& [k, v] : agents_) out.push_back(k);
  return out;
}

std::shared_ptr<Service::Slot> Service::find(const std::string& id) const {
  std::shared_lock lk(mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFound("unknown session " + id);
  return it->second;
}

std::string Service::create_session(const SessionOptions& opt) {
  const auto& engine = encoder_->engine();
  AgentModel model;
  {
    std::shared_lock lk(mu_);
    auto it = agents_.find(opt.agent);
    if (it == agents_.end()) throw NotFound("unknown agent '" + opt.agent + "'");
    model = it->second;
    if (sessions_.size() >= cfg_.max_sessions) throw ServiceError(503, "too many live sessions");
  }
  if (model.pool_checksum != engine.pool().checksum()) {
    throw BadRequest("pool mismatch: agent built on " + checksum_hex(model.pool_checksum) + ", service runs " +
                     checksum_hex(engine.pool().checksum()));
  }
  for (int n : {opt.human_cheat_n, opt.agent_cheat_n}) {
    if (n < 0 || n > kMaxCheat) throw BadRequest("cheat prefix must be in [0, 30]");
  }
  if (opt.human_seat && (*opt.human_seat < 0 || *opt.human_seat > 1)) throw BadRequest("human seat must be 0 or 1");
  if (opt.human_deck) {
    try {
      engine.validate_deck(opt.human_hero, *opt.human_deck);
    } catch (const std::invalid_argument& e) {
      throw BadRequest(std::string("malformed deck: ") + e.what());
    }
  }

  auto slot = std::make_shared<Slot>();
  slot->model = model;
  Session& s = slot->s;
  s.id = new_session_id();
  s.pool_checksum = engine.pool().checksum();
  s.agent = model.name;
  s.seed = opt.seed ? *opt.seed : (static_cast<std::uint64_t>(std::random_device{}()) << 32) | std::random_device{}();
  std::mt19937_64 rng(derive_seed(s.seed, {0x5e55}));
  s.human_seat = opt.human_seat ? *opt.human_seat : std::uniform_int_distribution<int>(0, 1)(rng);
  const Hero agent_hero =
      opt.agent_hero ? *opt.agent_hero : kAllHeroes[std::uniform_int_distribution<int>(0, kNumHeroes - 1)(rng)];
  const auto hs = static_cast<std::size_t>(s.human_seat);
  const auto as = static_cast<std::size_t>(s.agent_seat());
  s.heroes[hs] = opt.human_hero;
  s.heroes[as] = agent_hero;
  s.preset_decks[hs] = opt.human_deck;
  s.cheat_n[hs] = opt.human_cheat_n;
  s.cheat_n[as] = opt.agent_cheat_n;
  MatchOptions mo;
  mo.preset_decks = s.preset_decks;
  s.state = engine.new_match(s.heroes[0], s.heroes[1], s.seed, mo);
  s.created_ms = s.updated_ms = now_ms();
  {
    std::lock_guard lk(slot->mu);
    run_agent(*slot);
  }
  std::unique_lock lk(mu_);
  sessions_[s.id] = slot;
  return s.id;
}

TranscriptEntry Service::describe_agent_step(const Session& s, const GameState& before, ActionId a) const {
  const auto& engine = encoder_->engine();
  TranscriptEntry e;
  if (action::is_cb(a)) {
    // The pick index is the size of the agent's pick list before the step.
    const auto k = before.players[static_cast<std::size_t>(s.agent_seat())].picks.size();
    if (static_cast<int>(k) < s.cheat_n[static_cast<std::size_t>(s.human_seat)]) {
      e.type = a;
      e.text = action_label(engine, before, s.human_seat, a);
    } else {
      e.text = "deck building pick";
    }
    return e;
  }
  e.type = a;
  e.text = action_label(engine, before, s.human_seat, a);
  return e;
}

void Service::run_agent(Slot& slot) const {
  Session& s = slot.s;
  const auto& engine = encoder_->engine();
  if (s.state.stage == Stage::Terminal || s.state.active != s.agent_seat()) return;
  s.last_agent_turn.clear();
  const auto seat = static_cast<std::size_t>(s.agent_seat());
  const Agent& agent = *slot.model.by_hero[static_cast<std::size_t>(s.heroes[seat])];
  std::mt19937_64 rng(derive_seed(s.seed, {0xa6e47, s.log.size()}));
  int steps = 0;
  while (s.state.stage != Stage::Terminal && s.state.active == s.agent_seat()) {
    ActionId a;
    if (s.state.stage == Stage::Battle && steps >= cfg_.agent_step_cap) {
      // Liveness guard: finish a pending pair, then pass the turn.
      const auto legal = engine.legal_actions(s.state);
      a = std::find(legal.begin(), legal.end(), action::end_turn()) != legal.end() ? action::end_turn() : legal.front();
    } else {
      a = agent.act(SeatView{*encoder_, s.state, s.agent_seat(), s.cheat_n[seat]}, rng);
    }
    const GameState before = s.state;
    engine.apply_in_place(s.state, a);
    s.log.push_back({s.agent_seat(), a, before.turn_number});
    ++steps;
    if (action::is_target(a) && !s.last_agent_turn.empty() && s.last_agent_turn.back().type &&
        !s.last_agent_turn.back().target) {
      auto& e = s.last_agent_turn.back();
      e.target = a;
      e.text += " -> " + action_label(engine, before, s.human_seat, a);
    } else {
      s.last_agent_turn.push_back(describe_agent_step(s, before, a));
    }
  }
  ++s.version;
  s.updated_ms = now_ms();
}

nlohmann::json Service::view(const std::string& id) const {
  auto slot = find(id);
  std::lock_guard lk(slot->mu);
  return view_locked(slot->s);
}

nlohmann::json Service::view_locked(const Session& s) const { return render_view(encoder_->engine(), s); }

nlohmann::json render_view(const Engine& engine, const Session& s) {
  const auto& pool = engine.pool();
  const auto& st = s.state;
  const int h = s.human_seat;
  const auto& me = st.players[static_cast<std::size_t>(h)];
  const auto& opp = st.players[static_cast<std::size_t>(1 - h)];
  const bool terminal = st.stage == Stage::Terminal;
  const bool my_turn = !terminal && st.active == h;

  nlohmann::json v;
  v["session"] = s.id;
  v["version"] = s.version;
  v["pool_checksum"] = checksum_hex(s.pool_checksum);
  v["agent"] = s.agent;
  v["human_seat"] = h;
  v["stage"] = to_string(st.stage);
  v["turn"] = st.turn_number;
  v["active_seat"] = st.active;
  v["waiting"] = !terminal && !my_turn;
  std::string decision = "waiting";
  if (terminal) {
    decision = "terminal";
  } else if (my_turn) {
    decision = st.stage == Stage::DeckBuilding ? "deck_building" : (st.pending ? "choose_target" : "choose_action");
  }
  v["decision_type"] = decision;
  if (terminal) {
    const double sc = seat_score(*st.outcome, h);
    v["outcome"] = {{"result", sc == 1.0 ? "win" : (sc == 0.0 ? "loss" : "draw")}, {"engine", to_string(*st.outcome)}};
  } else {
    v["outcome"] = nullptr;
  }

  auto mine = public_hero(pool, me);
  nlohmann::json hand = nlohmann::json::array();
  for (std::size_t k = 0; k < me.hand.size(); ++k) {
    const CardId c = me.hand[k];
    hand.push_back({{"slot", k}, {"card", c}, {"name", card_name(pool, c)}, {"cost", c == kCoinCard ? 0 : pool.card(c).cost}});
  }
  mine["hand"] = hand;
  mine["picks"] = me.picks;
  mine["deck_count"] = me.deck.size();
  mine["temp_mana"] = me.temp_mana;
  mine["fatigue"] = me.fatigue;
  mine["hero_power_used"] = me.hero_power_used;
  v["me"] = mine;

  auto theirs = public_hero(pool, opp);
  theirs["hand_count"] = opp.hand.size();
  theirs["deck_count"] = opp.deck.size();
  theirs["picks_count"] = opp.picks.size();
  const auto shown = std::min<std::size_t>(static_cast<std::size_t>(s.cheat_n[static_cast<std::size_t>(h)]), opp.picks.size());
  theirs["revealed_picks"] = std::vector<CardId>(opp.picks.begin(), opp.picks.begin() + static_cast<std::ptrdiff_t>(shown));
  v["opponent"] = theirs;
  v["cheat_n"] = s.cheat_n[static_cast<std::size_t>(h)];

  v["pending"] = nullptr;
  nlohmann::json legal = nlohmann::json::array();
  if (my_turn) {
    if (st.pending) v["pending"] = {{"id", st.pending->index()}, {"label", action_label(engine, st, h, *st.pending)}};
    for (ActionId a : engine.legal_actions(st)) legal.push_back({{"id", a.index()}, {"label", action_label(engine, st, h, a)}});
  }
  v["legal"] = legal;
  nlohmann::json tr = nlohmann::json::array();
  for (const auto& e : s.last_agent_turn) {
    tr.push_back({{"type", e.type ? nlohmann::json(e.type->index()) : nlohmann::json(nullptr)},
                  {"target", e.target ? nlohmann::json(e.target->index()) : nlohmann::json(nullptr)},
                  {"text", e.text}});
  }
  v["transcript"] = tr;
  return v;
}

nlohmann::json Service::submit_action(const std::string& id, ActionId a) {
  auto slot = find(id);
  std::lock_guard lk(slot->mu);
  Session& s = slot->s;
  const auto& engine = encoder_->engine();
  if (s.state.stage == Stage::Terminal) throw Conflict("session is over");
  if (s.state.active != s.human_seat) throw RejectedAction("not the human's decision", {});
  if (a.index() < 0 || a.index() >= action::kTableSize || !engine.is_legal(s.state, a)) {
    throw RejectedAction("illegal action " + std::to_string(a.index()), engine.legal_actions(s.state));
  }
  const auto turn = s.state.turn_number;
  engine.apply_in_place(s.state, a);
  s.log.push_back({s.human_seat, a, turn});
  ++s.version;
  s.updated_ms = now_ms();
  run_agent(*slot);
  slot->cv.notify_all();
  return view_locked(s);
}

nlohmann::json Service::poll(const std::string& id, std::uint64_t since, std::chrono::milliseconds timeout) const {
  auto slot = find(id);
  std::unique_lock lk(slot->mu);
  slot->cv.wait_for(lk, timeout, [&] { return slot->s.version > since; });
  return view_locked(slot->s);
}

Replay Service::export_replay(const std::string& id) const {
  auto slot = find(id);
  std::lock_guard lk(slot->mu);
  if (slot->s.state.stage != Stage::Terminal) throw Conflict("replay export needs a finished session");
  return slot->s.replay();
}

Session Service::snapshot(const std::string& id) const {
  auto slot = find(id);
  std::lock_guard lk(slot->mu);
  return slot->s;
}

void Service::close(const std::string& id) {
  std::unique_lock lk(mu_);
  if (sessions_.erase(id) == 0) throw NotFound("unknown session " + id);
}

std::size_t Service::session_count() const {
  std::shared_lock lk(mu_);
  return sessions_.size();
}

nlohmann::json Service::pool_json(std::optional<Hero> hero) const {
  const auto& pool = encoder_->engine().pool();
  nlohmann::json cards = nlohmann::json::array();
  for (const auto& c : pool.cards()) {
    if (hero && !c.visible_to(*hero)) continue;
    nlohmann::json j = {{"id", c.id},
                        {"name", c.name},
                        {"hero", to_string(c.hero)},
                        {"kind", to_string(c.kind)},
                        {"cost", c.cost},
                        {"attack", c.attack},
                        {"health", c.health},
                        {"taunt", c.taunt},
                        {"charge", c.charge},
                        {"effect", {{"verb", to_string(c.effect.verb)},
                                    {"magnitude", c.effect.magnitude},
                                    {"target", to_string(c.effect.target)}}},
                        {"max_copies", c.max_copies}};
    if (hero) j["cb_action"] = *pool.cb_slot(*hero, c.id);
    cards.push_back(j);
  }
  nlohmann::json out = {{"name", pool.name()}, {"checksum", checksum_hex(pool.checksum())}, {"cards", cards}};
  if (hero) out["hero"] = to_string(*hero);
  return out;
}

nlohmann::json Service::schema_json() const {
  using namespace action;
  const auto& pool = encoder_->engine().pool();
  nlohmann::json heroes = nlohmann::json::array();
  for (Hero h : kAllHeroes) heroes.push_back(to_string(h));
  return {{"pool", {{"name", pool.name()}, {"checksum", checksum_hex(pool.checksum())}}},
          {"heroes", heroes},
          {"deck_size", kDeckSize},
          {"max_cheat", kMaxCheat},
          {"action_table",
           {{"size", kTableSize},
            {"cb_pick", {kCbBegin, kTypeBegin}},
            {"hand", {kTypeHandBegin, kTypeMyBoardBegin}},
            {"my_board", {kTypeMyBoardBegin, kTypeOppBoardBegin}},
            {"opp_board", {kTypeOppBoardBegin, kTypeHeroAttack}},
            {"hero_attack", kTypeHeroAttack},
            {"hero_power", kTypeHeroPower},
            {"end_turn", kTypeEndTurn},
            {"target_my_hero", kTargetMyHero},
            {"target_opp_hero", kTargetOppHero},
            {"target_my_board", {kTargetMyBoardBegin, kTargetOppBoardBegin}},
            {"target_opp_board", {kTargetOppBoardBegin, kTargetEnd}}}},
          {"observation", nlohmann::json::parse(encoder_->schema().to_json())}};
}

}  // namespace ministone::matchsvc
