#include "ministone/obsact/observation.hpp"

#include <algorithm>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace ministone {

namespace {

using namespace action;

constexpr int kBoardFeatures = 8;
constexpr int kHandFeatures = 10;
constexpr int kPlayerFeatures = 16;
constexpr int kCostBuckets = 11;

struct LayoutBuilder {
  std::vector<FieldSpec>& fields;
  int next = 0;
  void add(std::string name, int width) {
    fields.push_back({std::move(name), next, width});
    next += width;
  }
};

const FieldSpec& find_field(const std::vector<FieldSpec>& fields, std::string_view name) {
  for (const auto& f : fields) {
    if (f.name == name) return f;
  }
  throw std::out_of_range("no observation field '" + std::string(name) + "'");
}

int find_slot(const std::vector<std::string>& slots, std::string_view name) {
  auto it = std::find(slots.begin(), slots.end(), name);
  if (it == slots.end()) throw std::out_of_range("no embedding slot '" + std::string(name) + "'");
  return static_cast<int>(it - slots.begin());
}

}  // namespace

std::string_view to_string(DecisionType d) {
  static constexpr std::string_view names[] = {"construct", "select",     "minion_battlecry", "spell_card",
                                                "attack",    "hero_power", "end_turn"};
  return names[static_cast<int>(d)];
}

DecisionType decision_type(const Engine& engine, const GameState& s) {
  if (s.stage == Stage::DeckBuilding) return DecisionType::Construct;
  if (s.stage != Stage::Battle) throw std::invalid_argument("decision_type: match is not in CB or BT");
  switch (engine.pending_kind(s)) {
    case PendingKind::None: return DecisionType::Select;
    case PendingKind::Battlecry: return DecisionType::Battlecry;
    case PendingKind::Spell: return DecisionType::Spell;
    case PendingKind::Attack: return DecisionType::Attack;
    case PendingKind::HeroPower: return DecisionType::HeroPower;
  }
  return DecisionType::Select;
}

ObsSchema::ObsSchema(const CardPool& pool) : pool_size_(static_cast<int>(pool.size())) {
  LayoutBuilder cb{cb_fields_};
  cb.add("my_hero", kNumHeroes);
  cb.add("picked_counts", kCbSlots);
  cb.add("can_select", kCbSlots);
  cb.add("picks_made", 1);
  cb.add("cost_curve", kCostBuckets);
  cb.add("kind_counts", 3);
  cb.add("cheat_counts", pool_size_);
  cb.add("cheat_n", 1);
  cb_dense_ = cb.next;
  cb_slot_names_ = {"my_hero", "my_deck", "cheat_deck"};

  LayoutBuilder bt{bt_fields_};
  bt.add("my_hero", kNumHeroes);
  bt.add("opp_hero", kNumHeroes);
  bt.add("decision_type", kNumDecisionTypes);
  bt.add("pending_slot", kTypeEnd - kTypeBegin);
  bt.add("my_deck_counts", pool_size_);
  bt.add("my_board", kBoardSlots * kBoardFeatures);
  bt.add("opp_board", kBoardSlots * kBoardFeatures);
  bt.add("my_hand", kHandSlots * kHandFeatures);
  bt.add("my_graveyard", pool_size_);
  bt.add("opp_graveyard", pool_size_);
  bt.add("my_stats", kPlayerFeatures);
  bt.add("opp_stats", kPlayerFeatures);
  bt.add("turn", 1);
  bt.add("cheat_counts", pool_size_);
  bt.add("cheat_n", 1);
  bt_dense_ = bt.next;
  bt_slot_names_ = {"my_hero", "opp_hero"};
  for (int k = 0; k < kBoardSlots; ++k) bt_slot_names_.push_back("my_board_" + std::to_string(k));
  for (int k = 0; k < kBoardSlots; ++k) bt_slot_names_.push_back("opp_board_" + std::to_string(k));
  for (int k = 0; k < kHandSlots; ++k) bt_slot_names_.push_back("my_hand_" + std::to_string(k));
  bt_slot_names_.push_back("my_deck");
  bt_slot_names_.push_back("opp_graveyard");
  bt_slot_names_.push_back("cheat_deck");
}

const FieldSpec& ObsSchema::cb_field(std::string_view name) const { return find_field(cb_fields_, name); }
const FieldSpec& ObsSchema::bt_field(std::string_view name) const { return find_field(bt_fields_, name); }
int ObsSchema::cb_slot(std::string_view name) const { return find_slot(cb_slot_names_, name); }
int ObsSchema::bt_slot(std::string_view name) const { return find_slot(bt_slot_names_, name); }

std::uint64_t ObsSchema::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ull;
    }
    h ^= 0xff;
    h *= 0x100000001b3ull;
  };
  mix(std::to_string(kEmbeddingDim));
  for (const auto* fields : {&cb_fields_, &bt_fields_}) {
    for (const auto& f : *fields) mix(f.name + ":" + std::to_string(f.offset) + ":" + std::to_string(f.width));
  }
  for (const auto* slots : {&cb_slot_names_, &bt_slot_names_}) {
    for (const auto& s : *slots) mix(s);
  }
  return h;
}

std::string ObsSchema::to_json() const {
  using nlohmann::json;
  auto block = [](const std::vector<FieldSpec>& fields, const std::vector<std::string>& slots, int dense) {
    json j;
    j["dense_width"] = dense;
    j["input_width"] = dense + static_cast<int>(slots.size()) * kEmbeddingDim;
    for (const auto& f : fields) j["fields"].push_back({{"name", f.name}, {"offset", f.offset}, {"width", f.width}});
    int off = dense;
    for (const auto& s : slots) {
      j["embedding_slots"].push_back({{"name", s}, {"offset", off}, {"width", kEmbeddingDim}});
      off += kEmbeddingDim;
    }
    return j;
  };
  json doc;
  doc["embedding_dim"] = kEmbeddingDim;
  doc["pool_size"] = pool_size_;
  doc["fingerprint"] = checksum_hex(fingerprint());
  doc["deck_building"] = block(cb_fields_, cb_slot_names_, cb_dense_);
  doc["battle"] = block(bt_fields_, bt_slot_names_, bt_dense_);
  json table = json::array();
  for (int i = 0; i < kTableSize; ++i) table.push_back(action::describe(ActionId(i)));
  doc["action_table"] = table;
  doc["decision_types"] = json::array();
  for (int d = 0; d < kNumDecisionTypes; ++d) doc["decision_types"].push_back(to_string(static_cast<DecisionType>(d)));
  return doc.dump(2);
}

struct Encoder::Offsets {
  int cb_my_hero, cb_picked, cb_can_select, cb_picks_made, cb_curve, cb_kinds, cb_cheat, cb_cheat_n;
  int cbs_hero, cbs_deck, cbs_cheat;
  int my_hero, opp_hero, decision, pending, my_deck, my_board, opp_board, hand, my_grave, opp_grave, my_stats,
      opp_stats, turn, cheat, cheat_n;
  int s_my_hero, s_opp_hero, s_my_board, s_opp_board, s_hand, s_deck, s_opp_grave, s_cheat;
};

Encoder::Encoder(Engine engine) : engine_(std::move(engine)), schema_(engine_.pool()) {
  auto o = std::make_shared<Offsets>();
  const auto& sc = schema_;
  o->cb_my_hero = sc.cb_field("my_hero").offset;
  o->cb_picked = sc.cb_field("picked_counts").offset;
  o->cb_can_select = sc.cb_field("can_select").offset;
  o->cb_picks_made = sc.cb_field("picks_made").offset;
  o->cb_curve = sc.cb_field("cost_curve").offset;
  o->cb_kinds = sc.cb_field("kind_counts").offset;
  o->cb_cheat = sc.cb_field("cheat_counts").offset;
  o->cb_cheat_n = sc.cb_field("cheat_n").offset;
  o->cbs_hero = sc.cb_slot("my_hero");
  o->cbs_deck = sc.cb_slot("my_deck");
  o->cbs_cheat = sc.cb_slot("cheat_deck");
  o->my_hero = sc.bt_field("my_hero").offset;
  o->opp_hero = sc.bt_field("opp_hero").offset;
  o->decision = sc.bt_field("decision_type").offset;
  o->pending = sc.bt_field("pending_slot").offset;
  o->my_deck = sc.bt_field("my_deck_counts").offset;
  o->my_board = sc.bt_field("my_board").offset;
  o->opp_board = sc.bt_field("opp_board").offset;
  o->hand = sc.bt_field("my_hand").offset;
  o->my_grave = sc.bt_field("my_graveyard").offset;
  o->opp_grave = sc.bt_field("opp_graveyard").offset;
  o->my_stats = sc.bt_field("my_stats").offset;
  o->opp_stats = sc.bt_field("opp_stats").offset;
  o->turn = sc.bt_field("turn").offset;
  o->cheat = sc.bt_field("cheat_counts").offset;
  o->cheat_n = sc.bt_field("cheat_n").offset;
  o->s_my_hero = sc.bt_slot("my_hero");
  o->s_opp_hero = sc.bt_slot("opp_hero");
  o->s_my_board = sc.bt_slot("my_board_0");
  o->s_opp_board = sc.bt_slot("opp_board_0");
  o->s_hand = sc.bt_slot("my_hand_0");
  o->s_deck = sc.bt_slot("my_deck");
  o->s_opp_grave = sc.bt_slot("opp_graveyard");
  o->s_cheat = sc.bt_slot("cheat_deck");
  off_ = std::move(o);
}

ActionMask Encoder::action_mask(const GameState& s, int player) const {
  if (s.stage == Stage::Terminal || s.active != player) return {};
  return engine_.legal_mask(s);
}

ObservationBundle Encoder::encode(const GameState& s, int player, int cheat_n) const {
  if (s.stage == Stage::Terminal) throw std::invalid_argument("cannot encode a terminal state");
  if (s.stage != Stage::DeckBuilding && s.stage != Stage::Battle) {
    throw std::invalid_argument("cannot encode stage " + std::string(to_string(s.stage)));
  }
  if (player != 0 && player != 1) throw std::invalid_argument("player must be 0 or 1");
  if (cheat_n < 0 || cheat_n > kMaxCheat) throw std::invalid_argument("cheat_n outside 0..30");
  ObservationBundle o;
  o.delta = s.stage == Stage::DeckBuilding ? 1 : 0;
  o.hero = s.players[player].hero;
  o.decision = decision_type(engine_, s);
  o.cb.assign(static_cast<std::size_t>(schema_.cb_dense_width()), 0.f);
  o.bt.assign(static_cast<std::size_t>(schema_.bt_dense_width()), 0.f);
  o.cb_candidates.fill(-1);
  auto vis = engine_.pool().visible(o.hero);
  for (std::size_t j = 0; j < vis.size(); ++j) o.cb_candidates[j] = vis[j];
  encode_cb(s, player, cheat_n, o);
  if (o.delta == 0) encode_bt(s, player, cheat_n, o);
  o.mask = action_mask(s, player);
  return o;
}

void Encoder::encode_cb(const GameState& s, int player, int cheat_n, ObservationBundle& o) const {
  const auto& off = *off_;
  const auto& pool = engine_.pool();
  const auto& me = s.players[player];
  const auto& opp = s.players[1 - player];
  float* cb = o.cb.data();
  cb[off.cb_my_hero + static_cast<int>(me.hero)] = 1.f;
  o.cb_bags.push_back({static_cast<std::uint16_t>(off.cbs_hero), 1, static_cast<std::int16_t>(me.hero), 1.f});
  auto vis = pool.visible(me.hero);
  for (CardId id : me.picks) {
    const auto& c = pool.card(id);
    if (auto slot = pool.cb_slot(me.hero, id)) cb[off.cb_picked + *slot] += 1.f;
    cb[off.cb_curve + std::min(c.cost, kCostBuckets - 1)] += 0.1f;
    cb[off.cb_kinds + static_cast<int>(c.kind)] += 1.f / kDeckSize;
    o.cb_bags.push_back({static_cast<std::uint16_t>(off.cbs_deck), 0, id, 1.f / kDeckSize});
  }
  cb[off.cb_picks_made] = static_cast<float>(me.picks.size()) / kDeckSize;
  if (o.delta == 1 && s.active == player && me.picks.size() < static_cast<std::size_t>(kDeckSize)) {
    for (std::size_t j = 0; j < vis.size(); ++j) {
      if (cb[off.cb_picked + static_cast<int>(j)] < static_cast<float>(pool.card(vis[j]).max_copies)) {
        cb[off.cb_can_select + static_cast<int>(j)] = 1.f;
      }
    }
  }
  const int n = std::min<int>(cheat_n, static_cast<int>(opp.picks.size()));
  for (int k = 0; k < n; ++k) {
    CardId id = opp.picks[static_cast<std::size_t>(k)];
    cb[off.cb_cheat + id] += 1.f;
    o.cb_bags.push_back({static_cast<std::uint16_t>(off.cbs_cheat), 0, id, 1.f / kDeckSize});
  }
  cb[off.cb_cheat_n] = static_cast<float>(cheat_n) / kMaxCheat;
}

void Encoder::encode_bt(const GameState& s, int player, int cheat_n, ObservationBundle& o) const {
  const auto& off = *off_;
  const auto& pool = engine_.pool();
  const auto& me = s.players[player];
  const auto& opp = s.players[1 - player];
  float* bt = o.bt.data();
  auto bag = [&o](int slot, EmbeddingTable table, int row, float w) {
    o.bt_bags.push_back({static_cast<std::uint16_t>(slot), static_cast<std::uint8_t>(table),
                         static_cast<std::int16_t>(row), w});
  };

  bt[off.my_hero + static_cast<int>(me.hero)] = 1.f;
  bt[off.opp_hero + static_cast<int>(opp.hero)] = 1.f;
  bag(off.s_my_hero, EmbeddingTable::Hero, static_cast<int>(me.hero), 1.f);
  bag(off.s_opp_hero, EmbeddingTable::Hero, static_cast<int>(opp.hero), 1.f);
  // The decision and pending selection only describe the acting player's turn.
  if (s.active == player) {
    bt[off.decision + static_cast<int>(o.decision)] = 1.f;
    if (s.pending) bt[off.pending + s.pending->index() - kTypeBegin] = 1.f;
  }

  for (CardId id : me.deck) {
    bt[off.my_deck + id] += 1.f;
    bag(off.s_deck, EmbeddingTable::Card, id, 1.f / kDeckSize);
  }

  auto board = [&](const PlayerState& p, int base, int slot_base) {
    for (std::size_t k = 0; k < p.board.size(); ++k) {
      const auto& m = p.board[k];
      float* f = bt + base + static_cast<int>(k) * kBoardFeatures;
      f[0] = 1.f;
      f[1] = m.attack / 10.f;
      f[2] = m.health / 10.f;
      f[3] = m.max_health / 10.f;
      f[4] = m.can_attack ? 1.f : 0.f;
      f[5] = m.taunt ? 1.f : 0.f;
      f[6] = m.health < m.max_health ? 1.f : 0.f;
      f[7] = pool.card(m.card).cost / 10.f;
      bag(slot_base + static_cast<int>(k), EmbeddingTable::Card, m.card, 1.f);
    }
  };
  board(me, off.my_board, off.s_my_board);
  board(opp, off.opp_board, off.s_opp_board);

  // Playability comes from the legal mask so it is only set on our own turn.
  ActionMask legal;
  if (s.active == player && !s.pending) legal = engine_.legal_mask(s);
  for (std::size_t k = 0; k < me.hand.size(); ++k) {
    CardId id = me.hand[k];
    float* f = bt + off.hand + static_cast<int>(k) * kHandFeatures;
    f[0] = 1.f;
    f[2] = legal.test(static_cast<std::size_t>(kTypeHandBegin) + k) ? 1.f : 0.f;
    if (id == kCoinCard) {
      f[3] = 1.f;
      continue;
    }
    const auto& c = pool.card(id);
    f[1] = c.cost / 10.f;
    f[4 + static_cast<int>(c.kind)] = 1.f;
    f[7] = c.attack / 10.f;
    f[8] = c.health / 10.f;
    f[9] = c.effect.needs_target() ? 1.f : 0.f;
    bag(off.s_hand + static_cast<int>(k), EmbeddingTable::Card, id, 1.f);
  }

  for (CardId id : me.graveyard) bt[off.my_grave + id] += 1.f;
  for (CardId id : opp.graveyard) {
    bt[off.opp_grave + id] += 1.f;
    bag(off.s_opp_grave, EmbeddingTable::Card, id, 1.f / kDeckSize);
  }

  auto stats = [&](const PlayerState& p, int idx, int base) {
    float* f = bt + base;
    f[0] = p.hero_hp / 30.f;
    f[1] = p.armor / 10.f;
    f[2] = p.mana / 10.f;
    f[3] = p.mana_cap / 10.f;
    f[4] = static_cast<float>(p.temp_mana);
    f[5] = p.weapon ? 1.f : 0.f;
    f[6] = p.weapon ? p.weapon->attack / 10.f : 0.f;
    f[7] = p.weapon ? p.weapon->durability / 10.f : 0.f;
    f[8] = p.fatigue / 10.f;
    f[9] = static_cast<float>(p.hand.size()) / kHandSlots;
    f[10] = static_cast<float>(p.board.size()) / kBoardSlots;
    f[11] = static_cast<float>(p.deck.size()) / kDeckSize;
    f[12] = p.hero_power_used ? 1.f : 0.f;
    f[13] = p.hero_attacked ? 1.f : 0.f;
    f[14] = idx == 0 ? 1.f : 0.f;
    f[15] = p.coin ? 1.f : 0.f;
  };
  stats(me, player, off.my_stats);
  stats(opp, 1 - player, off.opp_stats);
  bt[off.turn] = static_cast<float>(s.turn_number) / kHalfTurnCap;

  const int n = std::min<int>(cheat_n, static_cast<int>(opp.picks.size()));
  for (int k = 0; k < n; ++k) {
    CardId id = opp.picks[static_cast<std::size_t>(k)];
    bt[off.cheat + id] += 1.f;
    bag(off.s_cheat, EmbeddingTable::Card, id, 1.f / kDeckSize);
  }
  bt[off.cheat_n] = static_cast<float>(cheat_n) / kMaxCheat;
}

}  // namespace ministone
