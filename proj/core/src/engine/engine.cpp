#include "ministone/engine/engine.hpp"

#include <algorithm>
#include <map>
#include <random>

#include "ministone/util/seed.hpp"

namespace ministone {

namespace {

using namespace action;

struct CharRef {
  int player;
  int slot;  // -1 for the hero
};

// Resolves a target-region action relative to the active player.
CharRef resolve_target(const GameState& s, ActionId t) {
  const int me = s.active;
  const int i = t.index();
  if (i == kTargetMyHero) return {me, -1};
  if (i == kTargetOppHero) return {1 - me, -1};
  if (i >= kTargetMyBoardBegin && i < kTargetOppBoardBegin) return {me, i - kTargetMyBoardBegin};
  return {1 - me, i - kTargetOppBoardBegin};
}

void set_any_character(const GameState& s, ActionMask& m) {
  m.set(kTargetMyHero);
  m.set(kTargetOppHero);
  for (std::size_t k = 0; k < s.me().board.size(); ++k) m.set(kTargetMyBoardBegin + k);
  for (std::size_t k = 0; k < s.opponent().board.size(); ++k) m.set(kTargetOppBoardBegin + k);
}

void set_friendly_minions(const GameState& s, ActionMask& m) {
  for (std::size_t k = 0; k < s.me().board.size(); ++k) m.set(kTargetMyBoardBegin + k);
}

void set_attack_targets(const GameState& s, ActionMask& m) {
  const auto& opp = s.opponent().board;
  bool any_taunt = std::any_of(opp.begin(), opp.end(), [](const MinionInstance& x) { return x.taunt; });
  if (any_taunt) {
    for (std::size_t k = 0; k < opp.size(); ++k) {
      if (opp[k].taunt) m.set(kTargetOppBoardBegin + k);
    }
    return;
  }
  m.set(kTargetOppHero);
  for (std::size_t k = 0; k < opp.size(); ++k) m.set(kTargetOppBoardBegin + k);
}

bool has_target(const GameState& s, TargetClass tc) {
  switch (tc) {
    case TargetClass::AnyCharacter:
      return true;
    case TargetClass::FriendlyMinion:
      return !s.me().board.empty();
    default:
      return false;
  }
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_i16(std::string& out, std::int16_t v) {
  auto u = static_cast<std::uint16_t>(v);
  out.push_back(static_cast<char>(u & 0xff));
  out.push_back(static_cast<char>(u >> 8));
}
void put_ids(std::string& out, const std::vector<CardId>& ids) {
  put_i16(out, static_cast<std::int16_t>(ids.size()));
  for (CardId c : ids) put_i16(out, c);
}

}  // namespace

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::PickHero: return "PICK_HERO";
    case Stage::DeckBuilding: return "CB";
    case Stage::Battle: return "BT";
    case Stage::Terminal: return "TERMINAL";
  }
  return "?";
}

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::P0Win: return "P0_WIN";
    case Outcome::P1Win: return "P1_WIN";
    case Outcome::Draw: return "DRAW";
  }
  return "?";
}

std::string serialize(const GameState& s) {
  std::string out;
  out.reserve(512);
  out.push_back(static_cast<char>(s.stage));
  put_i16(out, s.turn_number);
  out.push_back(static_cast<char>(s.active));
  put_i16(out, s.pending ? static_cast<std::int16_t>(s.pending->value) : std::int16_t{-1});
  put_u64(out, s.rng_state);
  out.push_back(s.outcome ? static_cast<char>(*s.outcome) : char{-1});
  for (const auto& p : s.players) {
    out.push_back(static_cast<char>(p.hero));
    put_ids(out, p.picks);
    put_ids(out, p.deck);
    put_ids(out, p.hand);
    put_ids(out, p.graveyard);
    put_i16(out, static_cast<std::int16_t>(p.board.size()));
    for (const auto& m : p.board) {
      put_i16(out, m.card);
      put_i16(out, m.attack);
      put_i16(out, m.health);
      put_i16(out, m.max_health);
      out.push_back(static_cast<char>(m.can_attack | (m.taunt << 1)));
    }
    if (p.weapon) {
      out.push_back(1);
      put_i16(out, p.weapon->card);
      put_i16(out, p.weapon->attack);
      put_i16(out, p.weapon->durability);
    } else {
      out.push_back(0);
    }
    for (std::int16_t v : {p.hero_hp, p.armor, p.mana, p.mana_cap, p.temp_mana, p.fatigue, p.turns_started}) {
      put_i16(out, v);
    }
    out.push_back(static_cast<char>(p.coin | (p.hero_power_used << 1) | (p.hero_attacked << 2) |
                                    (p.preset_deck << 3)));
  }
  return out;
}

Engine::Engine(std::shared_ptr<const CardPool> pool) : pool_(std::move(pool)) {
  if (!pool_) throw std::invalid_argument("engine requires a card pool");
}

int Engine::card_cost(CardId id) const { return id == kCoinCard ? 0 : pool_->card(id).cost; }

void Engine::validate_deck(Hero hero, const std::vector<CardId>& deck) const {
  if (deck.size() != static_cast<std::size_t>(kDeckSize)) {
    throw std::invalid_argument("deck must contain exactly 30 cards, got " + std::to_string(deck.size()));
  }
  std::map<CardId, int> counts;
  for (CardId id : deck) {
    if (!pool_->contains(id)) throw std::invalid_argument("unknown card id " + std::to_string(id));
    const auto& c = pool_->card(id);
    if (!c.visible_to(hero)) {
      throw std::invalid_argument("card " + c.name + " not available to " + std::string(to_string(hero)));
    }
    if (++counts[id] > c.max_copies) throw std::invalid_argument("too many copies of " + c.name);
  }
}

GameState Engine::new_match(Hero hero0, Hero hero1, std::uint64_t seed, const MatchOptions& options) const {
  hero_from_index(static_cast<int>(hero0));
  hero_from_index(static_cast<int>(hero1));
  GameState s;
  s.stage = Stage::DeckBuilding;
  s.players[0].hero = hero0;
  s.players[1].hero = hero1;
  s.rng_state = mix_seed(seed);
  for (int p = 0; p < 2; ++p) {
    if (const auto& preset = options.preset_decks[p]) {
      validate_deck(s.players[p].hero, *preset);
      s.players[p].picks = *preset;
      s.players[p].deck = *preset;
      s.players[p].preset_deck = true;
    }
  }
  if (s.players[0].picks.size() < static_cast<std::size_t>(kDeckSize)) {
    s.active = 0;
  } else if (s.players[1].picks.size() < static_cast<std::size_t>(kDeckSize)) {
    s.active = 1;
  } else {
    begin_battle(s);
  }
  return s;
}

bool Engine::play_needs_target(const GameState& s, int hand_slot) const {
  CardId id = s.me().hand[static_cast<std::size_t>(hand_slot)];
  if (id == kCoinCard) return false;
  const auto& c = pool_->card(id);
  if (!c.effect.needs_target()) return false;
  // A minion whose battlecry has no legal target is simply summoned.
  return has_target(s, c.effect.target);
}

void Engine::target_mask(const GameState& s, ActionId type, ActionMask& m) const {
  const int i = type.index();
  if (i >= kTypeHandBegin && i < kTypeMyBoardBegin) {
    const auto& c = pool_->card(s.me().hand[static_cast<std::size_t>(i - kTypeHandBegin)]);
    if (c.effect.target == TargetClass::AnyCharacter) set_any_character(s, m);
    else if (c.effect.target == TargetClass::FriendlyMinion) set_friendly_minions(s, m);
  } else if ((i >= kTypeMyBoardBegin && i < kTypeOppBoardBegin) || i == kTypeHeroAttack) {
    set_attack_targets(s, m);
  } else if (i == kTypeHeroPower) {
    set_any_character(s, m);
  }
}

ActionMask Engine::legal_mask(const GameState& s) const {
  ActionMask m;
  if (s.stage == Stage::Terminal) throw std::logic_error("legal_actions called on a terminal state");
  if (s.stage == Stage::DeckBuilding) {
    const auto& p = s.me();
    auto vis = pool_->visible(p.hero);
    for (std::size_t j = 0; j < vis.size(); ++j) {
      int n = static_cast<int>(std::count(p.picks.begin(), p.picks.end(), vis[j]));
      if (n < pool_->card(vis[j]).max_copies) m.set(kCbBegin + j);
    }
    return m;
  }
  if (s.stage != Stage::Battle) throw std::logic_error("legal_actions: unsupported stage");
  if (s.pending) {
    target_mask(s, *s.pending, m);
    return m;
  }
  const auto& p = s.me();
  const int mana = p.available_mana();
  for (std::size_t k = 0; k < p.hand.size(); ++k) {
    CardId id = p.hand[k];
    if (id == kCoinCard) {
      m.set(kTypeHandBegin + k);
      continue;
    }
    const auto& c = pool_->card(id);
    if (c.cost > mana) continue;
    if (c.kind == CardKind::Minion && p.board.size() >= static_cast<std::size_t>(kBoardSlots)) continue;
    if (c.kind == CardKind::Spell && c.effect.needs_target() && !has_target(s, c.effect.target)) continue;
    m.set(kTypeHandBegin + k);
  }
  for (std::size_t k = 0; k < p.board.size(); ++k) {
    if (p.board[k].can_attack && p.board[k].attack > 0) m.set(kTypeMyBoardBegin + k);
  }
  if (p.weapon && p.weapon->attack > 0 && !p.hero_attacked) m.set(kTypeHeroAttack);
  if (!p.hero_power_used && mana >= 2) m.set(kTypeHeroPower);
  m.set(kTypeEndTurn);
  return m;
}

std::vector<ActionId> Engine::legal_actions(const GameState& s) const { return mask_to_actions(legal_mask(s)); }

bool Engine::is_legal(const GameState& s, ActionId a) const {
  if (s.stage == Stage::Terminal || a.index() >= kTableSize) return false;
  return legal_mask(s).test(a.value);
}

PendingKind Engine::pending_kind(const GameState& s) const {
  if (!s.pending) return PendingKind::None;
  const int i = s.pending->index();
  if (i >= kTypeHandBegin && i < kTypeMyBoardBegin) {
    const auto& c = pool_->card(s.me().hand[static_cast<std::size_t>(i - kTypeHandBegin)]);
    return c.kind == CardKind::Minion ? PendingKind::Battlecry : PendingKind::Spell;
  }
  if (i == kTypeHeroPower) return PendingKind::HeroPower;
  return PendingKind::Attack;
}

StepResult Engine::apply_action(const GameState& state, ActionId action) const {
  StepResult r{state, {0, 0}};
  r.reward = apply_in_place(r.state, action);
  return r;
}

std::array<int, 2> Engine::apply_in_place(GameState& s, ActionId a) const {
  if (s.stage == Stage::Terminal) throw IllegalAction(a, "match is over");
  if (a.index() >= kTableSize) throw IllegalAction(a, "outside the action table");
  if (!legal_mask(s).test(a.value)) throw IllegalAction(a, "not in the legal set");

  if (s.stage == Stage::DeckBuilding) {
    auto& p = s.players[s.active];
    CardId id = pool_->visible(p.hero)[static_cast<std::size_t>(a.index() - kCbBegin)];
    p.picks.push_back(id);
    p.deck.push_back(id);
    if (p.picks.size() == static_cast<std::size_t>(kDeckSize)) {
      auto& other = s.players[1 - s.active];
      if (other.picks.size() < static_cast<std::size_t>(kDeckSize)) {
        s.active = static_cast<std::uint8_t>(1 - s.active);
      } else {
        begin_battle(s);
      }
    }
    return {0, 0};
  }

  if (s.pending) {
    ActionId type = *s.pending;
    s.pending.reset();
    const int t = type.index();
    if (t >= kTypeHandBegin && t < kTypeMyBoardBegin) resolve_play(s, t - kTypeHandBegin, a);
    else if (t == kTypeHeroPower) resolve_hero_power(s, a);
    else resolve_attack(s, type, a);
  } else {
    const int i = a.index();
    if (i == kTypeEndTurn) {
      end_turn(s);
    } else if (i >= kTypeHandBegin && i < kTypeMyBoardBegin) {
      if (play_needs_target(s, i - kTypeHandBegin)) s.pending = a;
      else resolve_play(s, i - kTypeHandBegin, std::nullopt);
    } else if (i == kTypeHeroPower) {
      if (s.me().hero == Hero::Mage) s.pending = a;
      else resolve_hero_power(s, std::nullopt);
    } else {
      s.pending = a;  // minion or hero attack
    }
  }
  settle(s);
  return terminal_reward(s.outcome);
}

void Engine::spend_mana(PlayerState& p, int cost) const {
  int from_temp = std::min<int>(cost, p.temp_mana);
  p.temp_mana = static_cast<std::int16_t>(p.temp_mana - from_temp);
  p.mana = static_cast<std::int16_t>(p.mana - (cost - from_temp));
}

void Engine::damage_hero(PlayerState& p, int amount) const {
  int absorbed = std::min<int>(amount, p.armor);
  p.armor = static_cast<std::int16_t>(p.armor - absorbed);
  p.hero_hp = static_cast<std::int16_t>(p.hero_hp - (amount - absorbed));
}

void Engine::apply_effect(GameState& s, const EffectSpec& e, std::optional<ActionId> target) const {
  auto& me = s.players[s.active];
  auto& opp = s.players[1 - s.active];
  auto character = [&](ActionId t) -> std::pair<PlayerState*, int> {
    CharRef ref = resolve_target(s, t);
    return {&s.players[ref.player], ref.slot};
  };
  switch (e.verb) {
    case EffectVerb::None:
      break;
    case EffectVerb::Damage:
      if (e.target == TargetClass::EnemyHero) {
        damage_hero(opp, e.magnitude);
      } else if (target) {
        auto [p, slot] = character(*target);
        if (slot < 0) damage_hero(*p, e.magnitude);
        else p->board[static_cast<std::size_t>(slot)].health -= static_cast<std::int16_t>(e.magnitude);
      }
      break;
    case EffectVerb::AoeDamageEnemyMinions:
      for (auto& m : opp.board) m.health -= static_cast<std::int16_t>(e.magnitude);
      break;
    case EffectVerb::Heal:
      if (target) {
        auto [p, slot] = character(*target);
        if (slot < 0) {
          p->hero_hp = static_cast<std::int16_t>(std::min(kMaxHeroHp, p->hero_hp + e.magnitude));
        } else {
          auto& m = p->board[static_cast<std::size_t>(slot)];
          m.health = static_cast<std::int16_t>(std::min<int>(m.max_health, m.health + e.magnitude));
        }
      }
      break;
    case EffectVerb::Draw:
      for (int k = 0; k < e.magnitude; ++k) draw(s, s.active);
      break;
    case EffectVerb::Buff:
      if (target) {
        auto [p, slot] = character(*target);
        if (slot >= 0) {
          auto& m = p->board[static_cast<std::size_t>(slot)];
          m.attack = static_cast<std::int16_t>(m.attack + e.magnitude);
          m.health = static_cast<std::int16_t>(m.health + e.magnitude);
          m.max_health = static_cast<std::int16_t>(m.max_health + e.magnitude);
        }
      }
      break;
    case EffectVerb::GainArmor:
      me.armor = static_cast<std::int16_t>(me.armor + e.magnitude);
      break;
  }
}

void Engine::resolve_play(GameState& s, int hand_slot, std::optional<ActionId> target) const {
  auto& p = s.players[s.active];
  CardId id = p.hand[static_cast<std::size_t>(hand_slot)];
  p.hand.erase(p.hand.begin() + hand_slot);
  if (id == kCoinCard) {
    p.temp_mana = static_cast<std::int16_t>(p.temp_mana + 1);
    return;
  }
  const auto& c = pool_->card(id);
  spend_mana(p, c.cost);
  switch (c.kind) {
    case CardKind::Minion: {
      MinionInstance m;
      m.card = id;
      m.attack = static_cast<std::int16_t>(c.attack);
      m.health = static_cast<std::int16_t>(c.health);
      m.max_health = m.health;
      m.can_attack = c.charge;
      m.taunt = c.taunt;
      p.board.push_back(m);
      if (!c.effect.needs_target() || target) apply_effect(s, c.effect, target);
      break;
    }
    case CardKind::Spell:
      apply_effect(s, c.effect, target);
      s.players[s.active].graveyard.push_back(id);
      break;
    case CardKind::Weapon:
      if (p.weapon) p.graveyard.push_back(p.weapon->card);
      p.weapon = Weapon{id, static_cast<std::int16_t>(c.attack), static_cast<std::int16_t>(c.health)};
      break;
  }
}

void Engine::resolve_attack(GameState& s, ActionId attacker, ActionId target) const {
  auto& me = s.players[s.active];
  CharRef t = resolve_target(s, target);
  auto& defender = s.players[t.player];
  if (attacker.index() == kTypeHeroAttack) {
    int atk = me.weapon->attack;
    if (t.slot < 0) {
      damage_hero(defender, atk);
    } else {
      auto& m = defender.board[static_cast<std::size_t>(t.slot)];
      int counter = m.attack;
      m.health = static_cast<std::int16_t>(m.health - atk);
      damage_hero(me, counter);
    }
    me.hero_attacked = true;
    me.weapon->durability -= 1;
    if (me.weapon->durability <= 0) {
      me.graveyard.push_back(me.weapon->card);
      me.weapon.reset();
    }
    return;
  }
  auto& a = me.board[static_cast<std::size_t>(attacker.index() - kTypeMyBoardBegin)];
  a.can_attack = false;
  if (t.slot < 0) {
    damage_hero(defender, a.attack);
  } else {
    auto& m = defender.board[static_cast<std::size_t>(t.slot)];
    std::int16_t dealt = a.attack;
    std::int16_t received = m.attack;
    m.health = static_cast<std::int16_t>(m.health - dealt);
    a.health = static_cast<std::int16_t>(a.health - received);
  }
}

void Engine::resolve_hero_power(GameState& s, std::optional<ActionId> target) const {
  auto& me = s.players[s.active];
  spend_mana(me, 2);
  me.hero_power_used = true;
  switch (me.hero) {
    case Hero::Mage:
      apply_effect(s, EffectSpec{EffectVerb::Damage, 1, TargetClass::AnyCharacter}, target);
      break;
    case Hero::Hunter:
      apply_effect(s, EffectSpec{EffectVerb::Damage, 2, TargetClass::EnemyHero}, std::nullopt);
      break;
    case Hero::Warrior:
      apply_effect(s, EffectSpec{EffectVerb::GainArmor, 2, TargetClass::None}, std::nullopt);
      break;
  }
}

void Engine::draw(GameState& s, int player) const {
  auto& p = s.players[player];
  if (p.deck.empty()) {
    p.fatigue = static_cast<std::int16_t>(p.fatigue + 1);
    damage_hero(p, p.fatigue);
    return;
  }
  CardId id = p.deck.back();
  p.deck.pop_back();
  if (p.hand.size() >= static_cast<std::size_t>(kHandSlots)) {
    p.graveyard.push_back(id);  // overdraw burns the card
  } else {
    p.hand.push_back(id);
  }
}

void Engine::begin_battle(GameState& s) const {
  std::mt19937_64 gen(s.rng_state);
  for (auto& p : s.players) {
    p.deck = p.picks;
    for (std::size_t i = p.deck.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(gen() % i);
      std::swap(p.deck[i - 1], p.deck[j]);
    }
  }
  s.rng_state = gen();
  s.stage = Stage::Battle;
  s.turn_number = 0;
  for (int k = 0; k < 3; ++k) draw(s, 0);
  for (int k = 0; k < 4; ++k) draw(s, 1);
  s.players[1].hand.push_back(kCoinCard);
  s.players[1].coin = true;
  start_turn(s, 0);
}

void Engine::start_turn(GameState& s, int player) const {
  s.turn_number = static_cast<std::int16_t>(s.turn_number + 1);
  s.active = static_cast<std::uint8_t>(player);
  auto& p = s.players[player];
  p.turns_started = static_cast<std::int16_t>(p.turns_started + 1);
  p.mana_cap = static_cast<std::int16_t>(std::min<int>(p.turns_started, kMaxMana));
  p.mana = p.mana_cap;
  p.hero_power_used = false;
  p.hero_attacked = false;
  for (auto& m : p.board) m.can_attack = true;
  draw(s, player);
}

void Engine::end_turn(GameState& s) const {
  auto& p = s.players[s.active];
  p.temp_mana = 0;
  s.pending.reset();
  if (s.turn_number >= kHalfTurnCap) {
    s.stage = Stage::Terminal;
    s.outcome = Outcome::Draw;
    return;
  }
  start_turn(s, 1 - s.active);
}

void Engine::settle(GameState& s) const {
  for (auto& p : s.players) {
    auto it = p.board.begin();
    while (it != p.board.end()) {
      if (it->health <= 0) {
        p.graveyard.push_back(it->card);
        it = p.board.erase(it);
      } else {
        ++it;
      }
    }
  }
  if (s.stage != Stage::Battle) return;
  const bool dead0 = s.players[0].hero_hp <= 0;
  const bool dead1 = s.players[1].hero_hp <= 0;
  for (auto& p : s.players) p.hero_hp = std::max<std::int16_t>(p.hero_hp, 0);
  if (!dead0 && !dead1) return;
  if (dead0 && dead1) {
    s.outcome = s.active == 0 ? Outcome::P1Win : Outcome::P0Win;
  } else {
    s.outcome = dead0 ? Outcome::P1Win : Outcome::P0Win;
  }
  s.stage = Stage::Terminal;
  s.pending.reset();
}

std::vector<std::string> Engine::check_invariants(const GameState& s) const {
  std::vector<std::string> v;
  auto fail = [&](const std::string& what) { v.push_back(what); };
  if ((s.stage == Stage::Terminal) != s.outcome.has_value()) fail("TERMINAL <=> outcome violated");
  if (s.active > 1) fail("active player out of range");
  if (s.turn_number < 0 || s.turn_number > kHalfTurnCap) fail("turn_number outside [0, cap]");
  if (s.pending && (s.stage != Stage::Battle || !is_type(*s.pending))) fail("pending selection outside BT");
  for (int pi = 0; pi < 2; ++pi) {
    const auto& p = s.players[pi];
    const std::string who = "player " + std::to_string(pi) + ": ";
    if (p.board.size() > static_cast<std::size_t>(kBoardSlots)) fail(who + "board > 7");
    if (p.hand.size() > static_cast<std::size_t>(kHandSlots)) fail(who + "hand > 10");
    if (p.mana < 0 || p.mana > p.mana_cap || p.mana_cap > kMaxMana) fail(who + "mana bounds");
    if (p.temp_mana < 0) fail(who + "negative temporary mana");
    if (p.hero_hp < 0 || p.hero_hp > kMaxHeroHp) fail(who + "hero hp outside 0..30");
    if (p.armor < 0 || p.fatigue < 0) fail(who + "negative armor/fatigue");
    if (p.picks.size() > static_cast<std::size_t>(kDeckSize)) fail(who + "more than 30 picks");
    if (p.weapon && p.weapon->durability < 1) fail(who + "broken weapon still equipped");
    for (const auto& m : p.board) {
      if (m.health < 1) fail(who + "dead minion on board");
      if (m.health > m.max_health) fail(who + "minion above max health");
    }
    if (std::count(p.graveyard.begin(), p.graveyard.end(), kCoinCard) > 0) fail(who + "coin in graveyard");
    if (s.stage == Stage::DeckBuilding) {
      if (p.deck != p.picks) fail(who + "deck differs from picks during CB");
      continue;
    }
    if (s.stage == Stage::PickHero) continue;
    if (p.picks.size() != static_cast<std::size_t>(kDeckSize)) fail(who + "battle without a full deck");
    std::map<CardId, int> zones;
    for (CardId c : p.deck) ++zones[c];
    for (CardId c : p.hand) {
      if (c != kCoinCard) ++zones[c];
    }
    for (const auto& m : p.board) ++zones[m.card];
    for (CardId c : p.graveyard) ++zones[c];
    if (p.weapon) ++zones[p.weapon->card];
    std::map<CardId, int> built;
    for (CardId c : p.picks) ++built[c];
    if (zones != built) fail(who + "card conservation violated");
  }
  if (s.stage == Stage::Battle) {
    if (s.players[0].hero_hp == 0 || s.players[1].hero_hp == 0) fail("dead hero in a live battle");
  }
  return v;
}

}  // namespace ministone
