#include "ministone/engine/card_pool.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ministone/engine/action_table.hpp"

#ifndef MINISTONE_DEFAULT_DATA_DIR
#define MINISTONE_DEFAULT_DATA_DIR "data"
#endif

namespace ministone {

namespace {

constexpr std::string_view kHeroNames[] = {"mage", "hunter", "warrior"};
constexpr std::string_view kRestrictionNames[] = {"common", "mage", "hunter", "warrior"};
constexpr std::string_view kKindNames[] = {"minion", "spell", "weapon"};
constexpr std::string_view kVerbNames[] = {"none", "damage", "aoe_damage_enemy_minions", "heal",
                                           "draw", "buff", "gain_armor"};
constexpr std::string_view kTargetNames[] = {"none", "any_character", "friendly_minion", "enemy_hero"};

template <typename Enum, std::size_t N>
Enum enum_from(std::string_view s, const std::string_view (&names)[N], std::string_view what) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == s) return static_cast<Enum>(i);
  }
  throw PoolError("unknown " + std::string(what) + " '" + std::string(s) + "'");
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(s.substr(start)));
      break;
    }
    out.push_back(trim(s.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

int parse_int(std::string_view s, std::string_view field) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw PoolError("field '" + std::string(field) + "': not an integer: '" + std::string(s) + "'");
  }
  return value;
}

std::string record_line(const CardSpec& c) {
  std::ostringstream os;
  std::string keywords;
  if (c.taunt) keywords = "taunt";
  if (c.charge) keywords += keywords.empty() ? "charge" : ",charge";
  if (keywords.empty()) keywords = "-";
  os << c.id << '|' << c.name << '|' << to_string(c.hero) << '|' << to_string(c.kind) << '|' << c.cost << '|'
     << c.attack << '|' << c.health << '|' << keywords << '|' << to_string(c.effect.verb) << '|'
     << c.effect.magnitude << '|' << to_string(c.effect.target) << '|' << c.max_copies;
  return os.str();
}

void check(bool ok, const CardSpec& c, const std::string& msg) {
  if (!ok) throw PoolError("card " + std::to_string(c.id) + " (" + c.name + "): " + msg);
}

}  // namespace

std::string_view to_string(Hero h) { return kHeroNames[static_cast<int>(h)]; }
std::string_view to_string(HeroRestriction h) { return kRestrictionNames[static_cast<int>(h)]; }
std::string_view to_string(CardKind k) { return kKindNames[static_cast<int>(k)]; }
std::string_view to_string(EffectVerb v) { return kVerbNames[static_cast<int>(v)]; }
std::string_view to_string(TargetClass t) { return kTargetNames[static_cast<int>(t)]; }

Hero hero_from_string(std::string_view s) {
  for (int i = 0; i < kNumHeroes; ++i) {
    if (kHeroNames[i] == s) return static_cast<Hero>(i);
  }
  throw std::invalid_argument("invalid hero '" + std::string(s) + "'");
}

Hero hero_from_index(int index) {
  if (index < 0 || index >= kNumHeroes) throw std::invalid_argument("invalid hero id " + std::to_string(index));
  return static_cast<Hero>(index);
}

std::uint64_t pool_checksum(std::span<const CardSpec> cards) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& c : cards) {
    for (unsigned char ch : record_line(c) + "\n") {
      h ^= ch;
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

std::string checksum_hex(std::uint64_t checksum) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(checksum));
  return buf;
}

std::uint64_t parse_checksum_hex(std::string_view text) {
  text = trim(text);
  if (text.starts_with("0x")) text.remove_prefix(2);
  std::uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value, 16);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
    throw PoolError("malformed checksum '" + std::string(text) + "'");
  }
  return value;
}

const CardSpec& CardPool::card(CardId id) const {
  if (!contains(id)) throw std::out_of_range("card id " + std::to_string(id) + " not in pool");
  return cards_[static_cast<std::size_t>(id)];
}

std::optional<int> CardPool::cb_slot(Hero h, CardId id) const {
  auto vis = visible(h);
  auto it = std::lower_bound(vis.begin(), vis.end(), id);
  if (it == vis.end() || *it != id) return std::nullopt;
  return static_cast<int>(it - vis.begin());
}

void CardPool::validate() const {
  if (name_.empty()) throw PoolError("pool has no name");
  if (cards_.empty()) throw PoolError("pool has no cards");
  for (std::size_t i = 0; i < cards_.size(); ++i) {
    const auto& c = cards_[i];
    check(c.id == static_cast<CardId>(i), c, "ids must be dense and ordered");
    check(!c.name.empty() && c.name.find('|') == std::string::npos, c, "bad name");
    check(c.cost >= 0 && c.cost <= 10, c, "cost outside 0..10");
    check(c.max_copies == 1 || c.max_copies == 2, c, "max_copies must be 1 or 2");
    const auto& e = c.effect;
    switch (c.kind) {
      case CardKind::Minion:
        check(c.health >= 1 && c.attack >= 0, c, "minion needs health >= 1 and attack >= 0");
        break;
      case CardKind::Weapon:
        check(c.health >= 1 && c.attack >= 0, c, "weapon needs durability >= 1");
        check(!c.taunt && !c.charge, c, "keywords are minion-only");
        check(e.verb == EffectVerb::None, c, "weapons carry no effect");
        break;
      case CardKind::Spell:
        check(c.attack == 0 && c.health == 0, c, "spells have no attack/health");
        check(!c.taunt && !c.charge, c, "keywords are minion-only");
        check(e.verb != EffectVerb::None, c, "spell without effect");
        break;
    }
    switch (e.verb) {
      case EffectVerb::None:
        check(e.target == TargetClass::None && e.magnitude == 0, c, "verb none requires target none");
        break;
      case EffectVerb::Damage:
        check(e.magnitude >= 1 && e.magnitude <= 6, c, "damage magnitude outside 1..6");
        check(e.target == TargetClass::AnyCharacter || e.target == TargetClass::EnemyHero, c,
              "damage targets any_character or enemy_hero");
        break;
      case EffectVerb::Heal:
        check(e.magnitude >= 1 && e.magnitude <= 6, c, "heal magnitude outside 1..6");
        check(e.target == TargetClass::AnyCharacter || e.target == TargetClass::FriendlyMinion, c,
              "heal targets any_character or friendly_minion");
        break;
      case EffectVerb::Draw:
        check(e.magnitude >= 1 && e.magnitude <= 3, c, "draw magnitude outside 1..3");
        check(e.target == TargetClass::None, c, "draw has no target");
        break;
      case EffectVerb::Buff:
        check(e.magnitude >= 1 && e.magnitude <= 10, c, "buff magnitude outside 1..10");
        check(e.target == TargetClass::FriendlyMinion, c, "buff targets friendly_minion");
        break;
      case EffectVerb::AoeDamageEnemyMinions:
      case EffectVerb::GainArmor:
        check(e.magnitude >= 1 && e.magnitude <= 10, c, "magnitude outside 1..10");
        check(e.target == TargetClass::None, c, "untargeted verb");
        break;
    }
  }
  for (int h = 0; h < kNumHeroes; ++h) {
    if (visible_[h].size() > static_cast<std::size_t>(action::kCbSlots)) {
      throw PoolError("hero " + std::string(kHeroNames[h]) + " sees more than " +
                      std::to_string(action::kCbSlots) + " cards");
    }
    int total = 0;
    for (CardId id : visible_[h]) total += cards_[static_cast<std::size_t>(id)].max_copies;
    if (total < 30) throw PoolError("hero " + std::string(kHeroNames[h]) + " cannot fill a 30-card deck");
  }
}

CardPool CardPool::from_cards(std::string name, std::vector<CardSpec> cards) {
  CardPool pool;
  pool.name_ = std::move(name);
  pool.cards_ = std::move(cards);
  for (const auto& c : pool.cards_) {
    for (int h = 0; h < kNumHeroes; ++h) {
      if (c.visible_to(static_cast<Hero>(h))) pool.visible_[h].push_back(c.id);
    }
  }
  pool.validate();
  pool.checksum_ = pool_checksum(pool.cards_);
  return pool;
}

CardPool CardPool::parse(std::string_view text) {
  std::string name;
  std::optional<std::uint64_t> declared;
  std::vector<CardSpec> cards;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = trim(text.substr(start, end - start));
    start = end + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    try {
      if (line.starts_with("pool ")) {
        name = std::string(trim(line.substr(5)));
        continue;
      }
      if (line.starts_with("checksum ")) {
        declared = parse_checksum_hex(line.substr(9));
        continue;
      }
      auto f = split(line, '|');
      if (f.size() != 12) throw PoolError("expected 12 fields, got " + std::to_string(f.size()));
      CardSpec c;
      c.id = static_cast<CardId>(parse_int(f[0], "id"));
      c.name = std::string(f[1]);
      c.hero = enum_from<HeroRestriction>(f[2], kRestrictionNames, "hero restriction");
      c.kind = enum_from<CardKind>(f[3], kKindNames, "kind");
      c.cost = parse_int(f[4], "cost");
      c.attack = parse_int(f[5], "attack");
      c.health = parse_int(f[6], "health");
      if (f[7] != "-") {
        for (auto kw : split(f[7], ',')) {
          if (kw == "taunt") c.taunt = true;
          else if (kw == "charge") c.charge = true;
          else throw PoolError("unknown keyword '" + std::string(kw) + "'");
        }
      }
      c.effect.verb = enum_from<EffectVerb>(f[8], kVerbNames, "effect verb");
      c.effect.magnitude = parse_int(f[9], "magnitude");
      c.effect.target = enum_from<TargetClass>(f[10], kTargetNames, "target class");
      c.max_copies = parse_int(f[11], "copies");
      cards.push_back(std::move(c));
    } catch (const PoolError& e) {
      throw PoolError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (end == text.size()) break;
  }
  if (name.empty()) throw PoolError("missing 'pool <name>' header");
  if (!declared) throw PoolError("missing 'checksum <hex>' header");
  auto pool = from_cards(std::move(name), std::move(cards));
  if (pool.checksum() != *declared) {
    throw PoolError("checksum mismatch: header " + checksum_hex(*declared) + ", records " +
                    checksum_hex(pool.checksum()));
  }
  return pool;
}

CardPool CardPool::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PoolError("cannot open pool file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string CardPool::serialize() const {
  std::ostringstream os;
  os << "# MiniStone card pool\n";
  os << "pool " << name_ << "\n";
  os << "checksum " << checksum_hex(checksum_) << "\n";
  os << "# id|name|hero|kind|cost|attack|health|keywords|effect|magnitude|target|copies\n";
  for (const auto& c : cards_) os << record_line(c) << "\n";
  return os.str();
}

std::filesystem::path default_data_dir() {
  if (const char* env = std::getenv("MINISTONE_DATA_DIR"); env && *env) return env;
  return MINISTONE_DEFAULT_DATA_DIR;
}

std::filesystem::path default_pool_path() { return default_data_dir() / "ministone-v1.pool"; }

}  // namespace ministone
