#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ministone {

using CardId = std::int16_t;

// The Coin is not a pool card: it is handed to the second player at battle
// start and never enters the deck/graveyard bookkeeping.
inline constexpr CardId kCoinCard = 0x7fff;

enum class Hero : std::uint8_t { Mage = 0, Hunter = 1, Warrior = 2 };
inline constexpr int kNumHeroes = 3;
inline constexpr Hero kAllHeroes[kNumHeroes] = {Hero::Mage, Hero::Hunter, Hero::Warrior};

enum class HeroRestriction : std::uint8_t { Common, Mage, Hunter, Warrior };
enum class CardKind : std::uint8_t { Minion, Spell, Weapon };
enum class EffectVerb : std::uint8_t { None, Damage, AoeDamageEnemyMinions, Heal, Draw, Buff, GainArmor };
enum class TargetClass : std::uint8_t { None, AnyCharacter, FriendlyMinion, EnemyHero };

std::string_view to_string(Hero h);
std::string_view to_string(HeroRestriction h);
std::string_view to_string(CardKind k);
std::string_view to_string(EffectVerb v);
std::string_view to_string(TargetClass t);

// Throws std::invalid_argument on unknown names.
Hero hero_from_string(std::string_view s);
Hero hero_from_index(int index);

class PoolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EffectSpec {
  EffectVerb verb = EffectVerb::None;
  int magnitude = 0;
  TargetClass target = TargetClass::None;

  bool needs_target() const {
    return target == TargetClass::AnyCharacter || target == TargetClass::FriendlyMinion;
  }
  friend bool operator==(const EffectSpec&, const EffectSpec&) = default;
};

struct CardSpec {
  CardId id = 0;
  std::string name;
  HeroRestriction hero = HeroRestriction::Common;
  CardKind kind = CardKind::Minion;
  int cost = 0;
  int attack = 0;
  int health = 0;  // durability for weapons, 0 for spells
  bool taunt = false;
  bool charge = false;
  EffectSpec effect;
  int max_copies = 2;

  bool visible_to(Hero h) const {
    return hero == HeroRestriction::Common || static_cast<int>(hero) == static_cast<int>(h) + 1;
  }
  friend bool operator==(const CardSpec&, const CardSpec&) = default;
};

// Immutable, validated card pool. Card ids are dense: cards()[i].id == i.
class CardPool {
 public:
  static CardPool parse(std::string_view text);
  static CardPool load(const std::filesystem::path& path);
  // Builds and validates a pool from records; the checksum is computed.
  static CardPool from_cards(std::string name, std::vector<CardSpec> cards);

  const std::string& name() const { return name_; }
  std::uint64_t checksum() const { return checksum_; }
  std::size_t size() const { return cards_.size(); }
  std::span<const CardSpec> cards() const { return cards_; }
  const CardSpec& card(CardId id) const;
  bool contains(CardId id) const { return id >= 0 && static_cast<std::size_t>(id) < cards_.size(); }

  // Pool cards a hero may put in a deck, in id order. Index i here is CB
  // slot i of the action table.
  std::span<const CardId> visible(Hero h) const { return visible_[static_cast<int>(h)]; }
  std::optional<int> cb_slot(Hero h, CardId id) const;

  // Canonical text form; parse(serialize()) reproduces the pool exactly.
  std::string serialize() const;

 private:
  void validate() const;

  std::string name_;
  std::vector<CardSpec> cards_;
  std::vector<CardId> visible_[kNumHeroes];
  std::uint64_t checksum_ = 0;
};

// FNV-1a over the canonical card records (header and comments excluded).
std::uint64_t pool_checksum(std::span<const CardSpec> cards);

std::string checksum_hex(std::uint64_t checksum);
std::uint64_t parse_checksum_hex(std::string_view text);

inline constexpr std::string_view kPoolV1Name = "ministone-v1";
// Checksum of the shipped "ministone-v1" data file. Changing any card record
// changes this value and invalidates every checkpoint built on the pool.
inline constexpr std::uint64_t kPoolV1Checksum = 0x85a7189c9c1aa332ull;

// Location of the shipped data directory (compile-time default, overridable
// by the MINISTONE_DATA_DIR environment variable).
std::filesystem::path default_data_dir();
std::filesystem::path default_pool_path();

}  // namespace ministone
