#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ministone/engine/engine.hpp"

namespace ministone {

inline constexpr int kEmbeddingDim = 32;
inline constexpr int kMaxCheat = action::kDeckSize;

// Decision types in the order of the observation one-hot.
enum class DecisionType : std::uint8_t { Construct, Select, Battlecry, Spell, Attack, HeroPower, EndTurn };
inline constexpr int kNumDecisionTypes = 7;
std::string_view to_string(DecisionType d);

DecisionType decision_type(const Engine& engine, const GameState& state);

struct CheatAssignment {
  int n_target = 0;    // opponent deck prefix visible to the learner-side player
  int n_opponent = 0;  // prefix visible to the other seat; never above n_target
};

// Weighted sum of embedding rows written into one embedding slot of a branch
// input. table 0 = card embeddings, 1 = hero embeddings.
struct BagEntry {
  std::uint16_t slot = 0;
  std::uint8_t table = 0;
  std::int16_t row = 0;
  float weight = 0.f;

  friend bool operator==(const BagEntry&, const BagEntry&) = default;
};

enum class EmbeddingTable : std::uint8_t { Card = 0, Hero = 1 };

struct FieldSpec {
  std::string name;
  int offset = 0;
  int width = 0;
};

// Fixed layout of both branch inputs for one pool. Dense fields come first;
// each embedding slot contributes kEmbeddingDim features after them.
class ObsSchema {
 public:
  explicit ObsSchema(const CardPool& pool);

  int pool_size() const { return pool_size_; }
  int cb_dense_width() const { return cb_dense_; }
  int bt_dense_width() const { return bt_dense_; }
  int cb_slots() const { return static_cast<int>(cb_slot_names_.size()); }
  int bt_slots() const { return static_cast<int>(bt_slot_names_.size()); }
  int cb_input_width() const { return cb_dense_ + cb_slots() * kEmbeddingDim; }
  int bt_input_width() const { return bt_dense_ + bt_slots() * kEmbeddingDim; }

  const std::vector<FieldSpec>& cb_fields() const { return cb_fields_; }
  const std::vector<FieldSpec>& bt_fields() const { return bt_fields_; }
  const FieldSpec& cb_field(std::string_view name) const;
  const FieldSpec& bt_field(std::string_view name) const;
  int cb_slot(std::string_view name) const;
  int bt_slot(std::string_view name) const;
  const std::vector<std::string>& cb_slot_names() const { return cb_slot_names_; }
  const std::vector<std::string>& bt_slot_names() const { return bt_slot_names_; }

  // Identifies the layout; stored in checkpoints.
  std::uint64_t fingerprint() const;
  // JSON document listing (field, offset, width) for both blocks.
  std::string to_json() const;

 private:
  int pool_size_;
  int cb_dense_ = 0;
  int bt_dense_ = 0;
  std::vector<FieldSpec> cb_fields_;
  std::vector<FieldSpec> bt_fields_;
  std::vector<std::string> cb_slot_names_;
  std::vector<std::string> bt_slot_names_;
};

struct ObservationBundle {
  int delta = 1;  // 1 in deck building, 0 in battle
  Hero hero = Hero::Mage;
  DecisionType decision = DecisionType::Construct;
  std::vector<float> cb;  // cb_dense_width
  std::vector<float> bt;  // bt_dense_width, all zero while delta == 1
  std::vector<BagEntry> cb_bags;
  std::vector<BagEntry> bt_bags;
  // Card id behind each CB pick slot of this hero's table region.
  std::array<CardId, action::kCbSlots> cb_candidates{};
  ActionMask mask;

  friend bool operator==(const ObservationBundle&, const ObservationBundle&) = default;
};

// Encodes the censored view of `player`. The opponent's hand contents never
// enter the encoding; only the first cheat_n opponent picks (in pick order)
// are revealed. Throws std::invalid_argument on a terminal state or a bad
// cheat_n.
class Encoder {
 public:
  explicit Encoder(Engine engine);

  const ObsSchema& schema() const { return schema_; }
  const Engine& engine() const { return engine_; }

  ObservationBundle encode(const GameState& state, int player, int cheat_n) const;
  // Legal-action mask from `player`'s perspective; all zeros when it is not
  // that player's decision or the state is terminal.
  ActionMask action_mask(const GameState& state, int player) const;

 private:
  void encode_cb(const GameState& s, int player, int cheat_n, ObservationBundle& o) const;
  void encode_bt(const GameState& s, int player, int cheat_n, ObservationBundle& o) const;

  Engine engine_;
  ObsSchema schema_;
  // Indexed by field/slot name lookups done once at construction.
  struct Offsets;
  std::shared_ptr<const Offsets> off_;
};

}  // namespace ministone
