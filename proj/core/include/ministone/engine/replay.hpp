#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ministone/engine/engine.hpp"

namespace ministone {

// Everything needed to re-simulate a match bit-exactly: the pool it was
// played on, both heroes, the seed, any preset decks and the action list.
// The cheat prefix lengths are recorded so censored views can be rebuilt.
struct Replay {
  std::uint64_t pool_checksum = 0;
  std::array<Hero, 2> heroes{Hero::Mage, Hero::Mage};
  std::uint64_t seed = 0;
  std::array<std::optional<std::vector<CardId>>, 2> preset_decks;
  std::array<int, 2> cheat_n{0, 0};
  std::vector<ActionId> actions;

  std::string to_text() const;
  static Replay parse(std::string_view text);
  static Replay load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  // Re-simulates the match. Throws on pool mismatch or an illegal action.
  // When trace is non-null it receives every intermediate state (initial
  // state first).
  GameState simulate(const Engine& engine, std::vector<GameState>* trace = nullptr) const;

  friend bool operator==(const Replay&, const Replay&) = default;
};

}  // namespace ministone
