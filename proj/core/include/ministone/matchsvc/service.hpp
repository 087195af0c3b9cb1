#pragma once

#include <array>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ministone/engine/replay.hpp"
#include "ministone/evalharness/agents.hpp"

namespace ministone::matchsvc {

// Errors carry the HTTP status the server maps them to.
class ServiceError : public std::runtime_error {
 public:
  ServiceError(int status, const std::string& what) : std::runtime_error(what), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

struct NotFound : ServiceError {
  explicit NotFound(const std::string& w) : ServiceError(404, w) {}
};
struct BadRequest : ServiceError {
  explicit BadRequest(const std::string& w) : ServiceError(400, w) {}
};
struct Conflict : ServiceError {
  explicit Conflict(const std::string& w) : ServiceError(409, w) {}
};

// Human action not in the legal set; the state is untouched.
class RejectedAction : public ServiceError {
 public:
  RejectedAction(const std::string& w, std::vector<ActionId> legal) : ServiceError(409, w), legal_(std::move(legal)) {}
  const std::vector<ActionId>& legal() const { return legal_; }

 private:
  std::vector<ActionId> legal_;
};

struct SavedDeck {
  std::string name;
  Hero hero = Hero::Mage;
  std::vector<CardId> cards;
  std::string owner;
  std::int64_t created_ms = 0;

  friend bool operator==(const SavedDeck&, const SavedDeck&) = default;
};

void to_json(nlohmann::json& j, const SavedDeck& d);
void from_json(const nlohmann::json& j, SavedDeck& d);

// Decks persisted per owner as <root>/<owner>.json. An empty root keeps
// everything in memory.
class DeckStore {
 public:
  DeckStore(const Engine& engine, std::filesystem::path root);

  // Validates and stores; Conflict on a duplicate (owner, name) unless replace.
  SavedDeck save(SavedDeck deck, bool replace = false);
  std::vector<SavedDeck> list(const std::string& owner) const;
  SavedDeck get(const std::string& owner, const std::string& name) const;
  void remove(const std::string& owner, const std::string& name);

 private:
  std::vector<SavedDeck>& owner_decks(const std::string& owner) const;
  void persist(const std::string& owner) const;

  const Engine& engine_;
  std::filesystem::path root_;
  mutable std::mutex mu_;
  mutable std::map<std::string, std::vector<SavedDeck>> decks_;
};

// A servable opponent: one agent per hero (hero-isolated runs give three
// different networks, plain checkpoints the same one three times).
struct AgentModel {
  std::string name;
  std::array<AgentPtr, kNumHeroes> by_hero;
  std::uint64_t pool_checksum = 0;
};

// Greedy argmax agent(s) from a checkpoint file or a training run directory.
// Throws BadRequest on a pool mismatch or unreadable checkpoint.
AgentModel load_agent_model(const std::string& name, const std::filesystem::path& path, const Encoder& encoder);

struct SessionOptions {
  std::string agent;                  // registered agent name
  Hero human_hero = Hero::Mage;
  std::optional<Hero> agent_hero;     // nullopt = sampled uniformly
  std::optional<int> human_seat;      // nullopt = coin flip
  std::optional<std::vector<CardId>> human_deck;
  std::optional<std::uint64_t> seed;  // nullopt = fresh entropy
  int human_cheat_n = 0;              // agent picks revealed to the human
  int agent_cheat_n = 0;              // human picks the agent may observe
};

// One agent step as shown to the human. Deck-building picks of the agent
// are not named unless they fall inside the human's cheat prefix.
struct TranscriptEntry {
  std::optional<ActionId> type;    // first operation, or the pick
  std::optional<ActionId> target;  // second operation when the pair has one
  std::string text;
};

struct LoggedAction {
  int seat = 0;
  ActionId action;
  std::int16_t turn = 0;
};

struct Session {
  std::string id;
  std::uint64_t pool_checksum = 0;
  int human_seat = 0;
  std::string agent;
  std::array<Hero, 2> heroes{};
  std::uint64_t seed = 0;
  std::array<std::optional<std::vector<CardId>>, 2> preset_decks;
  std::array<int, 2> cheat_n{0, 0};
  GameState state;
  std::vector<LoggedAction> log;
  std::vector<TranscriptEntry> last_agent_turn;
  std::int64_t created_ms = 0;
  std::int64_t updated_ms = 0;
  std::uint64_t version = 0;  // bumped on every state change

  int agent_seat() const { return 1 - human_seat; }
  Replay replay() const;
};

struct ServiceConfig {
  std::filesystem::path deck_root;  // empty = in-memory decks
  int agent_step_cap = 400;         // agent steps per reply before a forced end of turn
  std::size_t max_sessions = 4096;
};

// Session manager. Sessions are independent; every operation on a session
// holds that session's lock, so calls on one session are serialized while
// different sessions proceed concurrently. Agent parameters are shared
// read-only.
class Service {
 public:
  Service(std::shared_ptr<const Encoder> encoder, ServiceConfig cfg = {});
  ~Service();

  const Encoder& encoder() const { return *encoder_; }
  DeckStore& decks() { return decks_; }

  void register_agent(AgentModel model);
  std::vector<std::string> agent_names() const;

  // Returns the session id; the agent has already moved if it was first.
  std::string create_session(const SessionOptions& opt);
  nlohmann::json view(const std::string& id) const;
  // Applies the human action and every following agent step up to the
  // human's next decision or the end of the match.
  nlohmann::json submit_action(const std::string& id, ActionId a);
  // Blocks until the session version exceeds `since` or the timeout passes;
  // returns the current view either way.
  nlohmann::json poll(const std::string& id, std::uint64_t since, std::chrono::milliseconds timeout) const;
  // Only finished sessions export: a live replay would reveal hidden zones.
  Replay export_replay(const std::string& id) const;
  // Snapshot for tests and tooling (full, uncensored).
  Session snapshot(const std::string& id) const;
  void close(const std::string& id);
  std::size_t session_count() const;

  nlohmann::json pool_json(std::optional<Hero> hero) const;
  nlohmann::json schema_json() const;

 private:
  struct Slot;
  std::shared_ptr<Slot> find(const std::string& id) const;
  void run_agent(Slot& slot) const;
  nlohmann::json view_locked(const Session& s) const;
  TranscriptEntry describe_agent_step(const Session& s, const GameState& before, ActionId a) const;

  std::shared_ptr<const Encoder> encoder_;
  ServiceConfig cfg_;
  DeckStore decks_;
  mutable std::shared_mutex mu_;
  std::map<std::string, AgentModel> agents_;
  std::map<std::string, std::shared_ptr<Slot>> sessions_;
};

// Censored view for the human seat. Built from a field whitelist: the
// opponent contributes public hero/board fields, zone sizes and the first
// cheat_n picks only.
nlohmann::json render_view(const Engine& engine, const Session& s);

// Human-facing labels, from the perspective of `viewer`.
std::string card_name(const CardPool& pool, CardId id);
std::string action_label(const Engine& engine, const GameState& s, int viewer, ActionId a);

std::string new_session_id();

}  // namespace ministone::matchsvc
