#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ministone/learner/learner.hpp"
#include "ministone/osfp/osfp.hpp"
#include "ministone/pipeline/buffer.hpp"

namespace ministone {

struct TrainConfig {
  OsfpConfig osfp{};
  LearnerConfig learner{};
  BufferConfig buffer{};
  int lps = 2;                 // total LPs the run should reach
  int actors = 0;              // 0 runs actor and learner inline on one thread
  bool governor = false;
  int snapshot_period = 200;   // segments between actor snapshot refreshes
  int hidden = 256;
  std::uint64_t seed = 1;
  bool random_cb = true;
  // Test hook: when set, replaces the gate predicate (winrates, count) -> add.
  std::function<bool(const std::vector<double>&, int)> gate_override;

  void validate() const;
  int batch_segments() const { return learner.batch_steps / learner.unroll; }
};

void to_json(nlohmann::json& j, const TrainConfig& c);
// gate_override is not serialized.
void from_json(const nlohmann::json& j, TrainConfig& c);

class TrainingIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct InstanceStats {
  int tag = -1;
  std::uint64_t updates = 0;
  std::uint64_t segments_consumed = 0;
  std::uint64_t skipped_updates = 0;
  // Heroes of every segment this instance was updated on, for auditing isolation.
  std::array<std::uint64_t, kNumHeroes> hero_segments{};
  double last_loss = 0;
};

struct LpSummary {
  int lp = 0;
  std::int64_t steps = 0;        // learner-side environment steps produced
  std::int64_t matches = 0;
  std::int64_t historical_matches = 0;
  GateDecision gate;
};

struct TrainResult {
  OsfpState state;
  std::vector<LpSummary> lps;  // LPs run by this call
  std::vector<InstanceStats> instances;
  std::filesystem::path run_dir;
  bool resumed = false;
};

// Per-LP progress callback (after each gate).
using LpCallback = std::function<void(const LpSummary&)>;

// Runs OSFP training into run_dir. An existing run directory is resumed:
// the stored config, OsfpState, current parameters and optimizer state are
// loaded and training continues at the next LP until cfg.lps is reached.
// Files:
//   config.json, osfp_state.json, events.jsonl, payoff/lp_<k>.json,
//   pool/<fnv>.ckpt (content addressed, immutable),
//   current/instance_<tag>.ckpt and .adam
TrainResult run_training(const TrainConfig& cfg, std::shared_ptr<const CardPool> pool,
                         const std::filesystem::path& run_dir, const LpCallback& on_lp = {});

// Current parameters of every instance of a run (index = tag, or 0).
std::vector<PolicyParams> load_run_params(const std::filesystem::path& run_dir, const ObsSchema& schema,
                                          std::uint64_t pool_checksum);

// One training match between fixed parameter sets, cut into segments for the
// seats listed in `train_seat`. Exposed for tests and benchmarks.
// Every array is indexed by engine seat.
struct EpisodeSetup {
  std::array<Hero, 2> heroes{Hero::Mage, Hero::Mage};
  std::array<int, 2> random_cb{0, 0};
  std::array<int, 2> cheat_n{0, 0};
  std::uint64_t seed = 0;
  std::array<const PolicyParams*, 2> params{nullptr, nullptr};
  std::array<bool, 2> train_seat{true, true};
  std::array<int, 2> tags{-1, -1};
  bool random_cb_enabled = true;
};

struct Episode {
  std::vector<TrajectorySegment> segments;
  Outcome outcome = Outcome::Draw;
  std::int64_t trained_steps = 0;
  GameState final_state;
};

Episode play_training_episode(const Encoder& encoder, const EpisodeSetup& setup, int unroll,
                              std::uint64_t& next_segment_id);

}  // namespace ministone
