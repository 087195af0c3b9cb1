#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ministone/engine/card_pool.hpp"
#include "ministone/obsact/observation.hpp"

namespace ministone {

struct OsfpConfig {
  double self_play_prob = 0.6;    // p
  double gate_threshold = 0.55;   // xi
  int max_lp_count = 6;           // c
  double sampler_lambda = 0.1;    // f(i) proportional to 1 - winrate_i + lambda
  std::int64_t samples_per_lp = 200000;
  bool hero_isolation = false;
  bool cheat = false;

  void validate() const;
};

void to_json(nlohmann::json& j, const OsfpConfig& c);
void from_json(const nlohmann::json& j, OsfpConfig& c);

// One historical model: a checkpoint reference per learner instance (one,
// or three under hero isolation).
struct PoolEntry {
  std::vector<std::string> checkpoints;
  int lp = 0;
  friend bool operator==(const PoolEntry&, const PoolEntry&) = default;
};

struct OsfpState {
  std::vector<PoolEntry> H;
  std::vector<double> G;          // payoff sums per historical opponent
  std::vector<std::int64_t> C;    // match counts per historical opponent
  int count = 0;                  // LPs since the last add
  int lp_index = 0;

  friend bool operator==(const OsfpState&, const OsfpState&) = default;
};

void to_json(nlohmann::json& j, const OsfpState& s);
void from_json(const nlohmann::json& j, OsfpState& s);

// (G/C + 1) / 2, so draws count as half wins; 0.5 when C = 0.
double gate_winrate(double g, std::int64_t c);

// Opponent-sampler weights 1 - w_i + lambda with w_i the Laplace-smoothed
// winrate (wins + 1) / (C + 2), wins = (G + C) / 2. Normalized.
std::vector<double> opponent_weights(const std::vector<double>& G, const std::vector<std::int64_t>& C,
                                     double lambda);

// Same weights from exact winrates (no smoothing).
std::vector<double> sampler_weights(const std::vector<double>& winrates, double lambda);

// The gate predicate on its own: every winrate > xi, or count > c.
bool gate_adds(const std::vector<double>& winrates, int count, const OsfpConfig& cfg);

struct OpponentPick {
  bool self_play = true;
  int index = -1;
};

enum class GateResult { Added, NotAdded };

struct GateDecision {
  GateResult result = GateResult::NotAdded;
  bool forced = false;
  std::vector<double> winrates;
  int count_before = 0;
};

// Owns OsfpState transitions. Result recording is thread-safe; sampling
// reads the payoff statistics under the same lock.
class OsfpController {
 public:
  explicit OsfpController(OsfpConfig cfg, OsfpState state = {});

  OpponentPick sample_opponent(std::mt19937_64& rng) const;
  // g in {+1, -1, 0} from the learner's perspective. Throws std::out_of_range.
  void record_result(int index, int g);

  // Pool gate: add when every winrate exceeds xi (strictly) or count > c.
  // On add `entry` is appended and count resets; otherwise count increments.
  // G and C restart at zero for the next LP either way.
  GateDecision end_of_lp_gate(const PoolEntry& entry);

  OsfpState state() const;
  const OsfpConfig& config() const { return cfg_; }

  // Replaces the gate predicate (winrates, count) -> add; tests only.
  using GatePredicate = std::function<bool(const std::vector<double>&, int)>;
  void set_gate_predicate(GatePredicate p) { predicate_ = std::move(p); }

 private:
  OsfpConfig cfg_;
  GatePredicate predicate_;
  mutable std::mutex mu_;
  OsfpState st_;
};

// Per-match schedule drawn at match start.
struct MatchSetup {
  std::array<Hero, 2> heroes{Hero::Mage, Hero::Mage};
  std::array<int, 2> random_cb{0, 0};  // leading deck-building picks made uniformly at random
  CheatAssignment cheat{};             // n_target for the learner side, n_opponent for the other
};

// Heroes uniform; random-CB n in {0, 1, 2, 4} with probabilities
// (0.5, 0.25, 0.125, 0.125) per player; cheat n1, n2 ~ Uniform{0..30} with
// n2 := min(n1, n2), or zeros without cheat.
MatchSetup assign_match_setup(bool cheat, std::mt19937_64& rng);
// Evaluation-time cheat budget for the cheating side only.
int sample_eval_cheat(std::mt19937_64& rng);

// Symmetric zero-sum matrix game harness for the meta-controller.
namespace matrix {

using Mat = std::vector<std::vector<double>>;
using Mix = std::vector<double>;

Mat rock_paper_scissors();
// x^T A y
double payoff(const Mat& A, const Mix& x, const Mix& y);
// Logit response softmax(A y / tau).
Mix smooth_best_response(const Mat& A, const Mix& y, double tau);
// max_a (A y)_a, the gain of the best deviation against y (game value 0).
double exploitability(const Mat& A, const Mix& y);

enum class LearnerKind {
  // The LP's learner is the smooth best response to the LP opponent
  // distribution, which contains the learner itself through self-play:
  // solved as a fixed point.
  SelfConsistent,
  // Smooth best response to the distribution with the self-play component
  // frozen at the learner that started the LP.
  SnapshotResponse,
};

struct HarnessConfig {
  OsfpConfig osfp{};
  double tau = 0.1;
  int lps = 20;
  Mix initial{1.0, 0.0, 0.0};
  LearnerKind learner = LearnerKind::SelfConsistent;
};

struct HarnessTrace {
  std::vector<double> exploitability;  // of the uniform mixture over H after each LP
  std::vector<GateDecision> gates;
  std::vector<Mix> pool;
  Mix empirical;
};

HarnessTrace run_osfp(const Mat& A, const HarnessConfig& cfg);

}  // namespace matrix

}  // namespace ministone
