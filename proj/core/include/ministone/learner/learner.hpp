#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "ministone/learner/trajectory.hpp"
#include "ministone/learner/vtrace.hpp"
#include "ministone/policy/network.hpp"

namespace ministone {

enum class PolicyLoss { Ppo, VTracePg };

// Pessimistic clipped surrogate min(A r, A clip(r, 1 - eps, 1 + eps)).
template <class T>
T ppo_term(T advantage, T ratio, T eps) {
  const T clipped = std::min(std::max(ratio, T(1) - eps), T(1) + eps);
  return std::min(advantage * ratio, advantage * clipped);
}

struct LearnerConfig {
  VTraceConfig vtrace{};
  PolicyLoss policy_loss = PolicyLoss::Ppo;
  double epsilon = 0.2;
  double w_policy = 1.0;  // PPO term, or the V-trace policy gradient when selected
  double w_upgo = 1.0;
  double w_value = 1.0;
  double w_entropy = 0.01;
  double learning_rate = 7e-5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_steps = 512;
  int unroll = kDefaultUnroll;
  int sample_reuse = 2;
  // Reject segments already used sample_reuse times.
  bool enforce_reuse = true;
  // Use the stored actor-time values instead of re-evaluating V with the
  // current parameters.
  bool behavior_values = false;

  void validate() const;
};

// Flattened view of a minibatch: which forward column holds each step and
// each bootstrap observation.
struct BatchLayout {
  std::vector<const TrajectorySegment*> segments;
  std::vector<const ObservationBundle*> columns;
  std::vector<std::vector<int>> step_column;  // [segment][t]
  std::vector<int> bootstrap_column;          // -1 when the segment ends the match
  int valid_steps = 0;

  explicit BatchLayout(std::span<const TrajectorySegment* const> segs);
};

// Stop-gradient quantities of one minibatch, computed once from the current
// parameters' forward pass.
template <class T>
struct LearnerTargets {
  std::vector<std::vector<T>> vtrace;      // v_t
  std::vector<std::vector<T>> advantages;  // r_t + gamma v_{t+1} - V_t
  std::vector<std::vector<T>> rho_clipped;
  std::vector<std::vector<T>> upgo;        // G_t
  std::vector<std::vector<T>> values;      // V_t used for the targets
  std::vector<std::vector<T>> ratio;       // pi / mu at target time
};

template <class T>
LearnerTargets<T> compute_targets(const BatchLayout& layout, const typename PolicyNet<T>::Cache& cache,
                                  const LearnerConfig& cfg);

struct LossReport {
  double total = 0;
  double policy = 0;   // PPO surrogate or V-trace PG loss
  double upgo = 0;
  double value = 0;    // mean (V_t - v_t)^2
  double entropy = 0;  // mean entropy of the masked policy (reported positive)
  double mean_ratio = 0;
  double max_ratio = 0;
  double clip_fraction = 0;
  int steps = 0;
};

// Evaluates the weighted loss for the forward pass in `cache` against fixed
// targets and, when dlogits/dvalues are non-null, fills the cotangents
// needed by PolicyNet::backward. All terms are means over valid steps.
template <class T>
LossReport evaluate_loss(const BatchLayout& layout, const typename PolicyNet<T>::Cache& cache,
                         const LearnerTargets<T>& targets, const LearnerConfig& cfg,
                         typename PolicyNet<T>::Mat* dlogits, typename PolicyNet<T>::Vec* dvalues);

struct UpdateMetrics {
  std::uint64_t step = 0;
  LossReport loss;
  double grad_norm = 0;
  bool applied = false;
  std::string error;
};

class SampleReuseViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Owns one set of training parameters and its Adam state.
class Learner {
 public:
  Learner(PolicyParams params, LearnerConfig cfg, int tag = -1);

  const PolicyParams& params() const { return params_; }
  PolicyParams& mutable_params() { return params_; }
  const LearnerConfig& config() const { return cfg_; }
  int tag() const { return tag_; }
  std::uint64_t updates() const { return params_.meta.step; }

  // One optimizer step on the minibatch. Every segment may take part in at
  // most sample_reuse updates; a further use throws SampleReuseViolation.
  // A non-finite loss or gradient skips the step and reports the error.
  UpdateMetrics update(std::span<const TrajectorySegment* const> batch);

  // Serialized optimizer state (moments and step) for run resumption.
  std::string optimizer_state() const;
  void restore_optimizer_state(const std::string& bytes);

 private:
  PolicyParams params_;
  LearnerConfig cfg_;
  int tag_;
  Eigen::VectorXf m_, v_;
  std::uint64_t adam_t_ = 0;
  std::unordered_map<std::uint64_t, int> uses_;
  PolicyNet<float>::Cache cache_;
};

std::string format_metrics(const UpdateMetrics& m);

}  // namespace ministone
