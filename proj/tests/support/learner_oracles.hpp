#pragma once

// Independent reference computations for the learner: explicit-sum V-trace,
// a top-down UPGO recursion and finite-difference loss gradients.

#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>
#include <random>
#include <vector>

#include "fixtures.hpp"
#include "ministone/learner/learner.hpp"

namespace ministone::testing {

// v_s = V_s + sum_{t>=s} (prod_{i=s}^{t-1} d_i c_i) rho_t delta_t, written as an
// explicit double loop with no shared state between s.
inline std::vector<double> vtrace_direct_sum(const std::vector<double>& r, const std::vector<double>& V, double boot,
                                             const std::vector<double>& rho, const std::vector<double>& disc,
                                             double rho_low, double rho_high, double c_low, double c_high) {
  const std::size_t k = r.size();
  auto Vat = [&](std::size_t i) { return i < k ? V[i] : boot; };
  auto clip = [](double x, double lo, double hi) { return x < lo ? lo : (x > hi ? hi : x); };
  std::vector<double> v(k);
  for (std::size_t s = 0; s < k; ++s) {
    double acc = V[s];
    for (std::size_t t = s; t < k; ++t) {
      double w = 1;
      for (std::size_t i = s; i < t; ++i) w *= disc[i] * clip(rho[i], c_low, c_high);
      const double delta = r[t] + disc[t] * Vat(t + 1) - V[t];
      acc += w * clip(rho[t], rho_low, rho_high) * delta;
    }
    v[s] = acc;
  }
  return v;
}

// G_t straight from its definition, evaluated top-down.
inline double upgo_reference(const std::vector<double>& r, const std::vector<double>& V, double boot,
                             const std::vector<double>& disc, std::size_t t) {
  const std::size_t k = r.size();
  if (t + 1 >= k) return r[t] + disc[t] * boot;
  const double V1 = V[t + 1];
  const double V2 = t + 2 < k ? V[t + 2] : boot;
  const bool follow = r[t + 1] + disc[t + 1] * V2 >= V1;
  return r[t] + disc[t] * (follow ? upgo_reference(r, V, boot, disc, t + 1) : V1);
}

enum class LossTerm { Ppo, VTracePg, Upgo, Value, Entropy };

inline const char* to_string(LossTerm t) {
  switch (t) {
    case LossTerm::Ppo: return "ppo";
    case LossTerm::VTracePg: return "vtrace_pg";
    case LossTerm::Upgo: return "upgo";
    case LossTerm::Value: return "value";
    case LossTerm::Entropy: return "entropy";
  }
  return "?";
}

// Readable names for parameterized tests.
inline void PrintTo(LossTerm t, std::ostream* os) { *os << to_string(t); }

inline LearnerConfig single_term_config(LossTerm t) {
  LearnerConfig cfg;
  cfg.w_policy = cfg.w_upgo = cfg.w_value = cfg.w_entropy = 0;
  switch (t) {
    case LossTerm::Ppo: cfg.w_policy = 1; break;
    case LossTerm::VTracePg:
      cfg.w_policy = 1;
      cfg.policy_loss = PolicyLoss::VTracePg;
      break;
    case LossTerm::Upgo: cfg.w_upgo = 1; break;
    case LossTerm::Value: cfg.w_value = 1; break;
    case LossTerm::Entropy: cfg.w_entropy = 1; break;
  }
  return cfg;
}

struct GradCheck {
  double max_rel_error = 0;
  int coords = 0;
  int steps = 0;
};

// A small random minibatch and a narrow double-precision net. Behaviour
// probabilities are re-drawn so ratios sit away from the PPO clip kinks.
struct GradFixture {
  std::vector<TrajectorySegment> segs;
  std::vector<const TrajectorySegment*> batch;
  PolicyParams64 params;
};

inline GradFixture make_grad_fixture(std::uint64_t seed, int hidden = 8) {
  static const ObsSchema schema(*shipped_pool());
  GradFixture f;
  std::mt19937_64 rng(seed);
  auto all = random_segments(1, seed, 5);
  std::shuffle(all.begin(), all.end(), rng);
  // Keep one terminal segment and a few cut ones.
  std::stable_partition(all.begin(), all.end(), [](const auto& s) { return s.terminal(); });
  all.resize(std::min<std::size_t>(all.size(), 4));
  f.segs = std::move(all);
  for (auto& s : f.segs) f.batch.push_back(&s);

  f.params = init_params<double>(schema, seed, hidden);
  std::uniform_real_distribution<double> u(-0.4, 0.4);
  for (auto* t : {&f.params.layout.cb_out_w, &f.params.layout.cb_query, &f.params.layout.bt_out_w,
                  &f.params.layout.cb_b1, &f.params.layout.bt_b1, &f.params.layout.value_w}) {
    double* x = f.params.data(*t);
    for (std::size_t i = 0; i < t->size(); ++i) x[i] = u(rng);
  }

  BatchLayout layout(f.batch);
  PolicyNet<double>::Cache c;
  PolicyNet<double>::forward(f.params, layout.columns, c);
  std::uniform_real_distribution<double> band(0, 1);
  for (std::size_t i = 0; i < f.segs.size(); ++i) {
    for (std::size_t t = 0; t < f.segs[i].steps.size(); ++t) {
      auto& st = f.segs[i].steps[t];
      const double pi = c.probs(st.action.index(), layout.step_column[i][t]);
      const double x = band(rng);
      const double ratio = x < 0.3 ? 0.5 + x : (x < 0.7 ? 0.85 + 0.75 * (x - 0.3) : 1.25 + (x - 0.7));
      st.behavior_prob = static_cast<float>(pi / ratio);
      st.reward = st.done ? st.reward : static_cast<float>(u(rng) * 0.25);
    }
  }
  return f;
}

// Central differences of one loss term against the analytic gradient, with
// the stop-gradient targets computed once at the base parameters.
inline GradCheck loss_gradcheck(LossTerm term, std::uint64_t seed, int per_tensor = 12) {
  auto f = make_grad_fixture(seed);
  const LearnerConfig cfg = single_term_config(term);
  BatchLayout layout(f.batch);
  PolicyNet<double>::Cache c;
  PolicyNet<double>::forward(f.params, layout.columns, c);
  const auto targets = compute_targets<double>(layout, c, cfg);
  PolicyNet<double>::Mat dz;
  PolicyNet<double>::Vec dv;
  evaluate_loss<double>(layout, c, targets, cfg, &dz, &dv);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(f.params.w.size());
  PolicyNet<double>::backward(f.params, c, dz, dv, g);

  auto loss = [&](const PolicyParams64& q) {
    PolicyNet<double>::Cache cq;
    PolicyNet<double>::forward(q, layout.columns, cq);
    return evaluate_loss<double>(layout, cq, targets, cfg, nullptr, nullptr).total;
  };

  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<std::size_t> coords;
  for (const auto& t : f.params.layout.tensors()) {
    for (int k = 0; k < per_tensor; ++k) coords.push_back(t.offset + rng() % t.size());
  }
  // Embedding rows actually touched by the batch.
  const auto& emb = f.params.layout.card_emb;
  std::vector<std::size_t> touched;
  for (std::size_t i = 0; i < emb.size(); ++i) {
    if (g(static_cast<Eigen::Index>(emb.offset + i)) != 0) touched.push_back(emb.offset + i);
  }
  for (int k = 0; k < per_tensor && !touched.empty(); ++k) coords.push_back(touched[rng() % touched.size()]);

  GradCheck out;
  out.steps = layout.valid_steps;
  // Step chosen so float64 round-off in the loss stays well below 1e-4 relative.
  const double h = 1e-5;
  auto q = f.params;
  for (std::size_t i : coords) {
    const auto idx = static_cast<Eigen::Index>(i);
    const double w0 = q.w(idx);
    q.w(idx) = w0 + h;
    const double up = loss(q);
    q.w(idx) = w0 - h;
    const double dn = loss(q);
    q.w(idx) = w0;
    const double fd = (up - dn) / (2 * h);
    const double an = g(idx);
    const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6});
    out.max_rel_error = std::max(out.max_rel_error, rel);
    ++out.coords;
  }
  return out;
}

}  // namespace ministone::testing
