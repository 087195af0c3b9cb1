#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ministone {

enum class VTraceMode { Canonical, Clipped };

struct VTraceConfig {
  double gamma = 1.0;
  double c_low = 0.001;
  double c_high = 1.007;
  double rho_low = 0.001;
  double rho_high = 1.007;
  VTraceMode mode = VTraceMode::Clipped;

  // Truncation-only traces min(rho, rho_bar), min(c, c_bar).
  static VTraceConfig canonical(double rho_bar = 1.0, double c_bar = 1.0, double gamma = 1.0) {
    return {gamma, 0.0, c_bar, 0.0, rho_bar, VTraceMode::Canonical};
  }
  static VTraceConfig clipped(double low = 0.001, double high = 1.007, double gamma = 1.0) {
    return {gamma, low, high, low, high, VTraceMode::Clipped};
  }

  void validate() const {
    if (!(c_low >= 0 && c_low <= c_high)) throw std::invalid_argument("vtrace: need 0 <= c_low <= c_high");
    if (!(rho_low >= 0 && rho_low <= rho_high)) throw std::invalid_argument("vtrace: need 0 <= rho_low <= rho_high");
    if (c_high > rho_high) throw std::invalid_argument("vtrace: c_high must not exceed rho_high");
    if (!(gamma >= 0 && gamma <= 1)) throw std::invalid_argument("vtrace: gamma outside [0, 1]");
    if (mode == VTraceMode::Canonical && (c_low != 0 || rho_low != 0)) {
      throw std::invalid_argument("vtrace: canonical mode has no lower clip");
    }
  }

  // Canonical traces are plain truncations; the clipped ones also floor.
  // A clipped config with zero floors must agree with the canonical one.
  template <class T>
  T clip_rho(T rho) const {
    if (mode == VTraceMode::Canonical) return std::min(rho, static_cast<T>(rho_high));
    return std::min(std::max(rho, static_cast<T>(rho_low)), static_cast<T>(rho_high));
  }
  template <class T>
  T clip_c(T c) const {
    if (mode == VTraceMode::Canonical) return std::min(c, static_cast<T>(c_high));
    return std::min(std::max(c, static_cast<T>(c_low)), static_cast<T>(c_high));
  }
};

template <class T>
struct VTraceResult {
  std::vector<T> v;           // targets v_t, t < k
  std::vector<T> advantages;  // r_t + discount_t * v_{t+1} - V_t, with v_k = bootstrap
  std::vector<T> rho_clipped;
};

// Per-step discount: gamma, or 0 on the step that ends the episode. Steps
// after an episode end (padding) must carry discount 0 as well; their
// targets collapse to V_t.
//
// Recursion, evaluated from the back:
//   delta_t = r_t + discount_t V_{t+1} - V_t
//   v_t     = V_t + clip_rho(rho_t) delta_t + discount_t clip_c(rho_t) (v_{t+1} - V_{t+1})
template <class T>
VTraceResult<T> vtrace_targets(std::span<const T> rewards, std::span<const T> values, T bootstrap,
                               std::span<const T> rhos, std::span<const T> discounts, const VTraceConfig& cfg) {
  const std::size_t k = rewards.size();
  if (values.size() != k || rhos.size() != k || discounts.size() != k) {
    throw std::invalid_argument("vtrace: length mismatch");
  }
  cfg.validate();
  VTraceResult<T> out;
  out.v.assign(k, T(0));
  out.advantages.assign(k, T(0));
  out.rho_clipped.assign(k, T(0));
  T next_v = bootstrap;
  T next_V = bootstrap;
  for (std::size_t i = k; i-- > 0;) {
    if (!(rhos[i] >= T(0)) || !std::isfinite(static_cast<double>(rhos[i]))) {
      throw std::invalid_argument("vtrace: importance ratio must be finite and non-negative");
    }
    const T rho = cfg.clip_rho(rhos[i]);
    const T c = cfg.clip_c(rhos[i]);
    const T delta = rewards[i] + discounts[i] * next_V - values[i];
    out.v[i] = values[i] + rho * delta + discounts[i] * c * (next_v - next_V);
    out.advantages[i] = rewards[i] + discounts[i] * next_v - values[i];
    out.rho_clipped[i] = rho;
    next_v = out.v[i];
    next_V = values[i];
  }
  return out;
}

// Ratio pi/mu with the zero-mu check.
template <class T>
T importance_ratio(T pi, T mu) {
  if (!(mu > T(0))) throw std::invalid_argument("behaviour probability must be positive");
  return pi / mu;
}

// Upgoing return: follow the realized continuation while it beats the value
// estimate, otherwise bootstrap from V:
//   G_t = r_t + discount_t * X_{t+1}
//   X_{t+1} = G_{t+1} if r_{t+1} + discount_{t+1} V_{t+2} >= V_{t+1} else V_{t+1}
// with X_k = bootstrap and V_k = bootstrap.
template <class T>
std::vector<T> upgo_targets(std::span<const T> rewards, std::span<const T> values, T bootstrap,
                            std::span<const T> discounts) {
  const std::size_t k = rewards.size();
  if (values.size() != k || discounts.size() != k) throw std::invalid_argument("upgo: length mismatch");
  std::vector<T> g(k, T(0));
  if (k == 0) return g;
  auto V = [&](std::size_t i) { return i < k ? values[i] : bootstrap; };
  T x_next = bootstrap;
  for (std::size_t i = k; i-- > 0;) {
    g[i] = rewards[i] + discounts[i] * x_next;
    // X_i for step i-1: compare step i's one-step return with V_i.
    const T one_step = rewards[i] + discounts[i] * V(i + 1);
    x_next = one_step >= values[i] ? g[i] : values[i];
  }
  return g;
}

}  // namespace ministone
