#include "ministone/learner/learner.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace ministone {

void LearnerConfig::validate() const {
  vtrace.validate();
  if (!(epsilon > 0 && epsilon < 1)) throw std::invalid_argument("PPO epsilon must be in (0, 1)");
  for (double w : {w_policy, w_upgo, w_value, w_entropy}) {
    if (!(w >= 0)) throw std::invalid_argument("loss weights must be non-negative");
  }
  if (!(learning_rate > 0)) throw std::invalid_argument("learning rate must be positive");
  if (batch_steps <= 0 || unroll <= 0 || sample_reuse <= 0) throw std::invalid_argument("bad batch configuration");
}

BatchLayout::BatchLayout(std::span<const TrajectorySegment* const> segs) : segments(segs.begin(), segs.end()) {
  step_column.resize(segments.size());
  bootstrap_column.assign(segments.size(), -1);
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& s = *segments[i];
    if (s.steps.empty()) throw std::invalid_argument("empty trajectory segment");
    for (std::size_t t = 0; t < s.steps.size(); ++t) {
      if (s.steps[t].done && t + 1 != s.steps.size()) throw std::invalid_argument("segment continues past done");
      step_column[i].push_back(static_cast<int>(columns.size()));
      columns.push_back(&s.steps[t].obs);
    }
    valid_steps += static_cast<int>(s.steps.size());
    if (!s.terminal()) {
      if (!s.bootstrap) throw std::invalid_argument("non-terminal segment without a bootstrap observation");
      bootstrap_column[i] = static_cast<int>(columns.size());
      columns.push_back(&*s.bootstrap);
    }
  }
}

template <class T>
LearnerTargets<T> compute_targets(const BatchLayout& layout, const typename PolicyNet<T>::Cache& cache,
                                  const LearnerConfig& cfg) {
  LearnerTargets<T> out;
  const std::size_t n = layout.segments.size();
  out.vtrace.resize(n);
  out.advantages.resize(n);
  out.rho_clipped.resize(n);
  out.upgo.resize(n);
  out.values.resize(n);
  out.ratio.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& seg = *layout.segments[i];
    const std::size_t k = seg.steps.size();
    std::vector<T> r(k), V(k), rho(k), disc(k);
    for (std::size_t t = 0; t < k; ++t) {
      const auto& st = seg.steps[t];
      const int col = layout.step_column[i][t];
      r[t] = static_cast<T>(st.reward);
      V[t] = cfg.behavior_values ? static_cast<T>(st.behavior_value) : cache.values(col);
      rho[t] = importance_ratio(cache.probs(st.action.index(), col), static_cast<T>(st.behavior_prob));
      disc[t] = st.done ? T(0) : static_cast<T>(cfg.vtrace.gamma);
    }
    const T boot = layout.bootstrap_column[i] >= 0 ? cache.values(layout.bootstrap_column[i]) : T(0);
    auto vt = vtrace_targets<T>(r, V, boot, rho, disc, cfg.vtrace);
    out.vtrace[i] = std::move(vt.v);
    out.advantages[i] = std::move(vt.advantages);
    out.rho_clipped[i] = std::move(vt.rho_clipped);
    out.upgo[i] = upgo_targets<T>(r, V, boot, disc);
    out.values[i] = std::move(V);
    out.ratio[i] = std::move(rho);
  }
  return out;
}

template <class T>
LossReport evaluate_loss(const BatchLayout& layout, const typename PolicyNet<T>::Cache& cache,
                         const LearnerTargets<T>& tg, const LearnerConfig& cfg, typename PolicyNet<T>::Mat* dlogits,
                         typename PolicyNet<T>::Vec* dvalues) {
  using Mat = typename PolicyNet<T>::Mat;
  using Vec = typename PolicyNet<T>::Vec;
  const Eigen::Index cols = static_cast<Eigen::Index>(layout.columns.size());
  if (dlogits) *dlogits = Mat::Zero(action::kTableSize, cols);
  if (dvalues) *dvalues = Vec::Zero(cols);
  LossReport rep;
  rep.steps = layout.valid_steps;
  if (rep.steps == 0) throw std::invalid_argument("minibatch has no valid steps");
  const T inv_n = T(1) / static_cast<T>(rep.steps);
  const T eps = static_cast<T>(cfg.epsilon);
  double clipped = 0;

  for (std::size_t i = 0; i < layout.segments.size(); ++i) {
    const auto& seg = *layout.segments[i];
    for (std::size_t t = 0; t < seg.steps.size(); ++t) {
      const auto& st = seg.steps[t];
      const int col = layout.step_column[i][t];
      const int a = st.action.index();
      const ActionMask& mask = st.obs.mask;
      const T pa = cache.probs(a, col);
      if (!(pa > T(0))) throw std::runtime_error("recorded action has zero probability under the current policy");
      const T logp = std::log(pa);
      const T ratio = pa / static_cast<T>(st.behavior_prob);
      const T A = tg.advantages[i][t];

      // Coefficient on d log pi(a_t) from the policy-type terms.
      T g_logp = 0;
      if (cfg.policy_loss == PolicyLoss::Ppo) {
        const T clip_r = std::min(std::max(ratio, T(1) - eps), T(1) + eps);
        const T unclipped = A * ratio;
        const T clipped_term = A * clip_r;
        rep.policy -= static_cast<double>(ppo_term(A, ratio, eps) * inv_n);
        if (unclipped <= clipped_term) g_logp -= static_cast<T>(cfg.w_policy) * A * ratio * inv_n;
        if (clip_r != ratio) clipped += 1;
      } else {
        const T w = tg.rho_clipped[i][t] * A;
        rep.policy -= static_cast<double>(w * logp * inv_n);
        g_logp -= static_cast<T>(cfg.w_policy) * w * inv_n;
      }
      const T upgo_w = std::min(tg.ratio[i][t], T(1)) * (tg.upgo[i][t] - tg.values[i][t]);
      rep.upgo -= static_cast<double>(upgo_w * logp * inv_n);
      g_logp -= static_cast<T>(cfg.w_upgo) * upgo_w * inv_n;

      const T V = cache.values(col);
      const T diff = V - tg.vtrace[i][t];
      rep.value += static_cast<double>(diff * diff * inv_n);

      T H = 0;
      for (int j = 0; j < action::kTableSize; ++j) {
        const T p = cache.probs(j, col);
        if (mask.test(static_cast<std::size_t>(j)) && p > T(0)) H -= p * std::log(p);
      }
      rep.entropy += static_cast<double>(H * inv_n);

      rep.mean_ratio += static_cast<double>(ratio * inv_n);
      rep.max_ratio = std::max(rep.max_ratio, static_cast<double>(ratio));

      if (dlogits) {
        auto dz = dlogits->col(col);
        const T we = static_cast<T>(cfg.w_entropy) * inv_n;
        for (int j = 0; j < action::kTableSize; ++j) {
          if (!mask.test(static_cast<std::size_t>(j))) continue;
          const T p = cache.probs(j, col);
          // d log pi(a) / dz_j = [j == a] - p_j
          T v = g_logp * ((j == a ? T(1) : T(0)) - p);
          // d(-H)/dz_j = p_j (log p_j + H)
          if (p > T(0)) v += we * p * (std::log(p) + H);
          dz(j) += v;
        }
      }
      if (dvalues) (*dvalues)(col) += static_cast<T>(cfg.w_value) * T(2) * diff * inv_n;
    }
  }
  rep.clip_fraction = clipped / rep.steps;
  rep.total = cfg.w_policy * rep.policy + cfg.w_upgo * rep.upgo + cfg.w_value * rep.value - cfg.w_entropy * rep.entropy;
  return rep;
}

template LearnerTargets<float> compute_targets<float>(const BatchLayout&, const PolicyNet<float>::Cache&,
                                                      const LearnerConfig&);
template LearnerTargets<double> compute_targets<double>(const BatchLayout&, const PolicyNet<double>::Cache&,
                                                        const LearnerConfig&);
template LossReport evaluate_loss<float>(const BatchLayout&, const PolicyNet<float>::Cache&,
                                         const LearnerTargets<float>&, const LearnerConfig&, PolicyNet<float>::Mat*,
                                         PolicyNet<float>::Vec*);
template LossReport evaluate_loss<double>(const BatchLayout&, const PolicyNet<double>::Cache&,
                                          const LearnerTargets<double>&, const LearnerConfig&, PolicyNet<double>::Mat*,
                                          PolicyNet<double>::Vec*);

Learner::Learner(PolicyParams params, LearnerConfig cfg, int tag)
    : params_(std::move(params)), cfg_(cfg), tag_(tag) {
  cfg_.validate();
  m_ = Eigen::VectorXf::Zero(params_.w.size());
  v_ = Eigen::VectorXf::Zero(params_.w.size());
  params_.meta.hero_tag = tag;
}

UpdateMetrics Learner::update(std::span<const TrajectorySegment* const> batch) {
  UpdateMetrics out;
  for (const auto* s : batch) {
    if (s->learner_tag != tag_) {
      throw std::logic_error("segment from learner instance " + std::to_string(s->learner_tag) +
                             " routed to instance " + std::to_string(tag_));
    }
    auto it = uses_.find(s->id);
    if (cfg_.enforce_reuse && it != uses_.end() && it->second >= cfg_.sample_reuse) {
      throw SampleReuseViolation("segment " + std::to_string(s->id) + " already used " +
                                 std::to_string(it->second) + " times");
    }
  }
  for (const auto* s : batch) ++uses_[s->id];

  BatchLayout layout(batch);
  PolicyNet<float>::forward(params_, layout.columns, cache_);
  auto targets = compute_targets<float>(layout, cache_, cfg_);
  PolicyNet<float>::Mat dz;
  PolicyNet<float>::Vec dv;
  out.loss = evaluate_loss<float>(layout, cache_, targets, cfg_, &dz, &dv);
  out.step = params_.meta.step;
  if (!std::isfinite(out.loss.total)) {
    out.error = "non-finite loss";
    return out;
  }
  Eigen::VectorXf grad = Eigen::VectorXf::Zero(params_.w.size());
  PolicyNet<float>::backward(params_, cache_, dz, dv, grad);
  out.grad_norm = grad.cast<double>().norm();
  if (!std::isfinite(out.grad_norm)) {
    out.error = "non-finite gradient";
    return out;
  }
  ++adam_t_;
  const float b1 = static_cast<float>(cfg_.adam_beta1);
  const float b2 = static_cast<float>(cfg_.adam_beta2);
  m_ = b1 * m_ + (1.f - b1) * grad;
  v_ = b2 * v_ + (1.f - b2) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(cfg_.adam_beta1, static_cast<double>(adam_t_));
  const double bc2 = 1.0 - std::pow(cfg_.adam_beta2, static_cast<double>(adam_t_));
  const float step = static_cast<float>(cfg_.learning_rate * std::sqrt(bc2) / bc1);
  const float eps = static_cast<float>(cfg_.adam_eps * std::sqrt(bc2));
  params_.w.array() -= step * m_.array() / (v_.array().sqrt() + eps);
  ++params_.meta.step;
  out.step = params_.meta.step;
  out.applied = true;
  return out;
}

std::string Learner::optimizer_state() const {
  std::string out = "MSTNADAM";
  auto put = [&out](const void* p, std::size_t n) { out.append(static_cast<const char*>(p), n); };
  std::uint64_t n = static_cast<std::uint64_t>(m_.size());
  put(&adam_t_, sizeof adam_t_);
  put(&n, sizeof n);
  put(m_.data(), n * sizeof(float));
  put(v_.data(), n * sizeof(float));
  return out;
}

void Learner::restore_optimizer_state(const std::string& bytes) {
  const std::size_t n = static_cast<std::size_t>(m_.size());
  if (bytes.size() != 8 + 16 + 2 * n * sizeof(float) || bytes.compare(0, 8, "MSTNADAM") != 0) {
    throw std::invalid_argument("optimizer state does not match the parameter layout");
  }
  std::uint64_t stored = 0;
  std::memcpy(&adam_t_, bytes.data() + 8, 8);
  std::memcpy(&stored, bytes.data() + 16, 8);
  if (stored != n) throw std::invalid_argument("optimizer state size mismatch");
  std::memcpy(m_.data(), bytes.data() + 24, n * sizeof(float));
  std::memcpy(v_.data(), bytes.data() + 24 + n * sizeof(float), n * sizeof(float));
}

std::string format_metrics(const UpdateMetrics& m) {
  nlohmann::json j;
  j["step"] = m.step;
  j["loss"] = m.loss.total;
  j["policy"] = m.loss.policy;
  j["upgo"] = m.loss.upgo;
  j["value"] = m.loss.value;
  j["entropy"] = m.loss.entropy;
  j["mean_ratio"] = m.loss.mean_ratio;
  j["max_ratio"] = m.loss.max_ratio;
  j["clip_fraction"] = m.loss.clip_fraction;
  j["grad_norm"] = m.grad_norm;
  j["steps"] = m.loss.steps;
  if (!m.error.empty()) j["error"] = m.error;
  return j.dump();
}

}  // namespace ministone
