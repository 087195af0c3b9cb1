#include "ministone/osfp/osfp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ministone {

void OsfpConfig::validate() const {
  if (!(self_play_prob > 0 && self_play_prob <= 1)) throw std::invalid_argument("self-play probability must be in (0, 1]");
  if (!(gate_threshold > 0 && gate_threshold < 1)) throw std::invalid_argument("gate threshold must be in (0, 1)");
  if (max_lp_count <= 0) throw std::invalid_argument("max LP count must be positive");
  if (!(sampler_lambda > 0)) throw std::invalid_argument("sampler lambda must be positive");
  if (samples_per_lp <= 0) throw std::invalid_argument("samples per LP must be positive");
}

void to_json(nlohmann::json& j, const OsfpConfig& c) {
  j = {{"p", c.self_play_prob},        {"xi", c.gate_threshold},         {"c", c.max_lp_count},
       {"lambda", c.sampler_lambda},   {"samples_per_lp", c.samples_per_lp}, {"hero_isolation", c.hero_isolation},
       {"cheat", c.cheat}};
}

void from_json(const nlohmann::json& j, OsfpConfig& c) {
  c.self_play_prob = j.at("p").get<double>();
  c.gate_threshold = j.at("xi").get<double>();
  c.max_lp_count = j.at("c").get<int>();
  c.sampler_lambda = j.at("lambda").get<double>();
  c.samples_per_lp = j.at("samples_per_lp").get<std::int64_t>();
  c.hero_isolation = j.at("hero_isolation").get<bool>();
  c.cheat = j.at("cheat").get<bool>();
}

void to_json(nlohmann::json& j, const OsfpState& s) {
  nlohmann::json h = nlohmann::json::array();
  for (const auto& e : s.H) h.push_back({{"checkpoints", e.checkpoints}, {"lp", e.lp}});
  j = {{"H", h}, {"G", s.G}, {"C", s.C}, {"count", s.count}, {"lp_index", s.lp_index}};
}

void from_json(const nlohmann::json& j, OsfpState& s) {
  s.H.clear();
  for (const auto& e : j.at("H")) s.H.push_back({e.at("checkpoints").get<std::vector<std::string>>(), e.at("lp").get<int>()});
  s.G = j.at("G").get<std::vector<double>>();
  s.C = j.at("C").get<std::vector<std::int64_t>>();
  s.count = j.at("count").get<int>();
  s.lp_index = j.at("lp_index").get<int>();
  if (s.G.size() != s.H.size() || s.C.size() != s.H.size()) throw std::invalid_argument("OSFP state: G/C/H sizes differ");
}

double gate_winrate(double g, std::int64_t c) {
  if (c == 0) return 0.5;
  return (g / static_cast<double>(c) + 1.0) / 2.0;
}

std::vector<double> sampler_weights(const std::vector<double>& winrates, double lambda) {
  std::vector<double> w(winrates.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 1.0 - winrates[i] + lambda;
  const double s = std::accumulate(w.begin(), w.end(), 0.0);
  for (auto& x : w) x /= s;
  return w;
}

std::vector<double> opponent_weights(const std::vector<double>& G, const std::vector<std::int64_t>& C,
                                     double lambda) {
  std::vector<double> wr(G.size());
  for (std::size_t i = 0; i < G.size(); ++i) {
    const double wins = (G[i] + static_cast<double>(C[i])) / 2.0;
    wr[i] = (wins + 1.0) / (static_cast<double>(C[i]) + 2.0);
  }
  return sampler_weights(wr, lambda);
}

bool gate_adds(const std::vector<double>& winrates, int count, const OsfpConfig& cfg) {
  const bool all_beat = std::all_of(winrates.begin(), winrates.end(), [&](double w) { return w > cfg.gate_threshold; });
  return all_beat || count > cfg.max_lp_count;
}

OsfpController::OsfpController(OsfpConfig cfg, OsfpState state) : cfg_(cfg), st_(std::move(state)) {
  cfg_.validate();
  st_.G.resize(st_.H.size(), 0.0);
  st_.C.resize(st_.H.size(), 0);
}

OpponentPick OsfpController::sample_opponent(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double coin = u(rng);
  std::lock_guard lk(mu_);
  if (st_.H.empty() || coin < cfg_.self_play_prob) return {true, -1};
  const auto w = opponent_weights(st_.G, st_.C, cfg_.sampler_lambda);
  std::discrete_distribution<int> pick(w.begin(), w.end());
  return {false, pick(rng)};
}

void OsfpController::record_result(int index, int g) {
  if (g < -1 || g > 1) throw std::invalid_argument("match result must be -1, 0 or +1");
  std::lock_guard lk(mu_);
  if (index < 0 || index >= static_cast<int>(st_.H.size())) throw std::out_of_range("no historical opponent " + std::to_string(index));
  st_.G[static_cast<std::size_t>(index)] += g;
  st_.C[static_cast<std::size_t>(index)] += 1;
}

GateDecision OsfpController::end_of_lp_gate(const PoolEntry& entry) {
  std::lock_guard lk(mu_);
  GateDecision d;
  d.count_before = st_.count;
  for (std::size_t i = 0; i < st_.H.size(); ++i) d.winrates.push_back(gate_winrate(st_.G[i], st_.C[i]));
  const bool all_beat =
      std::all_of(d.winrates.begin(), d.winrates.end(), [&](double w) { return w > cfg_.gate_threshold; });
  const bool add = predicate_ ? predicate_(d.winrates, st_.count) : gate_adds(d.winrates, st_.count, cfg_);
  if (add) {
    d.result = GateResult::Added;
    d.forced = !all_beat;
    st_.H.push_back(entry);
    st_.count = 0;
  } else {
    ++st_.count;
  }
  st_.G.assign(st_.H.size(), 0.0);
  st_.C.assign(st_.H.size(), 0);
  ++st_.lp_index;
  return d;
}

OsfpState OsfpController::state() const {
  std::lock_guard lk(mu_);
  return st_;
}

MatchSetup assign_match_setup(bool cheat, std::mt19937_64& rng) {
  MatchSetup m;
  std::uniform_int_distribution<int> hero(0, kNumHeroes - 1);
  for (auto& h : m.heroes) h = kAllHeroes[hero(rng)];
  static constexpr int kRandomCb[] = {0, 1, 2, 4};
  std::discrete_distribution<int> rcb({0.5, 0.25, 0.125, 0.125});
  for (auto& n : m.random_cb) n = kRandomCb[rcb(rng)];
  if (cheat) {
    std::uniform_int_distribution<int> n(0, kMaxCheat);
    const int n1 = n(rng);
    const int n2 = n(rng);
    m.cheat = {n1, std::min(n1, n2)};
  }
  return m;
}

int sample_eval_cheat(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> n(0, kMaxCheat);
  return n(rng);
}

namespace matrix {

Mat rock_paper_scissors() { return {{0, -1, 1}, {1, 0, -1}, {-1, 1, 0}}; }

double payoff(const Mat& A, const Mix& x, const Mix& y) {
  double s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = 0; j < y.size(); ++j) s += x[i] * A[i][j] * y[j];
  }
  return s;
}

namespace {

Mix apply(const Mat& A, const Mix& y) {
  Mix u(A.size(), 0.0);
  for (std::size_t i = 0; i < A.size(); ++i) {
    for (std::size_t j = 0; j < y.size(); ++j) u[i] += A[i][j] * y[j];
  }
  return u;
}

// Opponent distribution of one LP: p * self + (1 - p) * sum_i f_i H_i, where
// f uses the learner's exact winrates against the pool.
Mix lp_opponent(const Mat& A, const Mix& self, const std::vector<Mix>& H, const OsfpConfig& cfg) {
  if (H.empty()) return self;
  std::vector<double> wr;
  for (const auto& h : H) wr.push_back((payoff(A, self, h) + 1.0) / 2.0);
  const auto f = sampler_weights(wr, cfg.sampler_lambda);
  Mix m(self.size(), 0.0);
  for (std::size_t k = 0; k < m.size(); ++k) {
    m[k] = cfg.self_play_prob * self[k];
    for (std::size_t i = 0; i < H.size(); ++i) m[k] += (1.0 - cfg.self_play_prob) * f[i] * H[i][k];
  }
  return m;
}

}  // namespace

Mix smooth_best_response(const Mat& A, const Mix& y, double tau) {
  auto u = apply(A, y);
  const double mx = *std::max_element(u.begin(), u.end());
  double s = 0;
  for (auto& x : u) s += (x = std::exp((x - mx) / tau));
  for (auto& x : u) x /= s;
  return u;
}

double exploitability(const Mat& A, const Mix& y) {
  auto u = apply(A, y);
  return *std::max_element(u.begin(), u.end());
}

HarnessTrace run_osfp(const Mat& A, const HarnessConfig& cfg) {
  cfg.osfp.validate();
  HarnessTrace tr;
  Mix x = cfg.initial;
  int count = 0;
  for (int lp = 0; lp < cfg.lps; ++lp) {
    Mix next;
    if (cfg.learner == LearnerKind::SnapshotResponse) {
      next = smooth_best_response(A, lp_opponent(A, x, tr.pool, cfg.osfp), cfg.tau);
    } else {
      // Damped iteration; the step is small enough to contract around the
      // logit fixed point of the 3x3 games used here.
      next = x;
      for (int it = 0; it < 400000; ++it) {
        const Mix t = smooth_best_response(A, lp_opponent(A, next, tr.pool, cfg.osfp), cfg.tau);
        double diff = 0;
        for (std::size_t k = 0; k < t.size(); ++k) diff = std::max(diff, std::abs(t[k] - next[k]));
        if (diff < 1e-13) break;
        for (std::size_t k = 0; k < t.size(); ++k) next[k] = 0.98 * next[k] + 0.02 * t[k];
      }
    }
    GateDecision d;
    d.count_before = count;
    for (const auto& h : tr.pool) d.winrates.push_back((payoff(A, next, h) + 1.0) / 2.0);
    const bool all_beat = std::all_of(d.winrates.begin(), d.winrates.end(),
                                      [&](double w) { return w > cfg.osfp.gate_threshold; });
    if (gate_adds(d.winrates, count, cfg.osfp)) {
      d.result = GateResult::Added;
      d.forced = !all_beat;
      tr.pool.push_back(next);
      count = 0;
    } else {
      ++count;
    }
    tr.gates.push_back(d);
    x = next;
    Mix emp(A.size(), 0.0);
    for (const auto& h : tr.pool) {
      for (std::size_t k = 0; k < emp.size(); ++k) emp[k] += h[k] / static_cast<double>(tr.pool.size());
    }
    tr.empirical = emp;
    tr.exploitability.push_back(exploitability(A, emp));
  }
  return tr;
}

}  // namespace matrix

}  // namespace ministone
