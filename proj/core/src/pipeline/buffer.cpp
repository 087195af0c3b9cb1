#include "ministone/pipeline/buffer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <nlohmann/json.hpp>

namespace ministone {

std::string_view to_string(BufferDiscipline d) { return d == BufferDiscipline::Queue ? "queue" : "ring"; }

BufferDiscipline parse_discipline(std::string_view s) {
  if (s == "queue") return BufferDiscipline::Queue;
  if (s == "ring") return BufferDiscipline::Ring;
  throw std::invalid_argument("unknown buffer discipline '" + std::string(s) + "'");
}

void BufferConfig::validate(int batch_segments) const {
  if (capacity <= 0) throw std::invalid_argument("buffer capacity must be positive");
  if (sample_reuse <= 0) throw std::invalid_argument("sample_reuse must be positive");
  if (batch_segments > capacity) throw std::invalid_argument("buffer capacity is smaller than a batch");
}

Clock steady_clock_seconds() {
  return [] {
    using namespace std::chrono;
    return duration<double>(steady_clock::now().time_since_epoch()).count();
  };
}

std::string metrics_log_line(const PipelineMetrics& m, double timestamp) {
  nlohmann::json j;
  j["timestamp"] = timestamp;
  j["s_p"] = m.s_p;
  j["s_c"] = m.s_c;
  j["c"] = m.c ? nlohmann::json(*m.c) : nlohmann::json(nullptr);
  j["overwrites"] = m.overwrites;
  j["blocked_ms"] = m.blocked_ms;
  return j.dump();
}

SegmentBuffer::SegmentBuffer(BufferConfig cfg, Clock clock, std::uint64_t seed, double window_s)
    : cfg_(cfg), clock_(std::move(clock)), window_s_(window_s), rng_(seed) {
  cfg_.validate(1);
  if (cfg_.discipline == BufferDiscipline::Ring) ring_.resize(static_cast<std::size_t>(cfg_.capacity));
  start_ = clock_();
}

PushResult SegmentBuffer::push(SegmentPtr seg) {
  if (!seg) throw std::invalid_argument("null segment");
  std::unique_lock lk(mu_);
  if (shut_) throw BufferShutdown();
  PushResult res;
  if (cfg_.discipline == BufferDiscipline::Queue) {
    if (static_cast<int>(queue_.size()) >= cfg_.capacity) {
      const double t0 = clock_();
      not_full_.wait(lk, [&] { return shut_ || static_cast<int>(queue_.size()) < cfg_.capacity; });
      if (shut_) throw BufferShutdown();
      const double t1 = clock_();
      res.status = PushStatus::AcceptedAfterBlock;
      res.blocked_ms = (t1 - t0) * 1e3;
      block_ev_.emplace_back(t1, res.blocked_ms);
    }
    queue_.push_back({seg, cfg_.sample_reuse});
  } else {
    auto& slot = ring_[ring_next_];
    if (slot) {
      res.status = PushStatus::Overwrote;
      res.victim = slot->id;
      ++overwrites_;
    } else {
      ++ring_live_;
    }
    slot = seg;
    ring_next_ = (ring_next_ + 1) % ring_.size();
  }
  counts_.try_emplace(seg->id, 0);
  ++produced_;
  prod_ev_.emplace_back(clock_(), 1.0);
  lk.unlock();
  not_empty_.notify_one();
  return res;
}

bool SegmentBuffer::ready(int n) const {
  if (cfg_.discipline == BufferDiscipline::Queue) return static_cast<int>(queue_.size()) >= n;
  return static_cast<int>(ring_live_) >= n;
}

std::vector<SegmentPtr> SegmentBuffer::take(int n) {
  std::vector<SegmentPtr> out;
  out.reserve(static_cast<std::size_t>(n));
  if (cfg_.discipline == BufferDiscipline::Queue) {
    for (int i = 0; i < n; ++i) {
      auto& e = queue_[static_cast<std::size_t>(i)];
      out.push_back(e.seg);
      --e.remaining;
    }
    while (!queue_.empty() && queue_.front().remaining == 0) queue_.pop_front();
  } else {
    // Live slots are [0, ring_live_) until the ring first wraps, then all.
    std::uniform_int_distribution<std::size_t> pick(0, ring_live_ - 1);
    for (int i = 0; i < n; ++i) out.push_back(ring_[pick(rng_)]);
  }
  for (const auto& s : out) ++counts_[s->id];
  delivered_ += static_cast<std::uint64_t>(n);
  cons_ev_.emplace_back(clock_(), static_cast<double>(n));
  return out;
}

std::vector<SegmentPtr> SegmentBuffer::pop_batch(int n) {
  if (n <= 0 || n > cfg_.capacity) throw std::invalid_argument("batch size must be in [1, capacity]");
  std::unique_lock lk(mu_);
  not_empty_.wait(lk, [&] { return shut_ || ready(n); });
  if (shut_) throw BufferShutdown();
  auto out = take(n);
  lk.unlock();
  not_full_.notify_all();
  return out;
}

std::vector<SegmentPtr> SegmentBuffer::try_pop_batch(int n, double timeout_s) {
  if (n <= 0 || n > cfg_.capacity) throw std::invalid_argument("batch size must be in [1, capacity]");
  std::unique_lock lk(mu_);
  const auto dur = std::chrono::duration<double>(timeout_s);
  if (!not_empty_.wait_for(lk, dur, [&] { return shut_ || ready(n); })) return {};
  if (shut_) throw BufferShutdown();
  auto out = take(n);
  lk.unlock();
  not_full_.notify_all();
  return out;
}

void SegmentBuffer::shutdown() {
  {
    std::lock_guard lk(mu_);
    shut_ = true;
  }
  not_full_.notify_all();
  not_empty_.notify_all();
}

bool SegmentBuffer::is_shut_down() const {
  std::lock_guard lk(mu_);
  return shut_;
}

void SegmentBuffer::trim(double now) const {
  const double cut = now - window_s_;
  for (auto* ev : {&prod_ev_, &cons_ev_, &block_ev_}) {
    while (!ev->empty() && ev->front().first < cut) ev->pop_front();
  }
}

PipelineMetrics SegmentBuffer::metrics() const {
  std::lock_guard lk(mu_);
  const double now = clock_();
  trim(now);
  PipelineMetrics m;
  m.window_s = std::min(window_s_, now - start_);
  auto sum = [](const auto& ev) {
    double s = 0;
    for (const auto& e : ev) s += e.second;
    return s;
  };
  if (m.window_s > 0) {
    m.s_p = sum(prod_ev_) / m.window_s;
    m.s_c = sum(cons_ev_) / static_cast<double>(cfg_.sample_reuse) / m.window_s;
  }
  if (m.s_c > 0) m.c = m.s_p / m.s_c;
  m.produced = produced_;
  m.delivered = delivered_;
  m.overwrites = overwrites_;
  m.blocked_ms = sum(block_ev_);
  m.in_buffer = cfg_.discipline == BufferDiscipline::Queue ? queue_.size() : ring_live_;
  return m;
}

std::size_t SegmentBuffer::size() const {
  std::lock_guard lk(mu_);
  return cfg_.discipline == BufferDiscipline::Queue ? queue_.size() : ring_live_;
}

std::unordered_map<std::uint64_t, int> SegmentBuffer::consumption_counts() const {
  std::lock_guard lk(mu_);
  return counts_;
}

int ActorGovernor::next_active(int active, int max_actors, std::optional<double> c) const {
  if (!c || max_actors <= 0) return std::clamp(active, std::min(1, max_actors), max_actors);
  const double mid = 0.5 * (low + high);
  if (*c > high) {
    return std::clamp(static_cast<int>(std::floor(active * mid / *c)), 1, std::max(1, active - 1));
  }
  if (*c < low) {
    return std::clamp(static_cast<int>(std::ceil(active * mid / std::max(*c, 1e-9))), active + 1, max_actors);
  }
  return active;
}

ActorPool::ActorPool(SegmentBuffer& buffer, int actors, ProduceFn produce)
    : ActorPool(std::vector<SegmentBuffer*>{&buffer}, actors, std::move(produce)) {}

ActorPool::ActorPool(std::vector<SegmentBuffer*> buffers, int actors, ProduceFn produce)
    : buffers_(std::move(buffers)), n_(actors), produce_(std::move(produce)), active_(actors) {
  if (actors < 0) throw std::invalid_argument("actor count must be non-negative");
  if (buffers_.empty()) throw std::invalid_argument("actor pool needs a buffer");
}

ActorPool::~ActorPool() { stop(); }

void ActorPool::start() {
  for (int i = 0; i < n_; ++i) threads_.emplace_back([this, i] { run(i); });
}

void ActorPool::stop() {
  {
    std::lock_guard lk(mu_);
    stopping_ = true;
  }
  cv_.notify_all();
  for (auto* b : buffers_) b->shutdown();
  for (auto& t : threads_) {
    if (t.joinable()) t.join();
  }
  threads_.clear();
}

void ActorPool::set_active(int n) {
  {
    std::lock_guard lk(mu_);
    active_ = std::clamp(n, 0, n_);
  }
  cv_.notify_all();
}

int ActorPool::active() const {
  std::lock_guard lk(mu_);
  return active_;
}

std::exception_ptr ActorPool::error() const {
  std::lock_guard lk(mu_);
  return error_;
}

void ActorPool::run(int id) {
  std::uint64_t episode = 0;
  try {
    for (;;) {
      {
        std::unique_lock lk(mu_);
        cv_.wait(lk, [&] { return stopping_ || id < active_; });
        if (stopping_) return;
      }
      auto segs = produce_(id, episode++);
      for (auto& s : segs) {
        std::size_t k = 0;
        if (buffers_.size() > 1) {
          if (s.learner_tag < 0 || s.learner_tag >= static_cast<int>(buffers_.size())) {
            throw std::logic_error("segment tag " + std::to_string(s.learner_tag) + " has no buffer");
          }
          k = static_cast<std::size_t>(s.learner_tag);
        }
        buffers_[k]->push(std::make_shared<const TrajectorySegment>(std::move(s)));
      }
    }
  } catch (const BufferShutdown&) {
  } catch (...) {
    std::lock_guard lk(mu_);
    if (!error_) error_ = std::current_exception();
  }
}

}  // namespace ministone
