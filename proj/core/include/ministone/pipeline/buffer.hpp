#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "ministone/learner/trajectory.hpp"

namespace ministone {

enum class BufferDiscipline { Queue, Ring };
std::string_view to_string(BufferDiscipline d);
BufferDiscipline parse_discipline(std::string_view s);

struct BufferConfig {
  BufferDiscipline discipline = BufferDiscipline::Queue;
  int capacity = 256;  // segments
  int sample_reuse = 2;

  void validate(int batch_segments) const;
};

// Thrown to every waiter once the buffer is shut down.
class BufferShutdown : public std::runtime_error {
 public:
  BufferShutdown() : std::runtime_error("segment buffer shut down") {}
};

// Monotonic seconds; injectable so rate tests need no sleeping.
using Clock = std::function<double()>;
Clock steady_clock_seconds();

struct PipelineMetrics {
  double window_s = 0;
  double s_p = 0;  // segments produced per second
  // Segments consumed per second, counted as deliveries / sample_reuse so
  // that c = 1 means the learner uses every segment sample_reuse times.
  double s_c = 0;
  std::optional<double> c;  // s_p / s_c, empty while nothing was consumed
  std::uint64_t produced = 0;
  std::uint64_t delivered = 0;
  std::uint64_t overwrites = 0;  // ring only
  double blocked_ms = 0;         // producer block time inside the window (queue only)
  std::size_t in_buffer = 0;
};

// Metrics log line: timestamp, s_p, s_c, c (null when undefined), overwrites, blocked_ms.
std::string metrics_log_line(const PipelineMetrics& m, double timestamp);

using SegmentPtr = std::shared_ptr<const TrajectorySegment>;

enum class PushStatus { Accepted, AcceptedAfterBlock, Overwrote };

struct PushResult {
  PushStatus status = PushStatus::Accepted;
  std::uint64_t victim = 0;  // overwritten segment id (ring)
  double blocked_ms = 0;
};

// Bounded many-producer / one-consumer segment buffer.
// Queue: push blocks while full; pop_batch takes the oldest n segments in
// order and each segment is delivered exactly sample_reuse times before it
// is retired. Ring: push never blocks and overwrites the oldest slot;
// pop_batch samples live slots uniformly with replacement.
class SegmentBuffer {
 public:
  explicit SegmentBuffer(BufferConfig cfg, Clock clock = steady_clock_seconds(), std::uint64_t seed = 0,
                         double window_s = 60.0);

  PushResult push(SegmentPtr seg);
  std::vector<SegmentPtr> pop_batch(int n);
  // As pop_batch but gives up after timeout_s; empty on timeout.
  std::vector<SegmentPtr> try_pop_batch(int n, double timeout_s);

  void shutdown();
  bool is_shut_down() const;

  PipelineMetrics metrics() const;
  std::size_t size() const;
  const BufferConfig& config() const { return cfg_; }
  // Deliveries per pushed segment id, including overwritten or retired ones.
  std::unordered_map<std::uint64_t, int> consumption_counts() const;

 private:
  struct Entry {
    SegmentPtr seg;
    int remaining = 0;
  };
  bool ready(int n) const;
  std::vector<SegmentPtr> take(int n);
  void trim(double now) const;

  BufferConfig cfg_;
  Clock clock_;
  double window_s_;
  mutable std::mutex mu_;
  std::condition_variable not_full_, not_empty_;
  bool shut_ = false;
  std::deque<Entry> queue_;
  std::vector<SegmentPtr> ring_;
  std::size_t ring_next_ = 0;
  std::size_t ring_live_ = 0;
  std::mt19937_64 rng_;
  std::unordered_map<std::uint64_t, int> counts_;
  std::uint64_t produced_ = 0, delivered_ = 0, overwrites_ = 0;
  double start_;
  // Windowed events: (time, amount).
  mutable std::deque<std::pair<double, double>> prod_ev_, cons_ev_, block_ev_;
};

// Latest published parameters, shared between the learner and actors.
template <class P>
class SnapshotStore {
 public:
  void publish(P params) {
    auto p = std::make_shared<const P>(std::move(params));
    std::lock_guard lk(mu_);
    latest_ = std::move(p);
    ++version_;
  }
  std::shared_ptr<const P> latest() const {
    std::lock_guard lk(mu_);
    return latest_;
  }
  std::uint64_t version() const {
    std::lock_guard lk(mu_);
    return version_;
  }

 private:
  mutable std::mutex mu_;
  std::shared_ptr<const P> latest_;
  std::uint64_t version_ = 0;
};

// Actor-side snapshot that refreshes after every `period` produced segments.
template <class P>
class SnapshotCache {
 public:
  SnapshotCache(const SnapshotStore<P>& store, int period = 200) : store_(&store), period_(period) {}
  const std::shared_ptr<const P>& get() {
    if (!cur_) cur_ = store_->latest();
    return cur_;
  }
  void produced(int segments) {
    since_ += segments;
    if (since_ >= period_) {
      since_ = 0;
      cur_ = store_->latest();
      ++refreshes_;
    }
  }
  int refreshes() const { return refreshes_; }

 private:
  const SnapshotStore<P>* store_;
  int period_;
  int since_ = 0;
  int refreshes_ = 0;
  std::shared_ptr<const P> cur_;
};

// Keeps c inside [low, high] by scaling the number of running actors towards
// the middle of the band.
struct ActorGovernor {
  double low = 1.0;
  double high = 1.2;
  int next_active(int active, int max_actors, std::optional<double> c) const;
};

// Producer threads that run `produce` and push its segments. Actors with an
// index at or above active() wait until resumed. With several buffers a
// segment goes to buffers[learner_tag].
class ActorPool {
 public:
  using ProduceFn = std::function<std::vector<TrajectorySegment>(int actor, std::uint64_t episode)>;

  ActorPool(SegmentBuffer& buffer, int actors, ProduceFn produce);
  ActorPool(std::vector<SegmentBuffer*> buffers, int actors, ProduceFn produce);
  ~ActorPool();
  ActorPool(const ActorPool&) = delete;
  ActorPool& operator=(const ActorPool&) = delete;

  void start();
  // Shuts the buffers down and joins every thread.
  void stop();
  void set_active(int n);
  int active() const;
  int size() const { return n_; }
  // First exception raised by a producer, if any.
  std::exception_ptr error() const;

 private:
  void run(int id);

  std::vector<SegmentBuffer*> buffers_;
  int n_;
  ProduceFn produce_;
  std::vector<std::thread> threads_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  int active_;
  bool stopping_ = false;
  std::exception_ptr error_;
};

}  // namespace ministone
