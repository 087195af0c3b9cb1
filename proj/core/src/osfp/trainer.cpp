#include "ministone/osfp/trainer.hpp"

#include <atomic>
#include <chrono>
#include <fstream>
#include <map>
#include <sstream>

#include "ministone/evalharness/eval.hpp"
#include "ministone/policy/checkpoint.hpp"
#include "ministone/policy/sampler.hpp"
#include "ministone/util/seed.hpp"

namespace ministone {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
  osfp.validate();
  learner.validate();
  buffer.validate(batch_segments());
  if (batch_segments() < 1) throw std::invalid_argument("batch must hold at least one segment");
  if (buffer.sample_reuse != learner.sample_reuse) {
    throw std::invalid_argument("buffer and learner disagree on sample_reuse");
  }
  if (lps < 0) throw std::invalid_argument("LP count must be non-negative");
  if (actors < 0) throw std::invalid_argument("actor count must be non-negative");
  if (snapshot_period < 1) throw std::invalid_argument("snapshot period must be positive");
  if (hidden < 1) throw std::invalid_argument("hidden width must be positive");
}

namespace {

nlohmann::json vtrace_json(const VTraceConfig& v) {
  return {{"gamma", v.gamma},       {"c_low", v.c_low},       {"c_high", v.c_high},
          {"rho_low", v.rho_low},   {"rho_high", v.rho_high},
          {"mode", v.mode == VTraceMode::Clipped ? "clipped" : "canonical"}};
}

VTraceConfig vtrace_from(const nlohmann::json& j) {
  VTraceConfig v;
  v.gamma = j.at("gamma");
  v.c_low = j.at("c_low");
  v.c_high = j.at("c_high");
  v.rho_low = j.at("rho_low");
  v.rho_high = j.at("rho_high");
  v.mode = j.at("mode") == "clipped" ? VTraceMode::Clipped : VTraceMode::Canonical;
  return v;
}

}  // namespace

void to_json(nlohmann::json& j, const TrainConfig& c) {
  const auto& l = c.learner;
  j = {{"osfp", c.osfp},
       {"learner",
        {{"vtrace", vtrace_json(l.vtrace)},
         {"policy_loss", l.policy_loss == PolicyLoss::Ppo ? "ppo" : "vtrace_pg"},
         {"epsilon", l.epsilon},
         {"w_policy", l.w_policy},
         {"w_upgo", l.w_upgo},
         {"w_value", l.w_value},
         {"w_entropy", l.w_entropy},
         {"learning_rate", l.learning_rate},
         {"adam_beta1", l.adam_beta1},
         {"adam_beta2", l.adam_beta2},
         {"adam_eps", l.adam_eps},
         {"batch_steps", l.batch_steps},
         {"unroll", l.unroll},
         {"sample_reuse", l.sample_reuse},
         {"behavior_values", l.behavior_values}}},
       {"buffer",
        {{"discipline", to_string(c.buffer.discipline)},
         {"capacity", c.buffer.capacity},
         {"sample_reuse", c.buffer.sample_reuse}}},
       {"lps", c.lps},
       {"actors", c.actors},
       {"governor", c.governor},
       {"snapshot_period", c.snapshot_period},
       {"hidden", c.hidden},
       {"seed", c.seed},
       {"random_cb", c.random_cb}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.osfp = j.at("osfp").get<OsfpConfig>();
  const auto& l = j.at("learner");
  c.learner.vtrace = vtrace_from(l.at("vtrace"));
  c.learner.policy_loss = l.at("policy_loss") == "ppo" ? PolicyLoss::Ppo : PolicyLoss::VTracePg;
  c.learner.epsilon = l.at("epsilon");
  c.learner.w_policy = l.at("w_policy");
  c.learner.w_upgo = l.at("w_upgo");
  c.learner.w_value = l.at("w_value");
  c.learner.w_entropy = l.at("w_entropy");
  c.learner.learning_rate = l.at("learning_rate");
  c.learner.adam_beta1 = l.at("adam_beta1");
  c.learner.adam_beta2 = l.at("adam_beta2");
  c.learner.adam_eps = l.at("adam_eps");
  c.learner.batch_steps = l.at("batch_steps");
  c.learner.unroll = l.at("unroll");
  c.learner.sample_reuse = l.at("sample_reuse");
  c.learner.behavior_values = l.at("behavior_values");
  const auto& b = j.at("buffer");
  c.buffer.discipline = parse_discipline(b.at("discipline").get<std::string>());
  c.buffer.capacity = b.at("capacity");
  c.buffer.sample_reuse = b.at("sample_reuse");
  c.lps = j.at("lps");
  c.actors = j.at("actors");
  c.governor = j.at("governor");
  c.snapshot_period = j.at("snapshot_period");
  c.hidden = j.at("hidden");
  c.seed = j.at("seed");
  c.random_cb = j.at("random_cb");
}

Episode play_training_episode(const Encoder& encoder, const EpisodeSetup& setup, int unroll,
                              std::uint64_t& next_segment_id) {
  const auto& engine = encoder.engine();
  GameState s = engine.new_match(setup.heroes[0], setup.heroes[1], setup.seed);
  std::mt19937_64 rng(derive_seed(setup.seed, {0x7a11}));
  std::array<std::vector<TrajectoryStep>, 2> steps;
  std::array<int, 2> picks{0, 0};
  Episode ep;
  while (s.stage != Stage::Terminal) {
    const int seat = s.active;
    const auto k = static_cast<std::size_t>(seat);
    if (!setup.params[k]) throw std::invalid_argument("episode seat without parameters");
    auto obs = encoder.encode(s, seat, setup.cheat_n[k]);
    const bool forced_random = setup.random_cb_enabled && obs.delta == 1 && picks[k] < setup.random_cb[k];
    const auto d = sample_action(*setup.params[k], obs, rng, forced_random);
    if (obs.delta == 1) ++picks[k];
    engine.apply_in_place(s, d.action);
    if (setup.train_seat[k]) steps[k].push_back({std::move(obs), d.action, d.prob, 0.f, d.value, false});
  }
  ep.outcome = *s.outcome;
  ep.final_state = s;
  const auto reward = terminal_reward(s.outcome);
  for (std::size_t k = 0; k < 2; ++k) {
    if (!setup.train_seat[k] || steps[k].empty()) continue;
    steps[k].back().done = true;
    steps[k].back().reward = static_cast<float>(reward[k]);
    ep.trained_steps += static_cast<std::int64_t>(steps[k].size());
    auto segs = cut_segments(std::move(steps[k]), unroll, setup.tags[k], setup.heroes[k], next_segment_id);
    for (auto& g : segs) ep.segments.push_back(std::move(g));
  }
  return ep;
}

namespace {

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

void write_atomic(const fs::path& path, const std::string& bytes) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw TrainingIoError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw TrainingIoError("short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw TrainingIoError("cannot move " + tmp.string() + " into place: " + ec.message());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TrainingIoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch()).count();
}

class EventLog {
 public:
  explicit EventLog(const fs::path& path) : out_(path, std::ios::app) {
    if (!out_) throw TrainingIoError("cannot open event log " + path.string());
  }
  void write(nlohmann::json ev) {
    ev["ts"] = now_seconds();
    std::lock_guard lk(mu_);
    out_ << ev.dump() << '\n';
    out_.flush();
  }

 private:
  std::mutex mu_;
  std::ofstream out_;
};

// Loaded historical checkpoints, shared by all actors.
class HistoricalCache {
 public:
  HistoricalCache(fs::path run_dir, const ObsSchema& schema, std::uint64_t checksum)
      : dir_(std::move(run_dir)), schema_(schema), checksum_(checksum) {}
  std::shared_ptr<const PolicyParams> get(const std::string& rel) {
    std::lock_guard lk(mu_);
    auto it = cache_.find(rel);
    if (it != cache_.end()) return it->second;
    std::shared_ptr<const PolicyParams> p;
    try {
      p = std::make_shared<const PolicyParams>(load_checkpoint<float>(dir_ / rel, schema_, checksum_));
    } catch (const CheckpointError& e) {
      throw TrainingIoError(std::string("historical checkpoint: ") + e.what());
    }
    cache_.emplace(rel, p);
    return p;
  }

 private:
  fs::path dir_;
  const ObsSchema& schema_;
  std::uint64_t checksum_;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<const PolicyParams>> cache_;
};

int instance_of(bool isolation, Hero h) { return isolation ? static_cast<int>(h) : 0; }

}  // namespace

std::vector<PolicyParams> load_run_params(const fs::path& run_dir, const ObsSchema& schema,
                                          std::uint64_t pool_checksum) {
  const auto cfg = nlohmann::json::parse(read_file(run_dir / "config.json")).get<TrainConfig>();
  const int n = cfg.osfp.hero_isolation ? kNumHeroes : 1;
  std::vector<PolicyParams> out;
  for (int k = 0; k < n; ++k) {
    const int tag = cfg.osfp.hero_isolation ? k : -1;
    out.push_back(load_checkpoint<float>(run_dir / "current" / ("instance_" + std::to_string(tag) + ".ckpt"), schema,
                                         pool_checksum));
  }
  return out;
}

TrainResult run_training(const TrainConfig& requested, std::shared_ptr<const CardPool> pool, const fs::path& run_dir,
                         const LpCallback& on_lp) {
  TrainResult result;
  result.run_dir = run_dir;
  TrainConfig cfg = requested;
  const Encoder encoder{Engine(pool)};
  const auto& schema = encoder.schema();
  const std::uint64_t checksum = pool->checksum();

  std::error_code ec;
  fs::create_directories(run_dir / "pool", ec);
  fs::create_directories(run_dir / "payoff", ec);
  fs::create_directories(run_dir / "current", ec);
  if (ec) throw TrainingIoError("cannot create run directory " + run_dir.string() + ": " + ec.message());

  OsfpState state;
  if (fs::exists(run_dir / "osfp_state.json")) {
    // The stored config wins except for how far to train and how to run it.
    auto stored = nlohmann::json::parse(read_file(run_dir / "config.json")).get<TrainConfig>();
    stored.lps = requested.lps;
    stored.actors = requested.actors;
    stored.governor = requested.governor;
    stored.gate_override = requested.gate_override;
    cfg = stored;
    state = nlohmann::json::parse(read_file(run_dir / "osfp_state.json")).get<OsfpState>();
    result.resumed = true;
  }
  cfg.validate();
  write_atomic(run_dir / "config.json", nlohmann::json(cfg).dump(2));
  EventLog events(run_dir / "events.jsonl");

  const bool iso = cfg.osfp.hero_isolation;
  const int n_inst = iso ? kNumHeroes : 1;
  std::vector<std::unique_ptr<Learner>> learners;
  for (int k = 0; k < n_inst; ++k) {
    const int tag = iso ? k : -1;
    const fs::path ck = run_dir / "current" / ("instance_" + std::to_string(tag) + ".ckpt");
    PolicyParams p;
    bool have = false;
    if (result.resumed && fs::exists(ck)) {
      p = load_checkpoint<float>(ck, schema, checksum);
      have = true;
    } else {
      p = init_params<float>(schema, derive_seed(cfg.seed, {0x1417, static_cast<std::uint64_t>(k)}), cfg.hidden);
      p.meta.pool_checksum = checksum;
    }
    auto lcfg = cfg.learner;
    // Ring sampling is with replacement; the reuse cap only holds for the queue.
    lcfg.enforce_reuse = cfg.buffer.discipline == BufferDiscipline::Queue;
    auto l = std::make_unique<Learner>(std::move(p), lcfg, tag);
    const fs::path adam = run_dir / "current" / ("instance_" + std::to_string(tag) + ".adam");
    if (have && fs::exists(adam)) l->restore_optimizer_state(read_file(adam));
    learners.push_back(std::move(l));
    result.instances.push_back({tag, 0, 0, 0, {}, 0});
  }
  events.write({{"event", result.resumed ? "resume" : "start"}, {"lp_index", state.lp_index}, {"H", state.H.size()}});

  OsfpController controller(cfg.osfp, state);
  if (cfg.gate_override) controller.set_gate_predicate(cfg.gate_override);
  HistoricalCache historical(run_dir, schema, checksum);
  const int batch = cfg.batch_segments();

  while (controller.state().lp_index < cfg.lps) {
    const OsfpState lp_state = controller.state();
    const int lp = lp_state.lp_index;
    events.write({{"event", "lp_start"}, {"lp", lp}, {"H", lp_state.H.size()}});

    std::vector<SnapshotStore<PolicyParams>> stores(static_cast<std::size_t>(n_inst));
    for (int k = 0; k < n_inst; ++k) stores[static_cast<std::size_t>(k)].publish(learners[static_cast<std::size_t>(k)]->params());
    std::vector<std::unique_ptr<SegmentBuffer>> buffers;
    std::vector<SegmentBuffer*> buffer_ptrs;
    for (int k = 0; k < n_inst; ++k) {
      buffers.push_back(std::make_unique<SegmentBuffer>(cfg.buffer, steady_clock_seconds(),
                                                        derive_seed(cfg.seed, {0xb0f, static_cast<std::uint64_t>(lp),
                                                                               static_cast<std::uint64_t>(k)})));
      buffer_ptrs.push_back(buffers.back().get());
    }

    std::atomic<std::int64_t> steps{0}, matches{0}, hist_matches{0};
    const int n_actors = std::max(1, cfg.actors);
    std::vector<std::vector<SnapshotCache<PolicyParams>>> caches(static_cast<std::size_t>(n_actors));
    for (auto& c : caches) {
      for (auto& st : stores) c.emplace_back(st, cfg.snapshot_period);
    }

    auto produce = [&](int actor, std::uint64_t episode) {
      const std::uint64_t seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(lp), static_cast<std::uint64_t>(actor), episode});
      std::mt19937_64 rng(seed);
      const auto ms = assign_match_setup(cfg.osfp.cheat, rng);
      const int L = std::uniform_int_distribution<int>(0, 1)(rng);
      const auto pick = controller.sample_opponent(rng);
      EpisodeSetup es;
      es.seed = seed;
      es.heroes = ms.heroes;
      es.random_cb = ms.random_cb;
      es.random_cb_enabled = cfg.random_cb;
      // The learner seat sees n_target opponent picks, the other seat n_opponent.
      es.cheat_n[static_cast<std::size_t>(L)] = ms.cheat.n_target;
      es.cheat_n[static_cast<std::size_t>(1 - L)] = ms.cheat.n_opponent;
      auto& cache = caches[static_cast<std::size_t>(actor)];
      std::array<std::shared_ptr<const PolicyParams>, 2> hold;
      for (int seat = 0; seat < 2; ++seat) {
        const auto k = static_cast<std::size_t>(seat);
        const int inst = instance_of(iso, es.heroes[k]);
        es.tags[k] = iso ? inst : -1;
        es.train_seat[k] = seat == L || pick.self_play;
        if (es.train_seat[k]) {
          hold[k] = cache[static_cast<std::size_t>(inst)].get();
        } else {
          const auto& entry = lp_state.H[static_cast<std::size_t>(pick.index)];
          hold[k] = historical.get(entry.checkpoints[static_cast<std::size_t>(inst)]);
        }
        es.params[k] = hold[k].get();
      }
      std::uint64_t next_id = (static_cast<std::uint64_t>(lp) << 48) | (static_cast<std::uint64_t>(actor + 1) << 40) |
                              ((episode & 0xffffffull) << 12);
      auto ep = play_training_episode(encoder, es, cfg.learner.unroll, next_id);
      if (!pick.self_play) {
        const double sc = seat_score(ep.outcome, L);
        controller.record_result(pick.index, sc > 0.5 ? 1 : (sc < 0.5 ? -1 : 0));
        ++hist_matches;
      }
      ++matches;
      std::array<int, kNumHeroes> per_inst{};
      for (const auto& g : ep.segments) ++per_inst[static_cast<std::size_t>(iso ? g.learner_tag : 0)];
      for (int k = 0; k < n_inst; ++k) cache[static_cast<std::size_t>(k)].produced(per_inst[static_cast<std::size_t>(k)]);
      steps += ep.trained_steps;
      return std::move(ep.segments);
    };

    auto consume = [&](int k, const std::vector<SegmentPtr>& got) {
      std::vector<const TrajectorySegment*> ptrs;
      for (const auto& g : got) ptrs.push_back(g.get());
      auto& l = *learners[static_cast<std::size_t>(k)];
      const auto m = l.update(ptrs);
      auto& st = result.instances[static_cast<std::size_t>(k)];
      if (m.applied) {
        ++st.updates;
      } else {
        ++st.skipped_updates;
        events.write({{"event", "update_skipped"}, {"instance", st.tag}, {"error", m.error}});
      }
      st.segments_consumed += ptrs.size();
      for (const auto* g : ptrs) ++st.hero_segments[static_cast<std::size_t>(g->hero)];
      st.last_loss = m.loss.total;
      stores[static_cast<std::size_t>(k)].publish(l.params());
    };

    if (cfg.actors == 0) {
      std::uint64_t episode = 0;
      std::vector<double> credit(static_cast<std::size_t>(n_inst), 0.0);
      auto drain = [&](int k, bool to_capacity) {
        auto& b = *buffers[static_cast<std::size_t>(k)];
        if (cfg.buffer.discipline == BufferDiscipline::Queue) {
          const std::size_t limit = to_capacity ? static_cast<std::size_t>(cfg.buffer.capacity) : static_cast<std::size_t>(batch);
          while (b.size() >= limit) consume(k, b.pop_batch(batch));
        } else {
          while (credit[static_cast<std::size_t>(k)] >= batch) {
            credit[static_cast<std::size_t>(k)] -= batch;
            consume(k, b.pop_batch(batch));
          }
        }
      };
      while (steps < cfg.osfp.samples_per_lp) {
        auto segs = produce(0, episode++);
        for (auto& g : segs) {
          const int k = iso ? g.learner_tag : 0;
          drain(k, true);
          buffers[static_cast<std::size_t>(k)]->push(std::make_shared<const TrajectorySegment>(std::move(g)));
          credit[static_cast<std::size_t>(k)] += cfg.buffer.sample_reuse;
        }
        for (int k = 0; k < n_inst; ++k) drain(k, false);
      }
    } else {
      ActorPool actors(buffer_ptrs, cfg.actors, produce);
      actors.start();
      ActorGovernor gov;
      double last_gov = now_seconds();
      while (steps < cfg.osfp.samples_per_lp) {
        if (auto err = actors.error()) {
          actors.stop();
          std::rethrow_exception(err);
        }
        bool any = false;
        for (int k = 0; k < n_inst; ++k) {
          auto got = buffers[static_cast<std::size_t>(k)]->try_pop_batch(batch, n_inst == 1 ? 0.05 : 0.01);
          if (!got.empty()) {
            consume(k, got);
            any = true;
          }
        }
        if (!any) std::this_thread::yield();
        if (now_seconds() - last_gov > 5.0) {
          last_gov = now_seconds();
          const auto met = buffers[0]->metrics();
          events.write({{"event", "metrics"}, {"lp", lp}, {"line", nlohmann::json::parse(metrics_log_line(met, last_gov))}});
          if (cfg.governor) actors.set_active(gov.next_active(actors.active(), cfg.actors, met.c));
        }
      }
      actors.stop();
      if (auto err = actors.error()) std::rethrow_exception(err);
    }
    for (int k = 0; k < n_inst; ++k) {
      events.write({{"event", "metrics"}, {"lp", lp}, {"instance", iso ? k : -1},
                    {"line", nlohmann::json::parse(metrics_log_line(buffers[static_cast<std::size_t>(k)]->metrics(), now_seconds()))}});
    }

    // Freeze the learner(s) into the content-addressed pool first: an I/O
    // failure here aborts the LP before any state transition.
    PoolEntry entry;
    entry.lp = lp;
    for (int k = 0; k < n_inst; ++k) {
      const auto bytes = checkpoint_bytes(learners[static_cast<std::size_t>(k)]->params());
      char name[40];
      std::snprintf(name, sizeof name, "%016llx.ckpt", static_cast<unsigned long long>(fnv1a(bytes)));
      const fs::path rel = fs::path("pool") / name;
      if (!fs::exists(run_dir / rel)) write_atomic(run_dir / rel, bytes);
      entry.checkpoints.push_back(rel.generic_string());
    }
    const OsfpState before = controller.state();
    const auto decision = controller.end_of_lp_gate(entry);
    const OsfpState after = controller.state();

    nlohmann::json payoff = {{"lp", lp}, {"G", before.G}, {"C", before.C}, {"winrates", decision.winrates},
                             {"count_before", decision.count_before},
                             {"result", decision.result == GateResult::Added ? "added" : "not_added"},
                             {"forced", decision.forced}};
    write_atomic(run_dir / "payoff" / ("lp_" + std::to_string(lp) + ".json"), payoff.dump(2));
    for (int k = 0; k < n_inst; ++k) {
      const int tag = iso ? k : -1;
      const auto& l = *learners[static_cast<std::size_t>(k)];
      write_atomic(run_dir / "current" / ("instance_" + std::to_string(tag) + ".ckpt"), checkpoint_bytes(l.params()));
      write_atomic(run_dir / "current" / ("instance_" + std::to_string(tag) + ".adam"), l.optimizer_state());
    }
    // Commit point.
    write_atomic(run_dir / "osfp_state.json", nlohmann::json(after).dump(2));
    events.write({{"event", "gate"},
                  {"lp", lp},
                  {"result", decision.result == GateResult::Added ? "added" : "not_added"},
                  {"forced", decision.forced},
                  {"winrates", decision.winrates},
                  {"count", after.count},
                  {"H", after.H.size()},
                  {"steps", steps.load()},
                  {"matches", matches.load()}});
    LpSummary sum{lp, steps.load(), matches.load(), hist_matches.load(), decision};
    result.lps.push_back(sum);
    if (on_lp) on_lp(sum);
  }
  result.state = controller.state();
  events.write({{"event", "end"}, {"lp_index", result.state.lp_index}, {"H", result.state.H.size()}});
  return result;
}

}  // namespace ministone
