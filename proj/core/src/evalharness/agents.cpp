#include "ministone/evalharness/agents.hpp"

#include <filesystem>
#include <stdexcept>

#include "ministone/osfp/trainer.hpp"
#include "ministone/policy/checkpoint.hpp"
#include "ministone/policy/sampler.hpp"

namespace ministone {

ActionId UniformRandomAgent::act(const SeatView& view, std::mt19937_64& rng) const {
  const auto legal = view.encoder.engine().legal_actions(view.state);
  std::uniform_int_distribution<std::size_t> pick(0, legal.size() - 1);
  return legal[pick(rng)];
}

namespace {

int enemy_health(const GameState& s, int enemy) {
  return s.players[static_cast<std::size_t>(enemy)].hero_hp + s.players[static_cast<std::size_t>(enemy)].armor;
}

}  // namespace

int GreedyDamageAgent::damage_of(const Engine& engine, const GameState& state, ActionId a) {
  const int me = state.active;
  const int enemy = 1 - me;
  const int before = enemy_health(state, enemy);
  GameState next = state;
  engine.apply_in_place(next, a);
  int dmg = before - std::max(0, enemy_health(next, enemy));
  if (next.stage == Stage::Battle && next.active == me && next.pending && !state.pending) {
    int best = 0;
    for (ActionId t : engine.legal_actions(next)) {
      GameState after = next;
      engine.apply_in_place(after, t);
      best = std::max(best, before - std::max(0, enemy_health(after, enemy)));
    }
    dmg = best;
  }
  return dmg;
}

ActionId GreedyDamageAgent::act(const SeatView& view, std::mt19937_64&) const {
  const auto& engine = view.encoder.engine();
  const auto legal = engine.legal_actions(view.state);
  if (view.state.stage != Stage::Battle) return legal.front();
  ActionId best = legal.front();
  int best_dmg = -1;
  for (ActionId a : legal) {
    const int d = damage_of(engine, view.state, a);
    if (d > best_dmg) {
      best_dmg = d;
      best = a;
    }
  }
  return best;
}

PolicyAgent::PolicyAgent(std::shared_ptr<const PolicyParams> params, Mode mode, std::string name)
    : params_(std::move(params)), mode_(mode), name_(std::move(name)) {
  if (!params_) throw std::invalid_argument("policy agent needs parameters");
}

ActionId PolicyAgent::act(const SeatView& view, std::mt19937_64& rng) const {
  const auto obs = view.encoder.encode(view.state, view.seat, view.cheat_n);
  if (mode_ == Mode::Greedy) return greedy_action(*params_, obs).action;
  return sample_action(*params_, obs, rng).action;
}

PerHeroAgent::PerHeroAgent(std::array<AgentPtr, kNumHeroes> by_hero, std::string name)
    : by_hero_(std::move(by_hero)), name_(std::move(name)) {
  for (const auto& a : by_hero_) {
    if (!a) throw std::invalid_argument("per-hero agent needs an agent for every hero");
  }
}

ActionId PerHeroAgent::act(const SeatView& view, std::mt19937_64& rng) const {
  const Hero h = view.state.players[static_cast<std::size_t>(view.seat)].hero;
  return by_hero_[static_cast<std::size_t>(h)]->act(view, rng);
}

AgentPtr make_agent(const std::string& spec, const Encoder& encoder) {
  if (spec == "random") return std::make_shared<UniformRandomAgent>();
  if (spec == "greedy") return std::make_shared<GreedyDamageAgent>();
  std::string path = spec;
  auto mode = PolicyAgent::Mode::Sample;
  if (const auto at = spec.rfind('@'); at != std::string::npos) {
    const auto suffix = spec.substr(at + 1);
    if (suffix == "greedy") {
      mode = PolicyAgent::Mode::Greedy;
    } else if (suffix != "sample") {
      throw std::invalid_argument("unknown policy mode '" + suffix + "' in agent spec " + spec);
    }
    path = spec.substr(0, at);
  }
  namespace fs = std::filesystem;
  if (!fs::exists(path)) throw std::invalid_argument("agent spec " + spec + ": no such checkpoint or run directory");
  const auto checksum = encoder.engine().pool().checksum();
  const std::string name = fs::path(path).filename().string() + (mode == PolicyAgent::Mode::Greedy ? "@greedy" : "");
  if (!fs::is_directory(path)) {
    auto p = std::make_shared<const PolicyParams>(load_checkpoint<float>(path, encoder.schema(), checksum));
    return std::make_shared<PolicyAgent>(std::move(p), mode, name);
  }
  auto params = load_run_params(path, encoder.schema(), checksum);
  if (params.size() == 1) {
    return std::make_shared<PolicyAgent>(std::make_shared<const PolicyParams>(std::move(params[0])), mode, name);
  }
  std::array<AgentPtr, kNumHeroes> by_hero;
  for (std::size_t k = 0; k < by_hero.size(); ++k) {
    by_hero[k] = std::make_shared<PolicyAgent>(std::make_shared<const PolicyParams>(std::move(params.at(k))), mode, name);
  }
  return std::make_shared<PerHeroAgent>(by_hero, name);
}

}  // namespace ministone
