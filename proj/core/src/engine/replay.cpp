#include "ministone/engine/replay.hpp"

#include <fstream>
#include <sstream>

namespace ministone {

namespace {

constexpr std::string_view kMagic = "ministone-replay";
constexpr int kVersion = 1;

[[noreturn]] void bad(const std::string& what) { throw std::invalid_argument("malformed replay: " + what); }

std::string expect_key(std::istringstream& in, std::string_view key) {
  std::string k;
  if (!(in >> k) || k != key) bad("expected '" + std::string(key) + "'");
  return k;
}

}  // namespace

std::string Replay::to_text() const {
  std::ostringstream os;
  os << kMagic << ' ' << kVersion << '\n';
  os << "pool " << checksum_hex(pool_checksum) << '\n';
  os << "heroes " << to_string(heroes[0]) << ' ' << to_string(heroes[1]) << '\n';
  os << "seed " << seed << '\n';
  os << "cheat " << cheat_n[0] << ' ' << cheat_n[1] << '\n';
  for (int p = 0; p < 2; ++p) {
    os << "preset" << p;
    if (preset_decks[p]) {
      os << ' ' << preset_decks[p]->size();
      for (CardId c : *preset_decks[p]) os << ' ' << c;
    } else {
      os << " -";
    }
    os << '\n';
  }
  os << "actions " << actions.size() << '\n';
  for (std::size_t i = 0; i < actions.size(); ++i) {
    os << actions[i].index() << ((i + 1) % 32 == 0 || i + 1 == actions.size() ? '\n' : ' ');
  }
  return os.str();
}

Replay Replay::parse(std::string_view text) {
  std::istringstream in{std::string(text)};
  Replay r;
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != kMagic) bad("missing header");
  if (version != kVersion) bad("unsupported version " + std::to_string(version));
  std::string tok;
  expect_key(in, "pool");
  if (!(in >> tok)) bad("pool checksum");
  r.pool_checksum = parse_checksum_hex(tok);
  expect_key(in, "heroes");
  std::string h0, h1;
  if (!(in >> h0 >> h1)) bad("heroes");
  r.heroes = {hero_from_string(h0), hero_from_string(h1)};
  expect_key(in, "seed");
  if (!(in >> r.seed)) bad("seed");
  expect_key(in, "cheat");
  if (!(in >> r.cheat_n[0] >> r.cheat_n[1])) bad("cheat");
  for (int p = 0; p < 2; ++p) {
    expect_key(in, "preset" + std::to_string(p));
    if (!(in >> tok)) bad("preset");
    if (tok == "-") continue;
    std::size_t n = std::stoul(tok);
    std::vector<CardId> deck(n);
    for (auto& c : deck) {
      int v = 0;
      if (!(in >> v)) bad("preset card");
      c = static_cast<CardId>(v);
    }
    r.preset_decks[p] = std::move(deck);
  }
  expect_key(in, "actions");
  std::size_t n = 0;
  if (!(in >> n)) bad("action count");
  r.actions.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    int a = 0;
    if (!(in >> a)) bad("truncated action list");
    if (a < 0 || a >= action::kTableSize) bad("action id out of range");
    r.actions.emplace_back(a);
  }
  if (in >> tok) bad("trailing data");
  return r;
}

Replay Replay::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open replay " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void Replay::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write replay " + path.string());
  out << to_text();
}

GameState Replay::simulate(const Engine& engine, std::vector<GameState>* trace) const {
  if (engine.pool().checksum() != pool_checksum) {
    throw std::invalid_argument("replay pool checksum " + checksum_hex(pool_checksum) + " does not match engine pool " +
                                checksum_hex(engine.pool().checksum()));
  }
  MatchOptions opts;
  opts.preset_decks = preset_decks;
  GameState s = engine.new_match(heroes[0], heroes[1], seed, opts);
  if (trace) trace->push_back(s);
  for (ActionId a : actions) {
    engine.apply_in_place(s, a);
    if (trace) trace->push_back(s);
  }
  return s;
}

}  // namespace ministone
