#pragma once

#include <cstdint>
#include <initializer_list>

namespace ministone {

// SplitMix64 finalizer; used to derive independent, reproducible seeds from
// (base seed, index...) tuples.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = mix_seed(base);
  for (auto p : parts) h = mix_seed(h ^ mix_seed(p + 0x632be59bd9b4e019ull));
  return h;
}

}  // namespace ministone
