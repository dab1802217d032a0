#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace messy {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed for sub-stream `path` of `seed` (order matters).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = mix64(seed);
  for (auto p : path) s = mix64(s ^ mix64(p + 0x632be59bd9b4e019ULL));
  return s;
}

/// Counter-based uniform in [0, 1): the i-th draw of stream `seed`.
inline double counter_uniform(std::uint64_t seed, std::uint64_t i) {
  const std::uint64_t bits = mix64(seed ^ mix64(i));
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

}  // namespace messy
