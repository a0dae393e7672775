#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace ealearn {

// All randomness in the library flows through this engine type. Seeds are
// always explicit; nothing reads OS entropy or the clock.
using Rng = std::mt19937_64;

// splitmix64 finalizer.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives an independent stream seed from a base seed and a list of tags
// (step index, purpose code, ...).
constexpr std::uint64_t derive_seed(std::uint64_t base,
                                    std::initializer_list<std::uint64_t> tags) {
  std::uint64_t h = mix_seed(base);
  for (std::uint64_t t : tags) h = mix_seed(h ^ mix_seed(t + 0x632be59bd9b4e019ULL));
  return h;
}

// Uniform integer in [0, n). n must be positive.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(rng);
}

inline double uniform_real(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace ealearn
