#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace msgcoop {

// SplitMix64 (Vigna's constants). Every stochastic choice in the project runs
// through this generator so that runs are reproducible from seeds alone.
//
// Draw discipline, relied on by checkpoint resume and by PRNG-replay tests:
//   - uniform01() consumes exactly one raw draw: (next() >> 11) * 2^-53, in [0, 1).
//   - gaussian() consumes exactly two raw draws (Box-Muller, cosine branch only;
//     u1 is shifted into (0, 1] so log never sees zero).
//   - below(bound) consumes exactly one raw draw: next() % bound.
// The full generator state is the single uint64 `state`, serialized as-is.
struct SplitMix64 {
  std::uint64_t state = 0;

  SplitMix64() = default;
  explicit SplitMix64(std::uint64_t seed) : state(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double gaussian() {
    const double u1 = static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;
    const double u2 = static_cast<double>(next() >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }

  std::uint64_t below(std::uint64_t bound) { return next() % bound; }
};

// FNV-1a over the bytes of `text`, starting from the offset basis XOR seed.
constexpr std::uint64_t fnv1a64(std::string_view text, std::uint64_t seed = 0) {
  std::uint64_t h = 14695981039346656037ULL ^ seed;
  for (const char ch : text) {
    h ^= static_cast<unsigned char>(ch);
    h *= 1099511628211ULL;
  }
  return h;
}

// Distinct named streams from one base seed (e.g. the shuffle stream is
// derive_seed(seed_data, "shuffle") so it never aliases dataset sampling).
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag) {
  return SplitMix64(base ^ fnv1a64(tag)).next();
}

}  // namespace msgcoop
