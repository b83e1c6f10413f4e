#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace htlm {

using Rng = std::mt19937_64;

// splitmix64 finalizer, used to derive independent seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

// Named sub-stream of a master seed ("train", "eval", "ablate", ...).
inline std::uint64_t substream_seed(std::uint64_t seed, std::string_view name,
                                    std::uint64_t index = 0) {
  return mix64(mix64(seed ^ fnv1a64(name)) + index);
}

// Distributions are written out by hand so streams are identical across
// standard library implementations.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  const auto idx = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
  return idx < n ? idx : n - 1;
}

inline bool bernoulli(Rng& rng, double p) { return uniform01(rng) < p; }

// Samples an index from an (already normalized) probability vector.
inline std::size_t sample_discrete(std::span<const double> probs, Rng& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    acc += probs[i];
    last_positive = i;
    if (u < acc) return i;
  }
  return last_positive;
}

}  // namespace htlm
