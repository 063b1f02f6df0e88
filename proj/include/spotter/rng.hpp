#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "spotter/common.hpp"

namespace spotter {

// Deterministic RNG. mt19937_64 output is fully specified by the standard,
// and sampling below avoids std::*_distribution (whose algorithms are
// implementation-defined), so streams are reproducible across toolchains.
class Rng {
 public:
  explicit Rng(u64 seed) : gen_(seed) {}

  u64 next() { return gen_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // standard normal via Box-Muller; two uniforms per draw, no cached spare
  double normal() {
    double u1 = static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  // unbiased integer in [0, n)
  u64 below(u64 n) {
    u64 threshold = (~n + 1) % n;  // 2^64 mod n
    for (;;) {
      u64 r = next();
      if (r >= threshold) return r % n;
    }
  }

  int index(i64 n) { return static_cast<int>(below(static_cast<u64>(n))); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (i64 i = static_cast<i64>(v.size()) - 1; i > 0; --i) {
      std::swap(v[i], v[below(static_cast<u64>(i + 1))]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

// Named seed streams. Evaluation-time and training-time perturbations must
// never share a stream; the ids below are recorded in run artifacts so the
// separation can be audited after the fact.
inline constexpr u64 kStreamDataset = 1;
inline constexpr u64 kStreamInit = 2;
inline constexpr u64 kStreamShuffle = 3;
inline constexpr u64 kStreamEvalPerturb = 4;
inline constexpr u64 kStreamTrainPerturb = 5;
inline constexpr u64 kStreamAttackSupport = 6;
inline constexpr u64 kStreamRandomLabel = 7;
inline constexpr u64 kStreamRelearn = 8;

inline u64 splitmix64(u64 x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Derives the seed of substream `index` of stream `stream` under `seed`.
inline u64 substream(u64 seed, u64 stream, u64 index = 0) {
  return splitmix64(splitmix64(seed ^ splitmix64(stream)) ^ splitmix64(index));
}

}  // namespace spotter
