// echopick - multi-echo LiDAR denoising toolkit
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>

namespace echopick {

// Deterministic RNG wrapper. All randomness in the toolkit flows through
// seeded instances of this class so that identical seeds reproduce identical
// outputs bit for bit. Uniform variates are derived from the raw 64-bit
// stream directly instead of std::uniform_real_distribution, whose output is
// implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform double in [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    return n == 0 ? 0 : engine_() % n;
  }

 private:
  std::mt19937_64 engine_;
};

// Derives an independent substream seed from a base seed and stream indices.
// Used to give every beam / scan / epoch its own reproducible stream.
// SplitMix64 finalizer; good avalanche behavior for sequential indices.
inline std::uint64_t substream_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ull * (a + 1) + 0xbf58476d1ce4e5b9ull * (b + 1);
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ull;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebull;
  z ^= z >> 31;
  return z;
}

}  // namespace echopick
