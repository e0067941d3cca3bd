#pragma once

#include <cstdint>

#include "squasplat/scene.hpp"

namespace squasplat {

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Counter-based generator: the i-th draw (i = 0, 1, ...) for a seed is
// mix64(seed + (i + 1) * kGoldenGamma), i.e. the SplitMix64 sequence. Any
// implementation reproduces a stream from (seed, counter) alone.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t next() { return mix64(seed_ + (++counter_) * kGoldenGamma); }

  // 53-bit uniform in [0, 1).
  double uniform() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // next() mod n; n > 0.
  std::uint64_t below(std::uint64_t n) { return next() % n; }

  double normal();
  Vec3 unit_vector();
  Vec4 unit_quaternion();

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

// Seed for an independent stream derived from a base seed and a tag.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  return mix64(seed ^ mix64(tag + kGoldenGamma));
}

}  // namespace squasplat
