#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace gic {

// Counter-based pseudo-random generator (SplitMix64).
//
// Draw i (counting from 1) is mix64(seed + i * 0x9E3779B97F4A7C15), where
// mix64 is the 64-bit finalizer below. The state is just (seed, counter),
// so streams are trivially portable across languages and two generators
// with the same seed always produce the same sequence.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : seed_(seed) {}

  static std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
  }

  // Derives an independent child seed. fold(s, t) = mix64(s ^ mix64(t + gamma)).
  static std::uint64_t fold(std::uint64_t seed, std::uint64_t tag) {
    return mix64(seed ^ mix64(tag + 0x9E3779B97F4A7C15ULL));
  }

  // Folds a list of tags in order; used to key per-sample / per-epoch streams.
  static std::uint64_t fold_all(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
    std::uint64_t s = seed;
    for (std::uint64_t t : tags) s = fold(s, t);
    return s;
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64() {
    ++counter_;
    return mix64(seed_ + counter_ * 0x9E3779B97F4A7C15ULL);
  }

  // Uniform in [0,1), 53 mantissa bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0,n). Modulo reduction; bias is negligible for the
  // small n used here and keeps the mapping easy to reproduce elsewhere.
  std::uint64_t uniform_int(std::uint64_t n) { return next_u64() % n; }

  bool coin(double p) { return uniform() < p; }

  // Standard normal via Box-Muller. Consumes exactly two draws; no caching,
  // so the consumption count per call is fixed.
  double normal() {
    double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; // (0,1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  // Normal truncated to [-2,2] standard deviations, by rejection.
  double truncated_normal(double sd) {
    double z = normal();
    while (z < -2.0 || z > 2.0) z = normal();
    return sd * z;
  }

private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

} // namespace gic
