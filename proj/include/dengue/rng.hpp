#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace dengue {

/// Seeded random source. The engine is std::mt19937_64, whose output stream
/// is fixed by the standard; every derived distribution is computed here
/// rather than through <random> distributions, whose algorithms vary between
/// standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Rejection sampling, so unbiased.
  std::uint64_t below(std::uint64_t n);

  /// Standard normal via the Box-Muller transform.
  double normal();

  double normal(double mean, double sd) { return mean + sd * normal(); }

  /// Poisson draw. Product-of-uniforms for small rates, rounded normal
  /// approximation above 500.
  std::int64_t poisson(double lambda);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Seed for a named subsystem: FNV-1a of the label mixed with the base seed.
/// Stable across platforms and independent of call order.
std::uint64_t derive_seed(std::uint64_t base, std::string_view label);

}  // namespace dengue
