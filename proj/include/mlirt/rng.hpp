#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>

namespace mlirt {

/// SplitMix64 finalizer.
std::uint64_t splitmix64(std::uint64_t x);

/// Seed of substream `index` derived from `seed`:
/// splitmix64(seed ^ splitmix64(index + 0x9E3779B97F4A7C15)).
/// Used per school when simulating and per start when fitting, so results do
/// not depend on evaluation order or thread count.
std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index);

/// Portable random source. The engine is std::mt19937_64, whose output
/// sequence is fixed by the C++ standard; every variate below is derived from
/// raw engine output with explicit arithmetic so sequences are identical on
/// every platform (std distributions are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  bool bernoulli(double p) { return uniform() < p; }
  /// Inverse-CDF draw from nonnegative weights summing to 1.
  std::size_t categorical(const Eigen::VectorXd& probs);
  /// Standard normal by the Box-Muller transform (one value per call).
  double normal();

 private:
  std::mt19937_64 engine_;
};

}  // namespace mlirt
