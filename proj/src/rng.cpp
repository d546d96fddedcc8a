#include "mlirt/rng.hpp"

#include <cmath>
#include <numbers>

namespace mlirt {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(seed ^ splitmix64(index + 0x9E3779B97F4A7C15ULL));
}

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
  const double span = static_cast<double>(hi - lo + 1);
  auto k = static_cast<std::int64_t>(std::floor(uniform() * span));
  if (k > hi - lo) k = hi - lo;
  return lo + k;
}

std::size_t Rng::categorical(const Eigen::VectorXd& probs) {
  const double u = uniform();
  double acc = 0.0;
  for (Eigen::Index k = 0; k < probs.size(); ++k) {
    acc += probs(k);
    if (u < acc) return static_cast<std::size_t>(k);
  }
  // rounding left u above the cumulative sum: last category with positive mass
  for (Eigen::Index k = probs.size(); k-- > 0;)
    if (probs(k) > 0.0) return static_cast<std::size_t>(k);
  return 0;
}

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace mlirt
