#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>

namespace mlirt {

/// log(1 / (1 + exp(-z))) without overflow for large |z|.
inline double log_sigmoid(double z) {
  if (z >= 0.0) return -std::log1p(std::exp(-z));
  return z - std::log1p(std::exp(z));
}

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

/// Max-shifted log(sum(exp(values))). Returns -inf for an empty or all -inf input.
template <typename Derived>
double log_sum_exp(const Eigen::DenseBase<Derived>& values) {
  if (values.size() == 0) return -std::numeric_limits<double>::infinity();
  const double m = values.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((values.derived().array() - m).exp().sum());
}

}  // namespace mlirt
