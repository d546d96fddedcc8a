#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mlirt {

struct NewtonOptions {
  std::size_t max_iter = 50;
  double tol = 1e-9;  // max-abs accepted step
  std::size_t max_halvings = 40;
};

struct NewtonReport {
  double objective = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

/// A Newton block whose objective is non-finite at the start or after every
/// halving of the step.
struct NewtonFailure : std::runtime_error {
  NewtonFailure(std::string block_id, const std::string& what)
      : std::runtime_error(block_id + ": " + what), block(std::move(block_id)) {}
  std::string block;
};

/// Solves (A + lambda I) x = b for the smallest lambda in {0, c, 10c, ...}
/// that makes the left-hand side positive definite.
Eigen::VectorXd damped_solve(const Eigen::MatrixXd& a, const Eigen::VectorXd& b);

}  // namespace mlirt
