#pragma once

#include "mlirt/newton.hpp"

#include <Eigen/Dense>

#include <string>

namespace mlirt {

/// Weighted multinomial logistic regression with reference category 0.
///
/// features is n x p (one row per case), targets is n x K holding nonnegative
/// case weights per category, and coef is p x (K - 1) so that the linear
/// predictor of category k >= 1 is features.row(c) * coef.col(k - 1).
/// The objective is sum_c sum_k targets(c, k) * log pi_k(c).
double weighted_multinomial_loglik(const Eigen::MatrixXd& features,
                                   const Eigen::MatrixXd& targets, const Eigen::MatrixXd& coef);

/// Gradient of weighted_multinomial_loglik with respect to coef (p x (K - 1)).
Eigen::MatrixXd weighted_multinomial_gradient(const Eigen::MatrixXd& features,
                                              const Eigen::MatrixXd& targets,
                                              const Eigen::MatrixXd& coef);

struct MultinomialFit {
  Eigen::MatrixXd coef;
  NewtonReport report;
};

/// Newton-Raphson from `start` with step halving; the objective never
/// decreases across accepted steps.
MultinomialFit fit_weighted_multinomial_logit(const Eigen::MatrixXd& features,
                                              const Eigen::MatrixXd& targets,
                                              const Eigen::MatrixXd& start,
                                              const NewtonOptions& options,
                                              const std::string& block_id);

}  // namespace mlirt
