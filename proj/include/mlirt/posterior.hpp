#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace mlirt {

/// E-step output. Group h, student i (within group), class v, type u.
struct PosteriorTables {
  Eigen::MatrixXd z_hu;                               // H x k_U, p(U_h = u | data)
  std::vector<std::vector<Eigen::MatrixXd>> z_joint;  // [h][i]: k_U x k_V, p(U_h = u, V_hi = v | data)
  std::vector<std::vector<Eigen::VectorXd>> z_hiv;    // [h][i]: k_V, p(V_hi = v | data)
  double loglik = 0.0;                                // marginal log-likelihood at the E-step parameters
};

/// Normalization and consistency violations larger than tol; empty when the
/// tables are coherent.
std::vector<std::string> check_posteriors(const PosteriorTables& post, double tol = 1e-10);

}  // namespace mlirt
