#pragma once

// Test-only reference implementations. Nothing here calls the library code it
// is used to check: probabilities, mixtures and objectives are recomputed from
// the model definition with plain loops.

#include "mlirt/dataset.hpp"
#include "mlirt/model.hpp"
#include "mlirt/posterior.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

using mlirt::ModelSpec;
using mlirt::ParameterSet;
using mlirt::ResponseDataset;

double success_prob(const ModelSpec& spec, const ParameterSet& p, std::size_t item,
                    std::size_t cls);

std::vector<double> class_weights(const ParameterSet& p, const Eigen::VectorXd& x, std::size_t u);
std::vector<double> type_weights(const ParameterSet& p, const Eigen::VectorXd& w);

/// Sum over groups of log sum over every (u, v_1..v_n) of the joint probability.
double enumerated_loglik(const ResponseDataset& data, const ParameterSet& p, const ModelSpec& spec);

/// Single-level latent class IRT likelihood: students independent, class
/// weights softmax(0, zeta0_v(0, :)), grouping ignored.
double single_level_loglik(const ResponseDataset& data, const ParameterSet& p,
                           const ModelSpec& spec);

/// Expected complete-data log-likelihood terms at posteriors `post`.
double item_objective(const ResponseDataset& data, const mlirt::PosteriorTables& post,
                      const ParameterSet& p, const ModelSpec& spec);
double student_weight_objective(const ResponseDataset& data, const mlirt::PosteriorTables& post,
                                const ParameterSet& p, const ModelSpec& spec);
double school_weight_objective(const ResponseDataset& data, const mlirt::PosteriorTables& post,
                               const ParameterSet& p, const ModelSpec& spec);

/// Posterior table invariants recomputed from the definitions; returns the
/// largest violation.
double posterior_violation(const mlirt::PosteriorTables& post);

using Objective = std::function<double(const Eigen::VectorXd&)>;

Eigen::VectorXd central_gradient(const Objective& f, const Eigen::VectorXd& x, double step);

struct MaximizeResult {
  Eigen::VectorXd x;
  double value = 0.0;
  std::size_t iterations = 0;
};

/// BFGS with central-difference gradients and backtracking line search.
MaximizeResult bfgs_maximize(const Objective& f, Eigen::VectorXd x0, std::size_t max_iter = 500,
                             double grad_tol = 1e-7);

/// Free coordinates of the three M-step blocks, in a fixed order. Item block:
/// xi, then non-reference intercepts -gamma * beta, then non-reference gamma
/// (2PL); under LC the logits of lc_prob.
Eigen::VectorXd pack_items(const ParameterSet& p, const ModelSpec& spec);
void unpack_items(const Eigen::VectorXd& v, ParameterSet& p, const ModelSpec& spec);
Eigen::VectorXd pack_student_weights(const ParameterSet& p);
void unpack_student_weights(const Eigen::VectorXd& v, ParameterSet& p);
Eigen::VectorXd pack_school_weights(const ParameterSet& p);
void unpack_school_weights(const Eigen::VectorXd& v, ParameterSet& p);

struct InstanceShape {
  std::size_t groups = 2;
  std::size_t min_students = 1;
  std::size_t max_students = 3;
  std::size_t items = 3;
  std::size_t dims = 1;
  std::size_t k_v = 2;
  std::size_t k_u = 2;
  std::size_t m_v = 1;
  std::size_t m_u = 1;
  mlirt::Parameterization parameterization = mlirt::Parameterization::TwoPL;
  double missing_rate = 0.0;
};

/// Random spec of the given shape (items spread round-robin over dims).
ModelSpec make_spec(const InstanceShape& shape);
/// Random parameters satisfying the identifiability constraints.
ParameterSet random_params(const ModelSpec& spec, std::mt19937_64& rng);
/// Random responses and covariates (responses uniform, not model-based).
ResponseDataset random_data(const InstanceShape& shape, std::mt19937_64& rng);
/// Covariates as in random_data, responses drawn from the model at p.
ResponseDataset model_data(const InstanceShape& shape, const ModelSpec& spec,
                           const ParameterSet& p, std::mt19937_64& rng);

}  // namespace oracle
