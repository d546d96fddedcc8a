#pragma once

#include "mlirt/dataset.hpp"
#include "mlirt/item_block.hpp"
#include "mlirt/model.hpp"
#include "mlirt/newton.hpp"
#include "mlirt/posterior.hpp"

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

namespace mlirt {

struct FitControls {
  std::size_t max_iter = 5000;
  double tol_loglik = 1e-8;
  double tol_param = 1e-6;
  std::size_t newton_max_iter = 50;
  double newton_tol = 1e-9;
  std::size_t n_starts = 10;
  std::uint64_t seed = 0;
  unsigned threads = 1;

  NewtonOptions newton() const { return {newton_max_iter, newton_tol, 40}; }
};

/// Throws std::invalid_argument unless every tolerance is positive and the
/// counts are at least 1.
void check_controls(const FitControls& controls);

struct FitResult {
  ParameterSet params;
  double loglik = 0.0;
  std::vector<double> trace;  // log-likelihood at the start and after every M-step
  std::size_t n_iter = 0;
  bool converged = false;
  std::size_t start_index = 0;
};

/// Exact posteriors of school types and student classes at `params`, computed
/// in log space. Throws std::runtime_error if the likelihood is not finite.
PosteriorTables e_step(const ResponseDataset& data, const ParameterSet& params,
                       const ModelSpec& spec, unsigned threads = 1);

/// Case layout for the student-class weight regression: one row per
/// (student, type) with features [one-hot(type), x] and targets z_joint.
struct RegressionCases {
  Eigen::MatrixXd features;
  Eigen::MatrixXd targets;
};
RegressionCases student_weight_cases(const ResponseDataset& data, const PosteriorTables& post,
                                     const ModelSpec& spec);
/// One row per school with features [1, w] and targets z_hu.
RegressionCases school_weight_cases(const ResponseDataset& data, const PosteriorTables& post,
                                    const ModelSpec& spec);

/// Coefficient layout of the two weight regressions (see multinomial_logit.hpp).
Eigen::MatrixXd pack_student_weight_coef(const ParameterSet& params);
void unpack_student_weight_coef(const Eigen::MatrixXd& coef, ParameterSet& params);
Eigen::MatrixXd pack_school_weight_coef(const ParameterSet& params);
void unpack_school_weight_coef(const Eigen::MatrixXd& coef, ParameterSet& params);

/// Individual M-step blocks. Each maximizes its own term of the expected
/// complete-data log-likelihood; the other parameters are copied from params.
ParameterSet m_step_items(const ResponseDataset& data, const PosteriorTables& post,
                          const ParameterSet& params, const ModelSpec& spec,
                          const FitControls& controls);
ParameterSet m_step_student_weights(const ResponseDataset& data, const PosteriorTables& post,
                                    const ParameterSet& params, const ModelSpec& spec,
                                    const FitControls& controls);
ParameterSet m_step_school_weights(const ResponseDataset& data, const PosteriorTables& post,
                                   const ParameterSet& params, const ModelSpec& spec,
                                   const FitControls& controls);

/// All three blocks.
ParameterSet m_step(const ResponseDataset& data, const PosteriorTables& post,
                    const ParameterSet& params, const ModelSpec& spec,
                    const FitControls& controls);

enum class InitStrategy { Deterministic, Random };

/// Starting values. Deterministic: beta from the observed item logits anchored
/// at each reference item, gamma = 1, xi on an equally spaced grid over
/// [-k_V/2, k_V/2], zeta = 0. Random adds seeded uniform perturbations
/// (xi +-1, beta +-0.5, zeta intercepts +-1).
ParameterSet initialize(const ResponseDataset& data, const ModelSpec& spec, InitStrategy strategy,
                        std::uint64_t seed);

/// Called after every E-step with the posteriors and the parameters they were
/// computed at.
using EStepObserver = std::function<void(const PosteriorTables&, const ParameterSet&)>;

/// EM from `init`. Stops when the log-likelihood change falls below
/// tol_loglik, the parameter change below tol_param, or at max_iter
/// (converged = false).
FitResult fit(const ResponseDataset& data, const ModelSpec& spec, const FitControls& controls,
              const ParameterSet& init, const EStepObserver& observer = {});

struct AllStartsFailed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One deterministic start plus n_starts - 1 random ones, start k seeded by
/// substream_seed(controls.seed, k). Returns the highest log-likelihood;
/// ties (within 1e-8) go to the lowest start index.
FitResult multistart_fit(const ResponseDataset& data, const ModelSpec& spec,
                         const FitControls& controls, const EStepObserver& observer = {});

}  // namespace mlirt
