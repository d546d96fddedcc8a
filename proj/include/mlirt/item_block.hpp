#pragma once

#include "mlirt/dataset.hpp"
#include "mlirt/model.hpp"
#include "mlirt/newton.hpp"
#include "mlirt/posterior.hpp"

#include <Eigen/Dense>

namespace mlirt {

/// Posterior-weighted binomial cells: for class v and item j, trials(v, j) is
/// the summed class posterior over students who answered j, successes(v, j)
/// the same sum restricted to correct answers.
struct ItemStats {
  Eigen::MatrixXd trials;     // k_V x r
  Eigen::MatrixXd successes;  // k_V x r
};

ItemStats accumulate_item_stats(const ResponseDataset& data, const PosteriorTables& post,
                                std::size_t k_v, std::size_t r);

/// Expected complete-data log-likelihood of the response part, as a function
/// of beta, gamma and xi (or lc_prob).
double item_block_objective(const ItemStats& stats, const ModelSpec& spec,
                            const ParameterSet& params);

/// Maximizes item_block_objective over the item and ability parameters.
/// Logistic parameterizations run a damped Newton-Raphson per dimension with
/// reference items held at beta = 0, gamma = 1; LC uses the closed-form
/// weighted proportions clamped to [1e-8, 1 - 1e-8].
ParameterSet fit_item_block(const ItemStats& stats, const ModelSpec& spec,
                            const ParameterSet& start, const NewtonOptions& options);

}  // namespace mlirt
