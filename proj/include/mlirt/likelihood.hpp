#pragma once

#include "mlirt/dataset.hpp"
#include "mlirt/model.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace mlirt {

/// log p(Y_j = 1 | class v) and log p(Y_j = 0 | class v), each k_V x r.
struct ItemLogProbs {
  Eigen::MatrixXd log_p1;
  Eigen::MatrixXd log_p0;
};

ItemLogProbs item_log_probs(const ModelSpec& spec, const ParameterSet& params);

/// Sum over observed items of log p(y_j | v); missing items contribute 0.
double student_conditional_loglik(const std::vector<Response>& y, std::size_t cls,
                                  const ItemLogProbs& table);
double student_conditional_loglik(const std::vector<Response>& y, std::size_t cls,
                                  const ParameterSet& params, const ModelSpec& spec);

/// k_V-vector of conditional log-likelihoods for one student.
Eigen::VectorXd student_class_logliks(const std::vector<Response>& y, const ItemLogProbs& table);

/// log rho_h(u): the school's likelihood given its type.
double group_conditional_loglik(const Group& group, std::size_t type, const ParameterSet& params,
                                const ModelSpec& spec);

/// Marginal log-likelihood of the multilevel model. Groups may be evaluated on
/// `threads` workers; the reduction over groups runs in group order.
double marginal_loglik(const ResponseDataset& data, const ParameterSet& params,
                       const ModelSpec& spec, unsigned threads = 1);

struct EnumerationCapExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Reference evaluation by explicit enumeration of every joint latent
/// configuration (u, v_1..v_n) of each group, in linear arithmetic. Throws
/// EnumerationCapExceeded if the total number of configurations exceeds cap.
double brute_force_loglik(const ResponseDataset& data, const ParameterSet& params,
                          const ModelSpec& spec, double cap = 1e6);

}  // namespace mlirt
