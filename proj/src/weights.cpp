#include "mlirt/weights.hpp"

#include "mlirt/numeric.hpp"

#include <stdexcept>
#include <string>

namespace mlirt {

Eigen::VectorXd log_softmax_with_reference(const Eigen::VectorXd& contrast_logits) {
  Eigen::VectorXd full(contrast_logits.size() + 1);
  full(0) = 0.0;
  full.tail(contrast_logits.size()) = contrast_logits;
  return full.array() - log_sum_exp(full);
}

Eigen::VectorXd student_class_log_weights(const ParameterSet& params, const StudentCovariates& x,
                                          std::size_t u) {
  if (u >= static_cast<std::size_t>(params.zeta0_v.rows()))
    throw std::out_of_range("school type index " + std::to_string(u) + " out of range");
  if (x.size() != params.zeta1_v.cols())
    throw std::invalid_argument("student covariate vector has length " +
                                std::to_string(x.size()) + ", expected " +
                                std::to_string(params.zeta1_v.cols()));
  Eigen::VectorXd eta = params.zeta0_v.row(static_cast<Eigen::Index>(u)).transpose();
  if (x.size() > 0) eta += params.zeta1_v * x;
  return log_softmax_with_reference(eta);
}

Eigen::VectorXd student_class_weights(const ParameterSet& params, const StudentCovariates& x,
                                      std::size_t u) {
  return student_class_log_weights(params, x, u).array().exp();
}

Eigen::VectorXd school_type_log_weights(const ParameterSet& params, const SchoolCovariates& w) {
  if (w.size() != params.zeta1_u.cols())
    throw std::invalid_argument("school covariate vector has length " +
                                std::to_string(w.size()) + ", expected " +
                                std::to_string(params.zeta1_u.cols()));
  Eigen::VectorXd eta = params.zeta0_u;
  if (w.size() > 0) eta += params.zeta1_u * w;
  return log_softmax_with_reference(eta);
}

Eigen::VectorXd school_type_weights(const ParameterSet& params, const SchoolCovariates& w) {
  return school_type_log_weights(params, w).array().exp();
}

}  // namespace mlirt
