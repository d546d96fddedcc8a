#pragma once

#include "mlirt/model.hpp"

#include <Eigen/Dense>

namespace mlirt {

using StudentCovariates = Eigen::VectorXd;  // m_V values, categorical already expanded
using SchoolCovariates = Eigen::VectorXd;   // m_U values

/// Log-weights of a multinomial logit with an implicit zero logit for the
/// reference category (index 0). Max-shifted; safe for |logit| up to ~700.
Eigen::VectorXd log_softmax_with_reference(const Eigen::VectorXd& contrast_logits);

/// log pi_{v|u}(x) for v = 0..k_V-1.
Eigen::VectorXd student_class_log_weights(const ParameterSet& params, const StudentCovariates& x,
                                          std::size_t u);
Eigen::VectorXd student_class_weights(const ParameterSet& params, const StudentCovariates& x,
                                      std::size_t u);

/// log pi_u(w) for u = 0..k_U-1.
Eigen::VectorXd school_type_log_weights(const ParameterSet& params, const SchoolCovariates& w);
Eigen::VectorXd school_type_weights(const ParameterSet& params, const SchoolCovariates& w);

}  // namespace mlirt
