#pragma once

#include "mlirt/dataset.hpp"
#include "mlirt/em.hpp"
#include "mlirt/model.hpp"
#include "mlirt/posterior.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace mlirt {

/// -2 loglik + log(n) n_par.
double bic(double loglik, std::size_t n_par, std::size_t n);

/// Sample size convention for BIC.
struct BicSampleSize {
  enum class Kind { Students, Schools, Explicit } kind = Kind::Students;
  std::size_t value = 0;  // used when kind == Explicit

  std::size_t resolve(const ResponseDataset& data) const;
  std::string describe() const;
  /// "students", "schools" or a positive integer. Throws std::invalid_argument.
  static BicSampleSize parse(const std::string& text);
};

struct SweepRow {
  std::size_t k_u = 0;
  double loglik = 0.0;
  std::size_t n_par = 0;
  double bic = 0.0;
  bool converged = false;
  std::string error;  // non-empty when the fit failed
  std::optional<FitResult> fit;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::size_t chosen_k_u = 0;
  std::size_t bic_n = 0;
  std::vector<std::string> warnings;
};

/// Index of the chosen entry under the "stop at the first BIC increase, keep
/// the previous value" rule. Failed entries (nullopt) are skipped. Returns
/// nullopt when no entry succeeded.
std::optional<std::size_t> choose_by_stopping_rule(const std::vector<std::optional<double>>& bics);

/// Fits k_U = each value of k_u_values in order (base_spec.k_u is ignored) and
/// stops after the first BIC increase. Fit failures are recorded per row.
/// Each k_U uses seed substream_seed(controls.seed, k_U).
SweepResult sweep_school_types(const ResponseDataset& data, const ModelSpec& base_spec,
                               const std::vector<std::size_t>& k_u_values,
                               const FitControls& controls, const BicSampleSize& bic_n);

struct Assignment {
  std::size_t label = 0;  // zero-based class or type
  double posterior = 0.0;
};

/// First index of the maximum entry.
std::size_t argmax_lowest(const Eigen::VectorXd& values);

std::vector<std::vector<Assignment>> assign_students(const PosteriorTables& post);
std::vector<Assignment> assign_schools(const PosteriorTables& post);

/// Componentwise mean of equally sized weight vectors.
Eigen::VectorXd average_weights(const std::vector<Eigen::VectorXd>& weights);

struct AverageWeights {
  Eigen::VectorXd classes;  // k_V, mean over students of sum_u z_hu pi_{hi,v|u}
  Eigen::VectorXd types;    // k_U, mean over schools of z_hu
};

AverageWeights average_class_weights(const ResponseDataset& data, const ParameterSet& params,
                                      const ModelSpec& spec, const PosteriorTables& post);

/// Per column: subtract the weighted mean, divide by the weighted (population)
/// standard deviation. Zero-variance columns become zero.
Eigen::MatrixXd standardize_abilities(const Eigen::MatrixXd& xi, const Eigen::VectorXd& weights);

struct SupportPoints {
  std::vector<std::optional<double>> raw;           // k_U; nullopt for an empty type
  std::vector<std::optional<double>> standardized;  // same, on the standardized ability scale
};

/// School-level support points: for each type u, the z_hu-weighted average
/// over schools of the school's expected ability given type u (mean over its
/// students and over dimensions of sum_v pi_{hi,v|u} xi_vd). The standardized
/// variant uses standardize_abilities(xi, class_weights) in place of xi.
SupportPoints school_support_points(const ResponseDataset& data, const ParameterSet& params,
                                    const ModelSpec& spec, const PosteriorTables& post,
                                    const Eigen::VectorXd& class_weights);

/// Type probabilities for each covariate profile (rows of profiles).
Eigen::MatrixXd type_probabilities_by_profile(const ParameterSet& params,
                                              const Eigen::MatrixXd& profiles);

struct ClassificationResult {
  std::vector<std::vector<Assignment>> students;
  std::vector<Assignment> schools;
  AverageWeights average;
  SupportPoints support;
  Eigen::MatrixXd standardized_xi;
};

ClassificationResult classify(const ResponseDataset& data, const ParameterSet& params,
                              const ModelSpec& spec, const PosteriorTables& post);

}  // namespace mlirt
