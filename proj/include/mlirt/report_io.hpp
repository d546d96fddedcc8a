#pragma once

#include "mlirt/dataset_io.hpp"
#include "mlirt/selection.hpp"
#include "mlirt/simulate.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

namespace mlirt {

/// Rounds to 12 significant digits; every float in a report passes through it.
double round_sig12(double x);

struct ProfileRow {
  std::string label;
  Eigen::VectorXd covariates;
  Eigen::VectorXd probabilities;
};

struct FitReport {
  ModelConfig config;
  ParameterSet params;
  double loglik = 0.0;
  std::size_t n_par = 0;
  double bic = 0.0;
  std::size_t bic_n = 0;
  std::string bic_n_rule;
  std::size_t n_iter = 0;
  bool converged = false;
  std::size_t start_index = 0;
  std::vector<double> trace;
  std::size_t n_schools = 0;
  std::size_t n_students = 0;
  Eigen::VectorXd average_class_weights;
  Eigen::VectorXd average_type_weights;
  Eigen::MatrixXd standardized_xi;
  SupportPoints support;
  std::vector<ProfileRow> profiles;
};

/// Type probabilities for each distinct school covariate profile in data
/// (at most `limit` profiles; empty when there are more or m_U = 0).
std::vector<ProfileRow> school_profiles(const ResponseDataset& data, const ModelConfig& config,
                                        const ParameterSet& params, std::size_t limit = 64);

std::string fit_report_text(const FitReport& report);
FitReport parse_fit_report(const std::string& text, const std::string& source = "<report>");
void write_fit_report(const std::filesystem::path& path, const FitReport& report);
FitReport read_fit_report(const std::filesystem::path& path);

/// school_id, student_id, class, posterior, p_class_1..p_class_kV (1-based labels).
void write_student_assignments(const std::filesystem::path& path, const ResponseDataset& data,
                               const PosteriorTables& post);
/// school_id, type, posterior, p_type_1..p_type_kU.
void write_school_assignments(const std::filesystem::path& path, const ResponseDataset& data,
                              const PosteriorTables& post);

std::string parameters_text(const ParameterSet& params);

/// Truth file written next to simulated data: config, parameters and latent labels.
void write_truth(const std::filesystem::path& path, const SimulationDesign& design,
                 const SimulatedData& sim);

std::string sweep_text(const SweepResult& sweep, const ModelSpec& base_spec);
std::string sweep_csv(const SweepResult& sweep);

}  // namespace mlirt
