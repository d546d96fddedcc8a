#pragma once

#include "mlirt/dataset.hpp"
#include "mlirt/em.hpp"
#include "mlirt/model.hpp"
#include "mlirt/posterior.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace mlirt {

/// Distribution of one raw covariate column. A categorical column expands to
/// levels.size() - 1 indicator columns with levels[0] as reference.
struct CovariateGenerator {
  enum class Kind { Categorical, Normal };
  std::string name;
  Kind kind = Kind::Categorical;
  std::vector<std::string> levels;
  Eigen::VectorXd probs;
  double mean = 0.0;
  double sd = 1.0;

  std::size_t width() const { return kind == Kind::Categorical ? levels.size() - 1 : 1; }
};

struct SimulationDesign {
  ModelSpec spec;
  ParameterSet truth;
  std::size_t n_groups = 1;
  std::size_t min_group_size = 1;
  std::size_t max_group_size = 1;
  std::vector<CovariateGenerator> student_covariates;
  std::vector<CovariateGenerator> school_covariates;
  std::uint64_t seed = 0;
  double mask_rate = 0.0;  // MCAR probability of a missing response
};

/// Throws std::invalid_argument if the design is inconsistent.
void check_design(const SimulationDesign& design);

/// Desk-scale reference design: 200 schools of 20 students, 15 items on one
/// dimension, 2PL, three classes at (-1.5, 0, 1.5), two school types, one
/// binary covariate per level with slope 0.5.
SimulationDesign desk_design(std::uint64_t seed);

struct SimulatedData {
  ResponseDataset data;
  std::vector<std::size_t> school_types;                 // true U_h
  std::vector<std::vector<std::size_t>> student_classes;  // true V_hi
};

/// Draws a dataset from the generative model. School h uses its own stream
/// seeded with substream_seed(design.seed, h), so output is independent of
/// `threads`.
SimulatedData generate_dataset(const SimulationDesign& design, unsigned threads = 1);

/// Label correspondence between a reference parameter set and an estimate:
/// estimate class classes[v] plays the role of reference class v, likewise
/// for types.
struct Alignment {
  std::vector<std::size_t> classes;
  std::vector<std::size_t> types;
  double class_distance = 0.0;
  double type_distance = 0.0;
};

/// Exhaustive search (k <= 8). Classes minimize the squared distance between
/// ability rows (lc_prob rows under LC); types then minimize the distance
/// between centered type-specific class logits.
Alignment align_labels(const ParameterSet& truth, const ParameterSet& estimate,
                       const ModelSpec& spec);

/// Relabels estimate so that its labels match the reference of `alignment`.
ParameterSet apply_alignment(const ParameterSet& estimate, const ModelSpec& spec,
                             const Alignment& alignment);

struct BlockError {
  std::string block;
  double max_abs = 0.0;
  double rmse = 0.0;
  std::size_t count = 0;
};

struct RecoveryReport {
  Alignment alignment;
  std::vector<BlockError> blocks;
  double zeta_median_abs_error = 0.0;
  double student_accuracy = 0.0;
  double school_accuracy = 0.0;
  double truth_loglik = 0.0;
  double fitted_loglik = 0.0;

  const BlockError& block(const std::string& name) const;
};

/// Compares a fit against the truth that generated sim. post must be the
/// E-step at fit.params. Item blocks exclude reference items.
RecoveryReport recovery_report(const SimulatedData& sim, const ModelSpec& spec,
                               const ParameterSet& truth, const FitResult& fit,
                               const PosteriorTables& post);

}  // namespace mlirt
