#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace mlirt {

/// Item response parameterization. OnePL fixes every discrimination at 1;
/// LC replaces the logistic response curve with a free probability per
/// (class, item) cell.
enum class Parameterization { LC, OnePL, TwoPL };

std::string_view to_string(Parameterization p);
/// Accepts "lc", "1pl", "2pl" (case-insensitive). Throws std::invalid_argument.
Parameterization parse_parameterization(std::string_view text);

/// Assignment of items to latent dimensions. Every item measures exactly one
/// dimension; each dimension has a reference item that pins location and scale.
struct ItemBank {
  std::vector<std::size_t> dim_of;          // item -> dimension
  std::vector<std::size_t> reference_item;  // dimension -> item

  std::size_t n_items() const { return dim_of.size(); }
  std::size_t n_dims() const { return reference_item.size(); }

  /// Items of dimension d in ascending order.
  std::vector<std::size_t> items_of(std::size_t d) const;
  bool is_reference(std::size_t item) const;

  /// All r items on a single dimension, item 0 as reference.
  static ItemBank unidimensional(std::size_t r);
  /// Builds a bank from an item -> dimension map; the reference item of each
  /// dimension is its lowest-indexed item. s is 1 + the largest dimension index.
  static ItemBank from_dimension_map(std::vector<std::size_t> dim_of);

  bool operator==(const ItemBank&) const = default;
};

struct ModelSpec {
  ItemBank items;
  std::size_t k_v = 1;  // student classes
  std::size_t k_u = 1;  // school types
  Parameterization parameterization = Parameterization::TwoPL;
  std::size_t m_v = 0;  // student covariates (after indicator expansion)
  std::size_t m_u = 0;  // school covariates

  std::size_t n_items() const { return items.n_items(); }
  std::size_t n_dims() const { return items.n_dims(); }

  bool operator==(const ModelSpec&) const = default;
};

/// Free parameters of the multilevel model. Class and type indices are
/// zero-based; class 0 and type 0 are the multinomial-logit references.
struct ParameterSet {
  Eigen::VectorXd beta;     // r difficulties
  Eigen::VectorXd gamma;    // r discriminations
  Eigen::MatrixXd xi;       // k_V x s class abilities
  Eigen::MatrixXd zeta0_v;  // k_U x (k_V - 1) type-specific class intercepts
  Eigen::MatrixXd zeta1_v;  // (k_V - 1) x m_V class slopes, shared across types
  Eigen::VectorXd zeta0_u;  // k_U - 1 type intercepts
  Eigen::MatrixXd zeta1_u;  // (k_U - 1) x m_U type slopes
  Eigen::MatrixXd lc_prob;  // k_V x r success probabilities (LC only; empty otherwise)

  /// beta = 0, gamma = 1, xi = 0, zeta = 0, lc_prob = 0.5.
  static ParameterSet neutral(const ModelSpec& spec);
};

/// Throws std::invalid_argument if any block has the wrong shape for spec or
/// holds a non-finite value, or if lc_prob leaves (0, 1).
void check_parameters(const ModelSpec& spec, const ParameterSet& params);

/// Largest absolute elementwise difference across all blocks. Shapes must match.
double max_abs_difference(const ParameterSet& a, const ParameterSet& b);

/// Response logit for (item, class) under any parameterization. For LC the
/// logit of lc_prob is returned.
double item_logit(const ModelSpec& spec, const ParameterSet& params, std::size_t item,
                  std::size_t cls);

/// Success probability of item given a class ability vector (length s), for
/// the logistic parameterizations: logistic(gamma_j (ability[d(j)] - beta_j)).
double item_success_prob(const ItemBank& bank, std::size_t item, const Eigen::VectorXd& ability,
                         const ParameterSet& params, Parameterization parameterization);

/// Success probability for (item, class), dispatching on the parameterization.
double item_success_prob(const ModelSpec& spec, const ParameterSet& params, std::size_t item,
                         std::size_t cls);

/// Re-expresses beta, gamma and xi so that every reference item has beta = 0
/// and gamma = 1, leaving all response probabilities unchanged. Identity for LC.
/// Throws std::invalid_argument when a reference item's gamma is zero.
ParameterSet apply_identifiability(const ParameterSet& params, const ModelSpec& spec);

std::size_t count_free_parameters(const ModelSpec& spec);

/// Empty when the spec is well formed; otherwise one message per violation.
std::vector<std::string> validate_spec(const ModelSpec& spec);

/// Relabels student classes: class v of the result is class perm[v] of params.
/// Intercepts and slopes are re-expressed against the new reference class.
ParameterSet permute_classes(const ParameterSet& params, const ModelSpec& spec,
                             const std::vector<std::size_t>& perm);

/// Relabels school types: type u of the result is type perm[u] of params.
ParameterSet permute_types(const ParameterSet& params, const ModelSpec& spec,
                           const std::vector<std::size_t>& perm);

}  // namespace mlirt
