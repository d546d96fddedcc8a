#include "mlirt/model.hpp"

#include "mlirt/numeric.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

namespace mlirt {

std::string_view to_string(Parameterization p) {
  switch (p) {
    case Parameterization::LC: return "lc";
    case Parameterization::OnePL: return "1pl";
    case Parameterization::TwoPL: return "2pl";
  }
  return "?";
}

Parameterization parse_parameterization(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "lc") return Parameterization::LC;
  if (lower == "1pl" || lower == "rasch") return Parameterization::OnePL;
  if (lower == "2pl") return Parameterization::TwoPL;
  throw std::invalid_argument("unknown parameterization '" + std::string(text) +
                              "' (expected lc, 1pl or 2pl)");
}

std::vector<std::size_t> ItemBank::items_of(std::size_t d) const {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < dim_of.size(); ++j)
    if (dim_of[j] == d) out.push_back(j);
  return out;
}

bool ItemBank::is_reference(std::size_t item) const {
  return std::find(reference_item.begin(), reference_item.end(), item) != reference_item.end();
}

ItemBank ItemBank::unidimensional(std::size_t r) {
  return ItemBank{std::vector<std::size_t>(r, 0), {0}};
}

ItemBank ItemBank::from_dimension_map(std::vector<std::size_t> dim_of) {
  ItemBank bank;
  std::size_t s = 0;
  for (auto d : dim_of) s = std::max(s, d + 1);
  bank.reference_item.assign(s, dim_of.size());
  for (std::size_t j = dim_of.size(); j-- > 0;) bank.reference_item[dim_of[j]] = j;
  bank.dim_of = std::move(dim_of);
  return bank;
}

ParameterSet ParameterSet::neutral(const ModelSpec& spec) {
  const auto r = static_cast<Eigen::Index>(spec.n_items());
  const auto s = static_cast<Eigen::Index>(spec.n_dims());
  const auto kv = static_cast<Eigen::Index>(spec.k_v);
  const auto ku = static_cast<Eigen::Index>(spec.k_u);
  ParameterSet p;
  p.beta = Eigen::VectorXd::Zero(r);
  p.gamma = Eigen::VectorXd::Ones(r);
  p.xi = Eigen::MatrixXd::Zero(kv, s);
  p.zeta0_v = Eigen::MatrixXd::Zero(ku, kv - 1);
  p.zeta1_v = Eigen::MatrixXd::Zero(kv - 1, static_cast<Eigen::Index>(spec.m_v));
  p.zeta0_u = Eigen::VectorXd::Zero(ku - 1);
  p.zeta1_u = Eigen::MatrixXd::Zero(ku - 1, static_cast<Eigen::Index>(spec.m_u));
  if (spec.parameterization == Parameterization::LC)
    p.lc_prob = Eigen::MatrixXd::Constant(kv, r, 0.5);
  return p;
}

namespace {

template <typename M>
void check_block(const char* name, const M& m, Eigen::Index rows, Eigen::Index cols) {
  if (m.rows() != rows || m.cols() != cols)
    throw std::invalid_argument(std::string("parameter block ") + name + " has shape " +
                                std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                                ", expected " + std::to_string(rows) + "x" +
                                std::to_string(cols));
  if (!m.allFinite())
    throw std::invalid_argument(std::string("parameter block ") + name +
                                " holds a non-finite value");
}

}  // namespace

void check_parameters(const ModelSpec& spec, const ParameterSet& p) {
  const auto r = static_cast<Eigen::Index>(spec.n_items());
  const auto s = static_cast<Eigen::Index>(spec.n_dims());
  const auto kv = static_cast<Eigen::Index>(spec.k_v);
  const auto ku = static_cast<Eigen::Index>(spec.k_u);
  check_block("beta", p.beta, r, 1);
  check_block("gamma", p.gamma, r, 1);
  check_block("xi", p.xi, kv, s);
  check_block("zeta0_v", p.zeta0_v, ku, kv - 1);
  check_block("zeta1_v", p.zeta1_v, kv - 1, static_cast<Eigen::Index>(spec.m_v));
  check_block("zeta0_u", p.zeta0_u, ku - 1, 1);
  check_block("zeta1_u", p.zeta1_u, ku - 1, static_cast<Eigen::Index>(spec.m_u));
  if (spec.parameterization == Parameterization::LC) {
    check_block("lc_prob", p.lc_prob, kv, r);
    if ((p.lc_prob.array() <= 0.0).any() || (p.lc_prob.array() >= 1.0).any())
      throw std::invalid_argument("lc_prob entries must lie strictly inside (0, 1)");
  }
}

double max_abs_difference(const ParameterSet& a, const ParameterSet& b) {
  double m = 0.0;
  auto upd = [&m](const auto& x, const auto& y) {
    if (x.size() > 0) m = std::max(m, (x - y).cwiseAbs().maxCoeff());
  };
  upd(a.beta, b.beta);
  upd(a.gamma, b.gamma);
  upd(a.xi, b.xi);
  upd(a.zeta0_v, b.zeta0_v);
  upd(a.zeta1_v, b.zeta1_v);
  upd(a.zeta0_u, b.zeta0_u);
  upd(a.zeta1_u, b.zeta1_u);
  upd(a.lc_prob, b.lc_prob);
  return m;
}

double item_logit(const ModelSpec& spec, const ParameterSet& params, std::size_t item,
                  std::size_t cls) {
  if (item >= spec.n_items()) throw std::out_of_range("item index out of range");
  if (cls >= spec.k_v) throw std::out_of_range("class index out of range");
  const auto j = static_cast<Eigen::Index>(item);
  const auto v = static_cast<Eigen::Index>(cls);
  if (spec.parameterization == Parameterization::LC) return logit(params.lc_prob(v, j));
  const auto d = static_cast<Eigen::Index>(spec.items.dim_of[item]);
  const double g = spec.parameterization == Parameterization::OnePL ? 1.0 : params.gamma(j);
  return g * (params.xi(v, d) - params.beta(j));
}

double item_success_prob(const ItemBank& bank, std::size_t item, const Eigen::VectorXd& ability,
                         const ParameterSet& params, Parameterization parameterization) {
  if (item >= bank.n_items()) throw std::out_of_range("item index out of range");
  if (parameterization == Parameterization::LC)
    throw std::invalid_argument("LC success probabilities are indexed by class, not ability");
  if (static_cast<std::size_t>(ability.size()) != bank.n_dims())
    throw std::invalid_argument("ability vector length differs from the dimension count");
  const auto j = static_cast<Eigen::Index>(item);
  const double g = parameterization == Parameterization::OnePL ? 1.0 : params.gamma(j);
  const double a = ability(static_cast<Eigen::Index>(bank.dim_of[item]));
  if (!std::isfinite(g) || !std::isfinite(a) || !std::isfinite(params.beta(j)))
    throw std::invalid_argument("non-finite item parameter or ability");
  return sigmoid(g * (a - params.beta(j)));
}

double item_success_prob(const ModelSpec& spec, const ParameterSet& params, std::size_t item,
                         std::size_t cls) {
  if (spec.parameterization == Parameterization::LC) {
    if (item >= spec.n_items()) throw std::out_of_range("item index out of range");
    if (cls >= spec.k_v) throw std::out_of_range("class index out of range");
    return params.lc_prob(static_cast<Eigen::Index>(cls), static_cast<Eigen::Index>(item));
  }
  if (cls >= spec.k_v) throw std::out_of_range("class index out of range");
  const Eigen::VectorXd ability = params.xi.row(static_cast<Eigen::Index>(cls)).transpose();
  return item_success_prob(spec.items, item, ability, params, spec.parameterization);
}

ParameterSet apply_identifiability(const ParameterSet& params, const ModelSpec& spec) {
  if (spec.parameterization == Parameterization::LC) return params;
  ParameterSet out = params;
  const auto& bank = spec.items;
  for (std::size_t d = 0; d < bank.n_dims(); ++d) {
    const auto ref = static_cast<Eigen::Index>(bank.reference_item[d]);
    const double shift = params.beta(ref);
    const double scale =
        spec.parameterization == Parameterization::OnePL ? 1.0 : params.gamma(ref);
    if (scale == 0.0)
      throw std::invalid_argument("reference item of dimension " + std::to_string(d) +
                                  " has zero discrimination; scale undefined");
    for (auto j : bank.items_of(d)) {
      const auto jj = static_cast<Eigen::Index>(j);
      out.beta(jj) = scale * (params.beta(jj) - shift);
      out.gamma(jj) = params.gamma(jj) / scale;
    }
    const auto dd = static_cast<Eigen::Index>(d);
    out.xi.col(dd) = scale * (params.xi.col(dd).array() - shift);
    out.beta(ref) = 0.0;
    out.gamma(ref) = 1.0;
  }
  return out;
}

std::size_t count_free_parameters(const ModelSpec& spec) {
  const std::size_t r = spec.n_items();
  const std::size_t s = spec.n_dims();
  const std::size_t weights =
      (spec.k_v - 1) * (spec.m_v + spec.k_u) + (spec.k_u - 1) * (spec.m_u + 1);
  switch (spec.parameterization) {
    case Parameterization::LC: return weights + spec.k_v * r;
    case Parameterization::OnePL: return weights + spec.k_v * s + (r - s);
    case Parameterization::TwoPL: return weights + spec.k_v * s + 2 * (r - s);
  }
  return 0;
}

std::vector<std::string> validate_spec(const ModelSpec& spec) {
  std::vector<std::string> issues;
  if (spec.k_v < 1) issues.push_back("k_V must be at least 1");
  if (spec.k_u < 1) issues.push_back("k_U must be at least 1");
  const auto& bank = spec.items;
  const std::size_t s = bank.n_dims();
  if (bank.n_items() == 0) issues.push_back("item bank is empty");
  if (s == 0) issues.push_back("item bank has no dimensions");
  std::vector<std::size_t> counts(s, 0);
  for (std::size_t j = 0; j < bank.n_items(); ++j) {
    if (bank.dim_of[j] >= s)
      issues.push_back("item " + std::to_string(j) + " assigned to unknown dimension " +
                       std::to_string(bank.dim_of[j]));
    else
      ++counts[bank.dim_of[j]];
  }
  for (std::size_t d = 0; d < s; ++d) {
    if (counts[d] == 0) issues.push_back("empty dimension " + std::to_string(d));
    const auto ref = bank.reference_item[d];
    if (ref >= bank.n_items() || bank.dim_of[ref] != d)
      issues.push_back("reference item of dimension " + std::to_string(d) +
                       " does not belong to that dimension");
  }
  return issues;
}

namespace {

// Full logit matrix with the reference column (zero) restored.
Eigen::MatrixXd with_reference_col(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd full = Eigen::MatrixXd::Zero(m.rows(), m.cols() + 1);
  full.rightCols(m.cols()) = m;
  return full;
}

Eigen::MatrixXd with_reference_row(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd full = Eigen::MatrixXd::Zero(m.rows() + 1, m.cols());
  full.bottomRows(m.rows()) = m;
  return full;
}

void check_perm(const std::vector<std::size_t>& perm, std::size_t k) {
  if (perm.size() != k) throw std::invalid_argument("permutation has the wrong length");
  std::vector<bool> seen(k, false);
  for (auto p : perm) {
    if (p >= k || seen[p]) throw std::invalid_argument("not a permutation");
    seen[p] = true;
  }
}

}  // namespace

ParameterSet permute_classes(const ParameterSet& params, const ModelSpec& spec,
                             const std::vector<std::size_t>& perm) {
  check_perm(perm, spec.k_v);
  ParameterSet out = params;
  const auto kv = static_cast<Eigen::Index>(spec.k_v);
  const Eigen::MatrixXd icpt = with_reference_col(params.zeta0_v);  // k_U x k_V
  const Eigen::MatrixXd slope = with_reference_row(params.zeta1_v);  // k_V x m_V
  const auto base = static_cast<Eigen::Index>(perm[0]);
  for (Eigen::Index v = 0; v < kv; ++v) {
    const auto src = static_cast<Eigen::Index>(perm[static_cast<std::size_t>(v)]);
    out.xi.row(v) = params.xi.row(src);
    if (params.lc_prob.size() > 0) out.lc_prob.row(v) = params.lc_prob.row(src);
    if (v > 0) {
      out.zeta0_v.col(v - 1) = icpt.col(src) - icpt.col(base);
      out.zeta1_v.row(v - 1) = slope.row(src) - slope.row(base);
    }
  }
  return out;
}

ParameterSet permute_types(const ParameterSet& params, const ModelSpec& spec,
                           const std::vector<std::size_t>& perm) {
  check_perm(perm, spec.k_u);
  ParameterSet out = params;
  const auto ku = static_cast<Eigen::Index>(spec.k_u);
  Eigen::VectorXd icpt = Eigen::VectorXd::Zero(ku);
  icpt.tail(ku - 1) = params.zeta0_u;
  const Eigen::MatrixXd slope = with_reference_row(params.zeta1_u);
  const auto base = static_cast<Eigen::Index>(perm[0]);
  for (Eigen::Index u = 0; u < ku; ++u) {
    const auto src = static_cast<Eigen::Index>(perm[static_cast<std::size_t>(u)]);
    out.zeta0_v.row(u) = params.zeta0_v.row(src);
    if (u > 0) {
      out.zeta0_u(u - 1) = icpt(src) - icpt(base);
      out.zeta1_u.row(u - 1) = slope.row(src) - slope.row(base);
    }
  }
  return out;
}

}  // namespace mlirt
