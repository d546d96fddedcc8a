#include "mlirt/simulate.hpp"

#include "mlirt/likelihood.hpp"
#include "mlirt/parallel.hpp"
#include "mlirt/rng.hpp"
#include "mlirt/selection.hpp"
#include "mlirt/weights.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <stdexcept>

namespace mlirt {

namespace {

std::size_t total_width(const std::vector<CovariateGenerator>& gens) {
  std::size_t w = 0;
  for (const auto& g : gens) w += g.width();
  return w;
}

void check_generator(const CovariateGenerator& g) {
  if (g.kind == CovariateGenerator::Kind::Categorical) {
    if (g.levels.size() < 2)
      throw std::invalid_argument("categorical covariate " + g.name + " needs two or more levels");
    if (static_cast<std::size_t>(g.probs.size()) != g.levels.size())
      throw std::invalid_argument("covariate " + g.name + " needs one probability per level");
    if ((g.probs.array() < 0.0).any() || std::abs(g.probs.sum() - 1.0) > 1e-9)
      throw std::invalid_argument("covariate " + g.name + " probabilities must sum to 1");
  } else if (!(g.sd >= 0.0) || !std::isfinite(g.mean)) {
    throw std::invalid_argument("covariate " + g.name + " has an invalid normal distribution");
  }
}

Eigen::VectorXd draw_covariates(const std::vector<CovariateGenerator>& gens, Rng& rng) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(total_width(gens)));
  Eigen::Index col = 0;
  for (const auto& g : gens) {
    if (g.kind == CovariateGenerator::Kind::Categorical) {
      const std::size_t level = rng.categorical(g.probs);
      for (std::size_t k = 1; k < g.levels.size(); ++k) out(col++) = level == k ? 1.0 : 0.0;
    } else {
      out(col++) = g.mean + g.sd * rng.normal();
    }
  }
  return out;
}

std::string padded(const char* prefix, std::size_t value, std::size_t max_value) {
  const int width = static_cast<int>(std::to_string(max_value).size());
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, value);
  return buf;
}

}  // namespace

void check_design(const SimulationDesign& d) {
  if (const auto issues = validate_spec(d.spec); !issues.empty())
    throw std::invalid_argument("invalid model spec: " + issues.front());
  check_parameters(d.spec, d.truth);
  if (d.n_groups < 1) throw std::invalid_argument("design needs at least one school");
  if (d.min_group_size < 1 || d.max_group_size < d.min_group_size)
    throw std::invalid_argument("group size range must satisfy 1 <= min <= max");
  for (const auto& g : d.student_covariates) check_generator(g);
  for (const auto& g : d.school_covariates) check_generator(g);
  if (total_width(d.student_covariates) != d.spec.m_v)
    throw std::invalid_argument("student covariate generators expand to " +
                                std::to_string(total_width(d.student_covariates)) +
                                " columns, spec has m_V = " + std::to_string(d.spec.m_v));
  if (total_width(d.school_covariates) != d.spec.m_u)
    throw std::invalid_argument("school covariate generators expand to " +
                                std::to_string(total_width(d.school_covariates)) +
                                " columns, spec has m_U = " + std::to_string(d.spec.m_u));
  if (!(d.mask_rate >= 0.0 && d.mask_rate < 1.0))
    throw std::invalid_argument("mask rate must lie in [0, 1)");
}

SimulationDesign desk_design(std::uint64_t seed) {
  SimulationDesign d;
  constexpr std::size_t r = 15;
  d.spec.items = ItemBank::unidimensional(r);
  d.spec.k_v = 3;
  d.spec.k_u = 2;
  d.spec.parameterization = Parameterization::TwoPL;
  d.spec.m_v = 1;
  d.spec.m_u = 1;
  d.truth = ParameterSet::neutral(d.spec);
  for (std::size_t j = 1; j < r; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    d.truth.beta(jj) = -1.3 + 2.6 * static_cast<double>(j - 1) / static_cast<double>(r - 2);
    d.truth.gamma(jj) = 0.7 + 0.8 * static_cast<double>((5 * j) % (r - 1)) / static_cast<double>(r - 2);
  }
  d.truth.xi << -1.5, 0.0, 1.5;
  d.truth.zeta0_v << 0.0, -1.0,
                     1.0, 2.0;
  d.truth.zeta1_v << 0.5, 0.5;
  d.truth.zeta0_u << 0.0;
  d.truth.zeta1_u << 0.5;
  d.n_groups = 200;
  d.min_group_size = d.max_group_size = 20;
  CovariateGenerator gender{"gender", CovariateGenerator::Kind::Categorical, {"M", "F"},
                            Eigen::Vector2d(0.5, 0.5)};
  CovariateGenerator area{"area", CovariateGenerator::Kind::Categorical, {"A", "B"},
                          Eigen::Vector2d(0.5, 0.5)};
  d.student_covariates = {gender};
  d.school_covariates = {area};
  d.seed = seed;
  return d;
}

SimulatedData generate_dataset(const SimulationDesign& design, unsigned threads) {
  check_design(design);
  const ModelSpec& spec = design.spec;
  const std::size_t r = spec.n_items();
  Eigen::MatrixXd success(static_cast<Eigen::Index>(spec.k_v), static_cast<Eigen::Index>(r));
  for (std::size_t v = 0; v < spec.k_v; ++v)
    for (std::size_t j = 0; j < r; ++j)
      success(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(j)) =
          item_success_prob(spec, design.truth, j, v);

  SimulatedData sim;
  sim.data.groups.resize(design.n_groups);
  sim.school_types.resize(design.n_groups);
  sim.student_classes.resize(design.n_groups);
  detail::parallel_for(design.n_groups, threads, [&](std::size_t h) {
    Rng rng(substream_seed(design.seed, h));
    Group& g = sim.data.groups[h];
    g.id = padded("S", h + 1, design.n_groups);
    const auto n = static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(design.min_group_size),
                        static_cast<std::int64_t>(design.max_group_size)));
    g.w = draw_covariates(design.school_covariates, rng);
    const std::size_t u = rng.categorical(school_type_weights(design.truth, g.w));
    sim.school_types[h] = u;
    g.students.resize(n);
    sim.student_classes[h].resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      Student& st = g.students[i];
      st.id = padded("P", i + 1, design.max_group_size);
      st.x = draw_covariates(design.student_covariates, rng);
      const std::size_t v = rng.categorical(student_class_weights(design.truth, st.x, u));
      sim.student_classes[h][i] = v;
      st.responses.resize(r);
      for (std::size_t j = 0; j < r; ++j) {
        const bool right =
            rng.uniform() < success(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(j));
        st.responses[j] = right ? Response::Right : Response::Wrong;
        if (design.mask_rate > 0.0 && rng.uniform() < design.mask_rate)
          st.responses[j] = Response::Missing;
      }
    }
  });
  return sim;
}

namespace {

double min_over_permutations(std::size_t k, const std::function<double(const std::vector<std::size_t>&)>& cost,
                             std::vector<std::size_t>& best) {
  if (k > 8) throw std::invalid_argument("label alignment limited to at most 8 classes or types");
  std::vector<std::size_t> perm(k);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  best = perm;
  double best_cost = cost(perm);
  while (std::next_permutation(perm.begin(), perm.end())) {
    const double c = cost(perm);
    if (c < best_cost - 1e-12) {
      best_cost = c;
      best = perm;
    }
  }
  return best_cost;
}

// Centered logits with the reference restored; invariant to which class is
// the reference.
Eigen::VectorXd centered_logits(const Eigen::VectorXd& contrasts) {
  Eigen::VectorXd full(contrasts.size() + 1);
  full(0) = 0.0;
  full.tail(contrasts.size()) = contrasts;
  return full.array() - full.mean();
}

}  // namespace

Alignment align_labels(const ParameterSet& truth, const ParameterSet& estimate,
                       const ModelSpec& spec) {
  Alignment a;
  const bool lc = spec.parameterization == Parameterization::LC;
  const Eigen::MatrixXd& rows_t = lc ? truth.lc_prob : truth.xi;
  const Eigen::MatrixXd& rows_e = lc ? estimate.lc_prob : estimate.xi;
  a.class_distance = min_over_permutations(
      spec.k_v,
      [&](const std::vector<std::size_t>& p) {
        double c = 0.0;
        for (std::size_t v = 0; v < p.size(); ++v)
          c += (rows_t.row(static_cast<Eigen::Index>(v)) - rows_e.row(static_cast<Eigen::Index>(p[v])))
                   .squaredNorm();
        return c;
      },
      a.classes);

  const ParameterSet est = permute_classes(estimate, spec, a.classes);
  Eigen::VectorXd type_logits_t = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec.k_u));
  Eigen::VectorXd type_logits_e = type_logits_t;
  type_logits_t.tail(truth.zeta0_u.size()) = truth.zeta0_u;
  type_logits_e.tail(est.zeta0_u.size()) = est.zeta0_u;
  type_logits_t.array() -= type_logits_t.mean();
  type_logits_e.array() -= type_logits_e.mean();
  a.type_distance = min_over_permutations(
      spec.k_u,
      [&](const std::vector<std::size_t>& p) {
        double c = 0.0;
        for (std::size_t u = 0; u < p.size(); ++u) {
          const auto ut = static_cast<Eigen::Index>(u);
          const auto ue = static_cast<Eigen::Index>(p[u]);
          c += (centered_logits(truth.zeta0_v.row(ut).transpose()) -
                centered_logits(est.zeta0_v.row(ue).transpose()))
                   .squaredNorm();
          if (spec.k_v == 1) c += std::pow(type_logits_t(ut) - type_logits_e(ue), 2);
        }
        return c;
      },
      a.types);
  return a;
}

ParameterSet apply_alignment(const ParameterSet& estimate, const ModelSpec& spec,
                             const Alignment& alignment) {
  return permute_types(permute_classes(estimate, spec, alignment.classes), spec, alignment.types);
}

const BlockError& RecoveryReport::block(const std::string& name) const {
  for (const auto& b : blocks)
    if (b.block == name) return b;
  throw std::out_of_range("no recovery block named " + name);
}

RecoveryReport recovery_report(const SimulatedData& sim, const ModelSpec& spec,
                               const ParameterSet& truth, const FitResult& fit,
                               const PosteriorTables& post) {
  RecoveryReport rep;
  rep.alignment = align_labels(truth, fit.params, spec);
  const ParameterSet est = apply_alignment(fit.params, spec, rep.alignment);

  auto block = [&rep](const std::string& name, const std::vector<double>& errors) {
    BlockError b{name, 0.0, 0.0, errors.size()};
    double ss = 0.0;
    for (double e : errors) {
      b.max_abs = std::max(b.max_abs, std::abs(e));
      ss += e * e;
    }
    if (!errors.empty()) b.rmse = std::sqrt(ss / static_cast<double>(errors.size()));
    rep.blocks.push_back(b);
  };
  auto diffs = [](const auto& a, const auto& b) {
    std::vector<double> out;
    for (Eigen::Index i = 0; i < a.size(); ++i) out.push_back(b.data()[i] - a.data()[i]);
    return out;
  };

  if (spec.parameterization == Parameterization::LC) {
    block("lc_prob", diffs(truth.lc_prob, est.lc_prob));
  } else {
    std::vector<double> eb, eg;
    for (std::size_t j = 0; j < spec.n_items(); ++j) {
      if (spec.items.is_reference(j)) continue;
      const auto jj = static_cast<Eigen::Index>(j);
      eb.push_back(est.beta(jj) - truth.beta(jj));
      eg.push_back(est.gamma(jj) - truth.gamma(jj));
    }
    block("beta", eb);
    if (spec.parameterization == Parameterization::TwoPL) block("gamma", eg);
    block("xi", diffs(truth.xi, est.xi));
  }
  std::vector<double> zv = diffs(truth.zeta0_v, est.zeta0_v);
  for (double e : diffs(truth.zeta1_v, est.zeta1_v)) zv.push_back(e);
  std::vector<double> zu = diffs(truth.zeta0_u, est.zeta0_u);
  for (double e : diffs(truth.zeta1_u, est.zeta1_u)) zu.push_back(e);
  block("zeta_v", zv);
  block("zeta_u", zu);
  std::vector<double> all_zeta;
  for (double e : zv) all_zeta.push_back(std::abs(e));
  for (double e : zu) all_zeta.push_back(std::abs(e));
  if (!all_zeta.empty()) {
    std::sort(all_zeta.begin(), all_zeta.end());
    const std::size_t m = all_zeta.size();
    rep.zeta_median_abs_error =
        m % 2 == 1 ? all_zeta[m / 2] : 0.5 * (all_zeta[m / 2 - 1] + all_zeta[m / 2]);
  }

  // estimate label -> reference label
  std::vector<std::size_t> class_back(spec.k_v), type_back(spec.k_u);
  for (std::size_t v = 0; v < spec.k_v; ++v) class_back[rep.alignment.classes[v]] = v;
  for (std::size_t u = 0; u < spec.k_u; ++u) type_back[rep.alignment.types[u]] = u;
  const auto students = assign_students(post);
  const auto schools = assign_schools(post);
  std::size_t hit_s = 0, n_s = 0, hit_h = 0;
  for (std::size_t h = 0; h < schools.size(); ++h) {
    if (type_back[schools[h].label] == sim.school_types[h]) ++hit_h;
    for (std::size_t i = 0; i < students[h].size(); ++i, ++n_s)
      if (class_back[students[h][i].label] == sim.student_classes[h][i]) ++hit_s;
  }
  rep.student_accuracy = n_s ? static_cast<double>(hit_s) / static_cast<double>(n_s) : 0.0;
  rep.school_accuracy =
      schools.empty() ? 0.0 : static_cast<double>(hit_h) / static_cast<double>(schools.size());
  rep.truth_loglik = marginal_loglik(sim.data, truth, spec);
  rep.fitted_loglik = fit.loglik;
  return rep;
}

}  // namespace mlirt
