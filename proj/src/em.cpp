#include "mlirt/em.hpp"

#include "mlirt/likelihood.hpp"
#include "mlirt/multinomial_logit.hpp"
#include "mlirt/numeric.hpp"
#include "mlirt/parallel.hpp"
#include "mlirt/rng.hpp"
#include "mlirt/weights.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

namespace mlirt {

void check_controls(const FitControls& c) {
  if (!(c.tol_loglik > 0.0) || !(c.tol_param > 0.0) || !(c.newton_tol > 0.0))
    throw std::invalid_argument("fit tolerances must be positive");
  if (c.max_iter < 1 || c.newton_max_iter < 1 || c.n_starts < 1)
    throw std::invalid_argument("iteration caps and start count must be at least 1");
}

std::vector<std::string> check_posteriors(const PosteriorTables& post, double tol) {
  std::vector<std::string> issues;
  auto report = [&issues](std::string msg) {
    if (issues.size() < 20) issues.push_back(std::move(msg));
  };
  for (Eigen::Index h = 0; h < post.z_hu.rows(); ++h) {
    const double row = post.z_hu.row(h).sum();
    if (std::abs(row - 1.0) > tol)
      report("z_hu row " + std::to_string(h) + " sums to " + std::to_string(row));
    const auto hh = static_cast<std::size_t>(h);
    for (std::size_t i = 0; i < post.z_joint[hh].size(); ++i) {
      const Eigen::MatrixXd& joint = post.z_joint[hh][i];
      const std::string where = "(" + std::to_string(h) + ", " + std::to_string(i) + ")";
      if ((joint.array() < 0.0).any()) report("negative joint posterior at " + where);
      const Eigen::VectorXd by_type = joint.rowwise().sum();
      if ((by_type - post.z_hu.row(h).transpose()).cwiseAbs().maxCoeff() > tol)
        report("joint posterior rows do not sum to z_hu at " + where);
      if (std::abs(joint.sum() - 1.0) > tol) report("joint posterior mass != 1 at " + where);
      const Eigen::VectorXd by_class = joint.colwise().sum().transpose();
      if ((by_class - post.z_hiv[hh][i]).cwiseAbs().maxCoeff() > tol)
        report("z_hiv differs from summed joint posterior at " + where);
    }
  }
  return issues;
}

namespace {

struct GroupPosterior {
  Eigen::VectorXd z_u;
  std::vector<Eigen::MatrixXd> joint;
  std::vector<Eigen::VectorXd> marginal;
  double loglik = 0.0;
};

GroupPosterior group_posterior(const Group& g, const ParameterSet& params, const ModelSpec& spec,
                               const ItemLogProbs& table) {
  const auto ku = static_cast<Eigen::Index>(spec.k_u);
  const auto kv = static_cast<Eigen::Index>(spec.k_v);
  GroupPosterior out;
  std::vector<Eigen::MatrixXd> log_terms(g.students.size(), Eigen::MatrixXd(ku, kv));
  Eigen::MatrixXd student_lse(static_cast<Eigen::Index>(g.students.size()), ku);
  Eigen::VectorXd log_rho = Eigen::VectorXd::Zero(ku);
  for (std::size_t i = 0; i < g.students.size(); ++i) {
    const auto& st = g.students[i];
    const Eigen::VectorXd cond = student_class_logliks(st.responses, table);
    for (Eigen::Index u = 0; u < ku; ++u) {
      log_terms[i].row(u) =
          (student_class_log_weights(params, st.x, static_cast<std::size_t>(u)) + cond).transpose();
      const double lse = log_sum_exp(log_terms[i].row(u));
      student_lse(static_cast<Eigen::Index>(i), u) = lse;
      log_rho(u) += lse;
    }
  }
  const Eigen::VectorXd b = school_type_log_weights(params, g.w) + log_rho;
  out.loglik = log_sum_exp(b);
  if (!std::isfinite(out.loglik))
    throw std::runtime_error("non-finite likelihood for group " + g.id +
                             " (parameters diverged?)");
  out.z_u = (b.array() - out.loglik).exp();
  out.joint.reserve(g.students.size());
  out.marginal.reserve(g.students.size());
  for (std::size_t i = 0; i < g.students.size(); ++i) {
    Eigen::MatrixXd joint(ku, kv);
    for (Eigen::Index u = 0; u < ku; ++u)
      joint.row(u) = (log_terms[i].row(u).array() - student_lse(static_cast<Eigen::Index>(i), u))
                         .exp() *
                     out.z_u(u);
    out.marginal.push_back(joint.colwise().sum().transpose());
    out.joint.push_back(std::move(joint));
  }
  return out;
}

}  // namespace

PosteriorTables e_step(const ResponseDataset& data, const ParameterSet& params,
                       const ModelSpec& spec, unsigned threads) {
  const ItemLogProbs table = item_log_probs(spec, params);
  std::vector<GroupPosterior> parts(data.n_groups());
  detail::parallel_for(data.n_groups(), threads, [&](std::size_t h) {
    parts[h] = group_posterior(data.groups[h], params, spec, table);
  });
  PosteriorTables post;
  post.z_hu.resize(static_cast<Eigen::Index>(data.n_groups()), static_cast<Eigen::Index>(spec.k_u));
  post.z_joint.reserve(parts.size());
  post.z_hiv.reserve(parts.size());
  double total = 0.0;
  for (std::size_t h = 0; h < parts.size(); ++h) {
    post.z_hu.row(static_cast<Eigen::Index>(h)) = parts[h].z_u.transpose();
    post.z_joint.push_back(std::move(parts[h].joint));
    post.z_hiv.push_back(std::move(parts[h].marginal));
    total += parts[h].loglik;
  }
  post.loglik = total;
  return post;
}

RegressionCases student_weight_cases(const ResponseDataset& data, const PosteriorTables& post,
                                     const ModelSpec& spec) {
  const auto ku = static_cast<Eigen::Index>(spec.k_u);
  const auto mv = static_cast<Eigen::Index>(spec.m_v);
  const auto n = static_cast<Eigen::Index>(data.n_students()) * ku;
  RegressionCases cases{Eigen::MatrixXd::Zero(n, ku + mv),
                        Eigen::MatrixXd(n, static_cast<Eigen::Index>(spec.k_v))};
  Eigen::Index row = 0;
  for (std::size_t h = 0; h < data.groups.size(); ++h) {
    const auto& g = data.groups[h];
    for (std::size_t i = 0; i < g.students.size(); ++i) {
      for (Eigen::Index u = 0; u < ku; ++u, ++row) {
        cases.features(row, u) = 1.0;
        if (mv > 0) cases.features.row(row).tail(mv) = g.students[i].x.transpose();
        cases.targets.row(row) = post.z_joint[h][i].row(u);
      }
    }
  }
  return cases;
}

RegressionCases school_weight_cases(const ResponseDataset& data, const PosteriorTables& post,
                                    const ModelSpec& spec) {
  const auto mu = static_cast<Eigen::Index>(spec.m_u);
  const auto n = static_cast<Eigen::Index>(data.n_groups());
  RegressionCases cases{Eigen::MatrixXd(n, 1 + mu), post.z_hu};
  for (Eigen::Index h = 0; h < n; ++h) {
    cases.features(h, 0) = 1.0;
    if (mu > 0) cases.features.row(h).tail(mu) = data.groups[static_cast<std::size_t>(h)].w.transpose();
  }
  return cases;
}

Eigen::MatrixXd pack_student_weight_coef(const ParameterSet& p) {
  Eigen::MatrixXd coef(p.zeta0_v.rows() + p.zeta1_v.cols(), p.zeta0_v.cols());
  coef.topRows(p.zeta0_v.rows()) = p.zeta0_v;
  coef.bottomRows(p.zeta1_v.cols()) = p.zeta1_v.transpose();
  return coef;
}

void unpack_student_weight_coef(const Eigen::MatrixXd& coef, ParameterSet& p) {
  p.zeta0_v = coef.topRows(p.zeta0_v.rows());
  p.zeta1_v = coef.bottomRows(p.zeta1_v.cols()).transpose();
}

Eigen::MatrixXd pack_school_weight_coef(const ParameterSet& p) {
  Eigen::MatrixXd coef(1 + p.zeta1_u.cols(), p.zeta0_u.size());
  coef.row(0) = p.zeta0_u.transpose();
  coef.bottomRows(p.zeta1_u.cols()) = p.zeta1_u.transpose();
  return coef;
}

void unpack_school_weight_coef(const Eigen::MatrixXd& coef, ParameterSet& p) {
  p.zeta0_u = coef.row(0).transpose();
  p.zeta1_u = coef.bottomRows(p.zeta1_u.cols()).transpose();
}

ParameterSet m_step_items(const ResponseDataset& data, const PosteriorTables& post,
                          const ParameterSet& params, const ModelSpec& spec,
                          const FitControls& controls) {
  const ItemStats stats = accumulate_item_stats(data, post, spec.k_v, spec.n_items());
  return fit_item_block(stats, spec, params, controls.newton());
}

ParameterSet m_step_student_weights(const ResponseDataset& data, const PosteriorTables& post,
                                    const ParameterSet& params, const ModelSpec& spec,
                                    const FitControls& controls) {
  ParameterSet out = params;
  if (spec.k_v < 2) return out;
  const RegressionCases cases = student_weight_cases(data, post, spec);
  const MultinomialFit fitted =
      fit_weighted_multinomial_logit(cases.features, cases.targets, pack_student_weight_coef(params),
                                     controls.newton(), "student class weights");
  unpack_student_weight_coef(fitted.coef, out);
  return out;
}

ParameterSet m_step_school_weights(const ResponseDataset& data, const PosteriorTables& post,
                                   const ParameterSet& params, const ModelSpec& spec,
                                   const FitControls& controls) {
  ParameterSet out = params;
  if (spec.k_u < 2) return out;
  const RegressionCases cases = school_weight_cases(data, post, spec);
  const MultinomialFit fitted =
      fit_weighted_multinomial_logit(cases.features, cases.targets, pack_school_weight_coef(params),
                                     controls.newton(), "school type weights");
  unpack_school_weight_coef(fitted.coef, out);
  return out;
}

ParameterSet m_step(const ResponseDataset& data, const PosteriorTables& post,
                    const ParameterSet& params, const ModelSpec& spec,
                    const FitControls& controls) {
  ParameterSet out = m_step_items(data, post, params, spec, controls);
  const ParameterSet sv = m_step_student_weights(data, post, params, spec, controls);
  out.zeta0_v = sv.zeta0_v;
  out.zeta1_v = sv.zeta1_v;
  const ParameterSet su = m_step_school_weights(data, post, params, spec, controls);
  out.zeta0_u = su.zeta0_u;
  out.zeta1_u = su.zeta1_u;
  return out;
}

ParameterSet initialize(const ResponseDataset& data, const ModelSpec& spec, InitStrategy strategy,
                        std::uint64_t seed) {
  ParameterSet p = ParameterSet::neutral(spec);
  const std::size_t r = spec.n_items();
  std::vector<double> right(r, 0.0), seen(r, 0.0);
  for (const auto& g : data.groups)
    for (const auto& st : g.students)
      for (std::size_t j = 0; j < r; ++j) {
        if (st.responses[j] == Response::Missing) continue;
        seen[j] += 1.0;
        if (st.responses[j] == Response::Right) right[j] += 1.0;
      }
  constexpr double clamp_beta = 5.0;
  for (std::size_t j = 0; j < r; ++j) {
    const double share = seen[j] > 0.0 ? right[j] / seen[j] : 0.5;
    double b;
    if (share <= 0.0)
      b = clamp_beta;
    else if (share >= 1.0)
      b = -clamp_beta;
    else
      b = std::clamp(-logit(share), -clamp_beta, clamp_beta);
    p.beta(static_cast<Eigen::Index>(j)) = b;
  }
  const Eigen::VectorXd raw_beta = p.beta;
  for (std::size_t j = 0; j < r; ++j)
    p.beta(static_cast<Eigen::Index>(j)) -=
        raw_beta(static_cast<Eigen::Index>(spec.items.reference_item[spec.items.dim_of[j]]));

  const auto kv = static_cast<Eigen::Index>(spec.k_v);
  for (Eigen::Index v = 0; v < kv; ++v) {
    const double half = static_cast<double>(kv) / 2.0;
    const double point = kv > 1 ? -half + 2.0 * half * static_cast<double>(v) / static_cast<double>(kv - 1) : 0.0;
    p.xi.row(v).setConstant(point);
  }

  if (strategy == InitStrategy::Random) {
    Rng rng(seed);
    for (Eigen::Index i = 0; i < p.xi.size(); ++i) p.xi.data()[i] += rng.uniform(-1.0, 1.0);
    for (std::size_t j = 0; j < r; ++j)
      if (!spec.items.is_reference(j)) p.beta(static_cast<Eigen::Index>(j)) += rng.uniform(-0.5, 0.5);
    for (Eigen::Index i = 0; i < p.zeta0_v.size(); ++i) p.zeta0_v.data()[i] += rng.uniform(-1.0, 1.0);
    for (Eigen::Index i = 0; i < p.zeta0_u.size(); ++i) p.zeta0_u(i) += rng.uniform(-1.0, 1.0);
  }

  if (spec.parameterization == Parameterization::LC) {
    for (Eigen::Index v = 0; v < kv; ++v)
      for (std::size_t j = 0; j < r; ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        const auto d = static_cast<Eigen::Index>(spec.items.dim_of[j]);
        p.lc_prob(v, jj) = std::clamp(sigmoid(p.xi(v, d) - p.beta(jj)), 1e-6, 1.0 - 1e-6);
      }
  }
  return p;
}

FitResult fit(const ResponseDataset& data, const ModelSpec& spec, const FitControls& controls,
              const ParameterSet& init, const EStepObserver& observer) {
  check_controls(controls);
  if (const auto issues = validate_spec(spec); !issues.empty())
    throw std::invalid_argument("invalid model spec: " + issues.front());
  check_dataset(data, spec);
  check_parameters(spec, init);

  FitResult result;
  ParameterSet params = apply_identifiability(init, spec);
  PosteriorTables post = e_step(data, params, spec, controls.threads);
  if (observer) observer(post, params);
  result.trace.push_back(post.loglik);

  for (std::size_t it = 1; it <= controls.max_iter; ++it) {
    ParameterSet next = m_step(data, post, params, spec, controls);
    const double moved = max_abs_difference(next, params);
    PosteriorTables next_post = e_step(data, next, spec, controls.threads);
    if (observer) observer(next_post, next);
    result.trace.push_back(next_post.loglik);
    const double gain = next_post.loglik - post.loglik;
    params = std::move(next);
    post = std::move(next_post);
    result.n_iter = it;
    if (std::abs(gain) < controls.tol_loglik || moved < controls.tol_param) {
      result.converged = true;
      break;
    }
  }
  result.params = std::move(params);
  result.loglik = post.loglik;
  return result;
}

FitResult multistart_fit(const ResponseDataset& data, const ModelSpec& spec,
                         const FitControls& controls, const EStepObserver& observer) {
  check_controls(controls);
  std::optional<FitResult> best;
  std::ostringstream failures;
  for (std::size_t k = 0; k < controls.n_starts; ++k) {
    try {
      const ParameterSet init =
          k == 0 ? initialize(data, spec, InitStrategy::Deterministic, controls.seed)
                 : initialize(data, spec, InitStrategy::Random, substream_seed(controls.seed, k));
      FitResult res = fit(data, spec, controls, init, observer);
      res.start_index = k;
      if (!best || res.loglik > best->loglik + 1e-8) best = std::move(res);
    } catch (const std::invalid_argument&) {
      throw;  // input problems are not start-specific
    } catch (const std::exception& e) {
      failures << "start " << k << ": " << e.what() << "\n";
    }
  }
  if (!best) throw AllStartsFailed("all " + std::to_string(controls.n_starts) +
                                   " starts failed:\n" + failures.str());
  return *best;
}

}  // namespace mlirt
