#include "mlirt/multinomial_logit.hpp"

#include "mlirt/numeric.hpp"

#include <cmath>
#include <map>
#include <vector>

namespace mlirt {

Eigen::VectorXd damped_solve(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  const Eigen::Index n = a.rows();
  if (n == 0) return Eigen::VectorXd();
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() == Eigen::Success) {
    Eigen::VectorXd x = llt.solve(b);
    if (x.allFinite()) return x;
  }
  const double scale = 1.0 + a.diagonal().cwiseAbs().maxCoeff();
  double lambda = 1e-10 * scale;
  for (int attempt = 0; attempt < 40; ++attempt, lambda *= 10.0) {
    Eigen::MatrixXd damped = a;
    damped.diagonal().array() += lambda;
    llt.compute(damped);
    if (llt.info() == Eigen::Success) {
      Eigen::VectorXd x = llt.solve(b);
      if (x.allFinite()) return x;
    }
  }
  return Eigen::VectorXd::Zero(n);
}

namespace {

// Category log-probabilities for one case, reference first.
Eigen::VectorXd case_log_probs(const Eigen::RowVectorXd& f, const Eigen::MatrixXd& coef) {
  Eigen::VectorXd eta(coef.cols() + 1);
  eta(0) = 0.0;
  eta.tail(coef.cols()) = (f * coef).transpose();
  return eta.array() - log_sum_exp(eta);
}

// Cases with identical feature rows contribute through the sum of their
// targets, so they are merged before the Newton iterations.
void merge_identical_cases(const Eigen::MatrixXd& features, const Eigen::MatrixXd& targets,
                           Eigen::MatrixXd& merged_features, Eigen::MatrixXd& merged_targets) {
  std::map<std::vector<double>, Eigen::Index> slot;
  std::vector<Eigen::Index> where(static_cast<std::size_t>(features.rows()));
  for (Eigen::Index c = 0; c < features.rows(); ++c) {
    std::vector<double> key(static_cast<std::size_t>(features.cols()));
    for (Eigen::Index a = 0; a < features.cols(); ++a) key[static_cast<std::size_t>(a)] = features(c, a);
    const auto [it, fresh] = slot.emplace(std::move(key), static_cast<Eigen::Index>(slot.size()));
    where[static_cast<std::size_t>(c)] = it->second;
  }
  const auto n = static_cast<Eigen::Index>(slot.size());
  merged_features.resize(n, features.cols());
  merged_targets = Eigen::MatrixXd::Zero(n, targets.cols());
  for (Eigen::Index c = 0; c < features.rows(); ++c) {
    const Eigen::Index m = where[static_cast<std::size_t>(c)];
    merged_features.row(m) = features.row(c);
    merged_targets.row(m) += targets.row(c);
  }
}

}  // namespace

double weighted_multinomial_loglik(const Eigen::MatrixXd& features,
                                   const Eigen::MatrixXd& targets, const Eigen::MatrixXd& coef) {
  double acc = 0.0;
  for (Eigen::Index c = 0; c < features.rows(); ++c) {
    const Eigen::VectorXd lp = case_log_probs(features.row(c), coef);
    for (Eigen::Index k = 0; k < lp.size(); ++k)
      if (targets(c, k) != 0.0) acc += targets(c, k) * lp(k);
  }
  return acc;
}

Eigen::MatrixXd weighted_multinomial_gradient(const Eigen::MatrixXd& features,
                                              const Eigen::MatrixXd& targets,
                                              const Eigen::MatrixXd& coef) {
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(coef.rows(), coef.cols());
  for (Eigen::Index c = 0; c < features.rows(); ++c) {
    const Eigen::VectorXd pi = case_log_probs(features.row(c), coef).array().exp();
    const double total = targets.row(c).sum();
    const Eigen::RowVectorXd resid =
        targets.row(c).tail(coef.cols()) - total * pi.tail(coef.cols()).transpose();
    grad += features.row(c).transpose() * resid;
  }
  return grad;
}

MultinomialFit fit_weighted_multinomial_logit(const Eigen::MatrixXd& all_features,
                                              const Eigen::MatrixXd& all_targets,
                                              const Eigen::MatrixXd& start,
                                              const NewtonOptions& options,
                                              const std::string& block_id) {
  MultinomialFit fit{start, {}};
  Eigen::MatrixXd features, targets;
  merge_identical_cases(all_features, all_targets, features, targets);
  const Eigen::Index p = start.rows();
  const Eigen::Index km1 = start.cols();
  const Eigen::Index dim = p * km1;
  double obj = weighted_multinomial_loglik(features, targets, fit.coef);
  if (!std::isfinite(obj)) throw NewtonFailure(block_id, "objective not finite at start");
  fit.report.objective = obj;
  if (dim == 0) {
    fit.report.converged = true;
    return fit;
  }

  for (std::size_t it = 0; it < options.max_iter; ++it) {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(dim);
    Eigen::MatrixXd neg_hess = Eigen::MatrixXd::Zero(dim, dim);
    for (Eigen::Index c = 0; c < features.rows(); ++c) {
      const double total = targets.row(c).sum();
      if (total == 0.0) continue;
      const Eigen::VectorXd pi = case_log_probs(features.row(c), fit.coef).array().exp();
      const Eigen::VectorXd q = pi.tail(km1);
      const Eigen::VectorXd f = features.row(c).transpose();
      const Eigen::MatrixXd ff = f * f.transpose();
      const Eigen::MatrixXd a = total * (Eigen::MatrixXd(q.asDiagonal()) - q * q.transpose());
      for (Eigen::Index k = 0; k < km1; ++k) {
        grad.segment(k * p, p) += (targets(c, k + 1) - total * q(k)) * f;
        for (Eigen::Index l = 0; l < km1; ++l)
          neg_hess.block(k * p, l * p, p, p) += a(k, l) * ff;
      }
    }
    const Eigen::VectorXd delta = damped_solve(neg_hess, grad);
    const double previous = obj;

    double step = 1.0;
    bool accepted = false;
    bool any_finite = false;
    Eigen::MatrixXd trial;
    for (std::size_t half = 0; half <= options.max_halvings; ++half, step *= 0.5) {
      trial = fit.coef + step * Eigen::Map<const Eigen::MatrixXd>(delta.data(), p, km1);
      const double cand = weighted_multinomial_loglik(features, targets, trial);
      if (!std::isfinite(cand)) continue;
      any_finite = true;
      if (cand >= obj) {
        obj = cand;
        accepted = true;
        break;
      }
    }
    fit.report.iterations = it + 1;
    if (!accepted) {
      if (!any_finite) throw NewtonFailure(block_id, "non-finite objective after step halving");
      fit.report.converged = true;  // no ascent direction left at working precision
      break;
    }
    const double moved = step * delta.cwiseAbs().maxCoeff();
    const double gain = obj - previous;
    fit.coef = trial;
    if (moved < options.tol || gain <= 1e-14 * (1.0 + std::abs(obj))) {
      fit.report.converged = true;
      break;
    }
  }
  fit.report.objective = obj;
  return fit;
}

}  // namespace mlirt
