#include "mlirt/item_block.hpp"

#include "mlirt/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mlirt {

ItemStats accumulate_item_stats(const ResponseDataset& data, const PosteriorTables& post,
                                std::size_t k_v, std::size_t r) {
  const auto kv = static_cast<Eigen::Index>(k_v);
  const auto rr = static_cast<Eigen::Index>(r);
  ItemStats st{Eigen::MatrixXd::Zero(kv, rr), Eigen::MatrixXd::Zero(kv, rr)};
  for (std::size_t h = 0; h < data.groups.size(); ++h) {
    const auto& g = data.groups[h];
    for (std::size_t i = 0; i < g.students.size(); ++i) {
      const Eigen::VectorXd& z = post.z_hiv[h][i];
      const auto& y = g.students[i].responses;
      for (std::size_t j = 0; j < r; ++j) {
        if (y[j] == Response::Missing) continue;
        const auto jj = static_cast<Eigen::Index>(j);
        st.trials.col(jj) += z;
        if (y[j] == Response::Right) st.successes.col(jj) += z;
      }
    }
  }
  return st;
}

namespace {

double cell_loglik(double trials, double successes, double z) {
  double acc = 0.0;
  if (successes != 0.0) acc += successes * log_sigmoid(z);
  const double failures = trials - successes;
  if (failures != 0.0) acc += failures * log_sigmoid(-z);
  return acc;
}

// One dimension of the logistic item block, in slope-intercept form: the
// logit of free item j in class v is gamma_j * xi_v + c_j with c_j = -gamma_j
// beta_j, which stays smooth where gamma_j crosses zero. Unknowns are packed
// as [xi_0..xi_{kV-1}, c of free items, gamma of free items (2PL only)].
class DimensionProblem {
 public:
  DimensionProblem(const ItemStats& stats, const ModelSpec& spec, std::size_t d)
      : stats_(stats), two_pl_(spec.parameterization == Parameterization::TwoPL),
        kv_(static_cast<Eigen::Index>(spec.k_v)), ref_(spec.items.reference_item[d]) {
    for (auto j : spec.items.items_of(d))
      if (j != ref_) free_.push_back(j);
    nf_ = static_cast<Eigen::Index>(free_.size());
  }

  Eigen::Index size() const { return kv_ + nf_ * (two_pl_ ? 2 : 1); }

  Eigen::VectorXd pack(const ParameterSet& p, std::size_t d) const {
    Eigen::VectorXd x(size());
    x.head(kv_) = p.xi.col(static_cast<Eigen::Index>(d));
    for (Eigen::Index f = 0; f < nf_; ++f) {
      const auto j = static_cast<Eigen::Index>(free_[static_cast<std::size_t>(f)]);
      const double gam = two_pl_ ? p.gamma(j) : 1.0;
      x(kv_ + f) = -gam * p.beta(j);
      if (two_pl_) x(kv_ + nf_ + f) = gam;
    }
    return x;
  }

  void unpack(const Eigen::VectorXd& x, ParameterSet& p, std::size_t d) const {
    p.xi.col(static_cast<Eigen::Index>(d)) = x.head(kv_);
    for (Eigen::Index f = 0; f < nf_; ++f) {
      const auto j = static_cast<Eigen::Index>(free_[static_cast<std::size_t>(f)]);
      const double gam = two_pl_ ? x(kv_ + nf_ + f) : 1.0;
      p.beta(j) = -x(kv_ + f) / gam;
      if (two_pl_) p.gamma(j) = gam;
    }
  }

  double objective(const Eigen::VectorXd& x) const {
    double acc = 0.0;
    const auto ref = static_cast<Eigen::Index>(ref_);
    for (Eigen::Index v = 0; v < kv_; ++v) {
      acc += cell_loglik(stats_.trials(v, ref), stats_.successes(v, ref), x(v));
      for (Eigen::Index f = 0; f < nf_; ++f) {
        const auto j = static_cast<Eigen::Index>(free_[static_cast<std::size_t>(f)]);
        acc += cell_loglik(stats_.trials(v, j), stats_.successes(v, j), logit_of(x, v, f));
      }
    }
    return acc;
  }

  // Gradient and negated Hessian of objective at x.
  void derivatives(const Eigen::VectorXd& x, Eigen::VectorXd& grad, Eigen::MatrixXd& neg_hess) const {
    const Eigen::Index n = size();
    grad = Eigen::VectorXd::Zero(n);
    neg_hess = Eigen::MatrixXd::Zero(n, n);
    const auto ref = static_cast<Eigen::Index>(ref_);
    for (Eigen::Index v = 0; v < kv_; ++v) {
      {
        const double t = stats_.trials(v, ref);
        const double s = sigmoid(x(v));
        grad(v) += stats_.successes(v, ref) - t * s;
        neg_hess(v, v) += t * s * (1.0 - s);
      }
      for (Eigen::Index f = 0; f < nf_; ++f) {
        const auto j = static_cast<Eigen::Index>(free_[static_cast<std::size_t>(f)]);
        const double t = stats_.trials(v, j);
        if (t == 0.0) continue;
        const double s = sigmoid(logit_of(x, v, f));
        const double g = stats_.successes(v, j) - t * s;
        const double w = t * s * (1.0 - s);
        const Eigen::Index ic = kv_ + f;
        const double gam = two_pl_ ? x(kv_ + nf_ + f) : 1.0;
        // dz/dxi_v = gamma, dz/dc = 1, dz/dgamma = xi_v
        grad(v) += g * gam;
        grad(ic) += g;
        neg_hess(v, v) += w * gam * gam;
        neg_hess(ic, ic) += w;
        neg_hess(v, ic) += w * gam;
        neg_hess(ic, v) += w * gam;
        if (two_pl_) {
          const Eigen::Index ig = kv_ + nf_ + f;
          const double xv = x(v);
          grad(ig) += g * xv;
          neg_hess(ig, ig) += w * xv * xv;
          neg_hess(ig, ic) += w * xv;
          neg_hess(ic, ig) += w * xv;
          // d2z/dgamma dxi_v = 1
          neg_hess(ig, v) += w * xv * gam - g;
          neg_hess(v, ig) += w * xv * gam - g;
        }
      }
    }
  }

  // Start built from the cell proportions alone: class abilities are the
  // smoothed logits of the reference item, and each free item's (gamma, c)
  // comes from a weighted least-squares line through its class logits.
  Eigen::VectorXd data_start(const Eigen::VectorXd& current) const {
    Eigen::VectorXd x = current;
    const auto ref = static_cast<Eigen::Index>(ref_);
    auto smoothed_logit = [&](Eigen::Index v, Eigen::Index j) {
      return logit((stats_.successes(v, j) + 0.5) / (stats_.trials(v, j) + 1.0));
    };
    for (Eigen::Index v = 0; v < kv_; ++v) x(v) = smoothed_logit(v, ref);
    for (Eigen::Index f = 0; f < nf_; ++f) {
      const auto j = static_cast<Eigen::Index>(free_[static_cast<std::size_t>(f)]);
      double sw = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
      for (Eigen::Index v = 0; v < kv_; ++v) {
        const double w = stats_.trials(v, j) + 1.0;
        const double y = smoothed_logit(v, j);
        sw += w;
        sx += w * x(v);
        sy += w * y;
        sxx += w * x(v) * x(v);
        sxy += w * x(v) * y;
      }
      const double var = sxx - sx * sx / sw;
      double gam = 1.0;
      if (two_pl_ && var > 1e-8 * sw) gam = (sxy - sx * sy / sw) / var;
      if (two_pl_ && std::abs(gam) < 1e-3) gam = 1e-3;
      x(kv_ + f) = (sy - gam * sx) / sw;
      if (two_pl_) x(kv_ + nf_ + f) = gam;
    }
    return x;
  }

 private:
  double logit_of(const Eigen::VectorXd& x, Eigen::Index v, Eigen::Index f) const {
    const double gam = two_pl_ ? x(kv_ + nf_ + f) : 1.0;
    return gam * x(v) + x(kv_ + f);
  }

  const ItemStats& stats_;
  bool two_pl_;
  Eigen::Index kv_;
  std::size_t ref_;
  std::vector<std::size_t> free_;
  Eigen::Index nf_ = 0;
};

Eigen::VectorXd newton_ascent(const DimensionProblem& prob, Eigen::VectorXd x,
                              const NewtonOptions& options, const std::string& block_id,
                              double& obj) {
  obj = prob.objective(x);
  Eigen::VectorXd grad;
  Eigen::MatrixXd neg_hess;
  for (std::size_t it = 0; it < options.max_iter; ++it) {
    prob.derivatives(x, grad, neg_hess);
    const Eigen::VectorXd delta = damped_solve(neg_hess, grad);
    double step = 1.0;
    bool accepted = false;
    bool any_finite = false;
    Eigen::VectorXd trial;
    for (std::size_t half = 0; half <= options.max_halvings; ++half, step *= 0.5) {
      trial = x + step * delta;
      const double cand = prob.objective(trial);
      if (!std::isfinite(cand)) continue;
      any_finite = true;
      if (cand >= obj) {
        obj = cand;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (!any_finite) throw NewtonFailure(block_id, "non-finite objective after step halving");
      break;
    }
    const double moved = step * delta.cwiseAbs().maxCoeff();
    x = trial;
    if (moved < options.tol) break;
  }
  return x;
}

}  // namespace

double item_block_objective(const ItemStats& stats, const ModelSpec& spec,
                            const ParameterSet& params) {
  double acc = 0.0;
  for (Eigen::Index v = 0; v < stats.trials.rows(); ++v)
    for (Eigen::Index j = 0; j < stats.trials.cols(); ++j)
      acc += cell_loglik(stats.trials(v, j), stats.successes(v, j),
                         item_logit(spec, params, static_cast<std::size_t>(j),
                                    static_cast<std::size_t>(v)));
  return acc;
}

ParameterSet fit_item_block(const ItemStats& stats, const ModelSpec& spec,
                            const ParameterSet& start, const NewtonOptions& options) {
  ParameterSet out = start;
  if (spec.parameterization == Parameterization::LC) {
    constexpr double lo = 1e-8;
    for (Eigen::Index v = 0; v < stats.trials.rows(); ++v)
      for (Eigen::Index j = 0; j < stats.trials.cols(); ++j)
        if (stats.trials(v, j) > 0.0)
          out.lc_prob(v, j) =
              std::clamp(stats.successes(v, j) / stats.trials(v, j), lo, 1.0 - lo);
    return out;
  }

  for (std::size_t d = 0; d < spec.n_dims(); ++d) {
    const DimensionProblem prob(stats, spec, d);
    const std::string block_id = "item block, dimension " + std::to_string(d);
    const Eigen::VectorXd x0 = prob.pack(out, d);
    if (!std::isfinite(prob.objective(x0)))
      throw NewtonFailure(block_id, "objective not finite at start");
    double best_obj = 0.0;
    Eigen::VectorXd best = newton_ascent(prob, x0, options, block_id, best_obj);
    // A second run from the data-driven start guards against ascent paths
    // that lead off to infinity from a poor current point.
    const Eigen::VectorXd x1 = prob.data_start(x0);
    if (std::isfinite(prob.objective(x1))) {
      double alt_obj = 0.0;
      Eigen::VectorXd alt = newton_ascent(prob, x1, options, block_id, alt_obj);
      if (alt_obj > best_obj) {
        best = std::move(alt);
        best_obj = alt_obj;
      }
    }
    prob.unpack(best, out, d);
  }
  return out;
}

}  // namespace mlirt
