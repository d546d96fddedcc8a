#include "oracles.hpp"

#include <cmath>
#include <limits>

namespace oracle {

using mlirt::Parameterization;
using mlirt::Response;

double success_prob(const ModelSpec& spec, const ParameterSet& p, std::size_t item,
                    std::size_t cls) {
  if (spec.parameterization == Parameterization::LC) return p.lc_prob(cls, item);
  const auto j = static_cast<Eigen::Index>(item);
  const double ability = p.xi(static_cast<Eigen::Index>(cls),
                              static_cast<Eigen::Index>(spec.items.dim_of[item]));
  const double gamma = spec.parameterization == Parameterization::OnePL ? 1.0 : p.gamma(j);
  return 1.0 / (1.0 + std::exp(-gamma * (ability - p.beta(j))));
}

namespace {

std::vector<double> softmax_ref0(const std::vector<double>& contrasts) {
  std::vector<double> e(contrasts.size() + 1);
  e[0] = 1.0;
  double total = 1.0;
  for (std::size_t k = 0; k < contrasts.size(); ++k) {
    e[k + 1] = std::exp(contrasts[k]);
    total += e[k + 1];
  }
  for (auto& v : e) v /= total;
  return e;
}

double response_prob(const ModelSpec& spec, const ParameterSet& p,
                     const std::vector<Response>& y, std::size_t cls) {
  double prod = 1.0;
  for (std::size_t j = 0; j < y.size(); ++j) {
    if (y[j] == Response::Missing) continue;
    const double q = success_prob(spec, p, j, cls);
    prod *= y[j] == Response::Right ? q : 1.0 - q;
  }
  return prod;
}

double response_logprob(const ModelSpec& spec, const ParameterSet& p,
                        const std::vector<Response>& y, std::size_t cls) {
  double sum = 0.0;
  for (std::size_t j = 0; j < y.size(); ++j) {
    if (y[j] == Response::Missing) continue;
    const double q = success_prob(spec, p, j, cls);
    sum += std::log(y[j] == Response::Right ? q : 1.0 - q);
  }
  return sum;
}

}  // namespace

std::vector<double> class_weights(const ParameterSet& p, const Eigen::VectorXd& x, std::size_t u) {
  std::vector<double> c(static_cast<std::size_t>(p.zeta0_v.cols()));
  for (std::size_t v = 0; v < c.size(); ++v) {
    double eta = p.zeta0_v(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(v));
    for (Eigen::Index a = 0; a < x.size(); ++a) eta += p.zeta1_v(static_cast<Eigen::Index>(v), a) * x(a);
    c[v] = eta;
  }
  return softmax_ref0(c);
}

std::vector<double> type_weights(const ParameterSet& p, const Eigen::VectorXd& w) {
  std::vector<double> c(static_cast<std::size_t>(p.zeta0_u.size()));
  for (std::size_t u = 0; u < c.size(); ++u) {
    double eta = p.zeta0_u(static_cast<Eigen::Index>(u));
    for (Eigen::Index a = 0; a < w.size(); ++a) eta += p.zeta1_u(static_cast<Eigen::Index>(u), a) * w(a);
    c[u] = eta;
  }
  return softmax_ref0(c);
}

double enumerated_loglik(const ResponseDataset& data, const ParameterSet& p,
                         const ModelSpec& spec) {
  double total = 0.0;
  for (const auto& g : data.groups) {
    const std::size_t n = g.students.size();
    const auto pu = type_weights(p, g.w);
    double lik = 0.0;
    for (std::size_t u = 0; u < spec.k_u; ++u) {
      std::vector<std::size_t> v(n, 0);
      while (true) {
        double term = pu[u];
        for (std::size_t i = 0; i < n; ++i) {
          const auto& s = g.students[i];
          term *= class_weights(p, s.x, u)[v[i]] * response_prob(spec, p, s.responses, v[i]);
        }
        lik += term;
        std::size_t pos = 0;
        while (pos < n && ++v[pos] == spec.k_v) v[pos++] = 0;
        if (pos == n) break;
      }
    }
    total += std::log(lik);
  }
  return total;
}

double single_level_loglik(const ResponseDataset& data, const ParameterSet& p,
                           const ModelSpec& spec) {
  std::vector<double> c;
  for (Eigen::Index v = 0; v < p.zeta0_v.cols(); ++v) c.push_back(p.zeta0_v(0, v));
  const auto pi = softmax_ref0(c);
  double total = 0.0;
  for (const auto& g : data.groups)
    for (const auto& s : g.students) {
      double lik = 0.0;
      for (std::size_t v = 0; v < spec.k_v; ++v) lik += pi[v] * response_prob(spec, p, s.responses, v);
      total += std::log(lik);
    }
  return total;
}

double item_objective(const ResponseDataset& data, const mlirt::PosteriorTables& post,
                      const ParameterSet& p, const ModelSpec& spec) {
  double total = 0.0;
  for (std::size_t h = 0; h < data.groups.size(); ++h)
    for (std::size_t i = 0; i < data.groups[h].students.size(); ++i)
      for (std::size_t v = 0; v < spec.k_v; ++v)
        total += post.z_hiv[h][i](static_cast<Eigen::Index>(v)) *
                 response_logprob(spec, p, data.groups[h].students[i].responses, v);
  return total;
}

double student_weight_objective(const ResponseDataset& data, const mlirt::PosteriorTables& post,
                                const ParameterSet& p, const ModelSpec& spec) {
  double total = 0.0;
  for (std::size_t h = 0; h < data.groups.size(); ++h)
    for (std::size_t i = 0; i < data.groups[h].students.size(); ++i)
      for (std::size_t u = 0; u < spec.k_u; ++u) {
        const auto pv = class_weights(p, data.groups[h].students[i].x, u);
        for (std::size_t v = 0; v < spec.k_v; ++v)
          total += post.z_joint[h][i](static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(v)) *
                   std::log(pv[v]);
      }
  return total;
}

double school_weight_objective(const ResponseDataset& data, const mlirt::PosteriorTables& post,
                               const ParameterSet& p, const ModelSpec& spec) {
  double total = 0.0;
  for (std::size_t h = 0; h < data.groups.size(); ++h) {
    const auto pu = type_weights(p, data.groups[h].w);
    for (std::size_t u = 0; u < spec.k_u; ++u)
      total += post.z_hu(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(u)) * std::log(pu[u]);
  }
  return total;
}

double posterior_violation(const mlirt::PosteriorTables& post) {
  double worst = 0.0;
  auto note = [&](double v) {
    if (!(std::abs(v) <= worst)) worst = std::isfinite(v) ? std::abs(v) : 1e300;
  };
  for (Eigen::Index h = 0; h < post.z_hu.rows(); ++h) {
    double sum = 0.0;
    for (Eigen::Index u = 0; u < post.z_hu.cols(); ++u) {
      note(std::min(post.z_hu(h, u), 0.0));
      sum += post.z_hu(h, u);
    }
    note(sum - 1.0);
    const auto hh = static_cast<std::size_t>(h);
    for (std::size_t i = 0; i < post.z_joint[hh].size(); ++i) {
      const auto& zj = post.z_joint[hh][i];
      const auto& zv = post.z_hiv[hh][i];
      double total = 0.0;
      for (Eigen::Index u = 0; u < zj.rows(); ++u) {
        double row = 0.0;
        for (Eigen::Index v = 0; v < zj.cols(); ++v) {
          note(std::min(zj(u, v), 0.0));
          row += zj(u, v);
        }
        note(row - post.z_hu(h, u));
      }
      for (Eigen::Index v = 0; v < zj.cols(); ++v) {
        double col = 0.0;
        for (Eigen::Index u = 0; u < zj.rows(); ++u) col += zj(u, v);
        note(col - zv(v));
        total += zv(v);
      }
      note(total - 1.0);
    }
  }
  return worst;
}

Eigen::VectorXd central_gradient(const Objective& f, const Eigen::VectorXd& x, double step) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    Eigen::VectorXd hi = x, lo = x;
    hi(k) += step;
    lo(k) -= step;
    g(k) = (f(hi) - f(lo)) / (2.0 * step);
  }
  return g;
}

MaximizeResult bfgs_maximize(const Objective& f, Eigen::VectorXd x, std::size_t max_iter,
                             double grad_tol) {
  const Eigen::Index n = x.size();
  const double h = 1e-6;
  double fx = f(x);
  Eigen::VectorXd g = central_gradient(f, x, h);
  Eigen::MatrixXd inv = Eigen::MatrixXd::Identity(n, n);  // inverse of the negative Hessian
  bool fresh = true;  // inv was just reset
  MaximizeResult out;
  for (std::size_t it = 0; it < max_iter; ++it) {
    out.iterations = it;
    if (g.lpNorm<Eigen::Infinity>() < grad_tol) break;
    Eigen::VectorXd d = inv * g;
    if (g.dot(d) <= 0) {
      inv.setIdentity();
      fresh = true;
      d = g;
    }
    double t = 1.0;
    Eigen::VectorXd xn;
    double fn = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < 60; ++k, t *= 0.5) {
      xn = x + t * d;
      fn = f(xn);
      if (std::isfinite(fn) && fn >= fx + 1e-4 * t * g.dot(d)) break;
    }
    const bool stalled = !(std::isfinite(fn) && fn - fx > 1e-15 * (1.0 + std::abs(fx)));
    if (stalled) {
      if (fresh) break;  // no progress even along the gradient
      inv.setIdentity();
      fresh = true;
      continue;
    }
    const Eigen::VectorXd gn = central_gradient(f, xn, h);
    const Eigen::VectorXd s = xn - x;
    const Eigen::VectorXd y = g - gn;  // gradient decrease along an ascent step
    const double sy = s.dot(y);
    if (sy > 1e-14) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
      inv = (id - rho * s * y.transpose()) * inv * (id - rho * y * s.transpose()) +
            rho * s * s.transpose();
      fresh = false;
    }
    x = xn;
    fx = fn;
    g = gn;
  }
  out.x = x;
  out.value = fx;
  return out;
}

Eigen::VectorXd pack_items(const ParameterSet& p, const ModelSpec& spec) {
  std::vector<double> v;
  if (spec.parameterization == Parameterization::LC) {
    for (Eigen::Index c = 0; c < p.lc_prob.rows(); ++c)
      for (Eigen::Index j = 0; j < p.lc_prob.cols(); ++j)
        v.push_back(std::log(p.lc_prob(c, j) / (1.0 - p.lc_prob(c, j))));
  } else {
    for (Eigen::Index c = 0; c < p.xi.rows(); ++c)
      for (Eigen::Index d = 0; d < p.xi.cols(); ++d) v.push_back(p.xi(c, d));
    // slope-intercept form gamma * xi + c with c = -gamma * beta
    for (std::size_t j = 0; j < spec.n_items(); ++j) {
      if (spec.items.is_reference(j)) continue;
      const auto jj = static_cast<Eigen::Index>(j);
      const double g = spec.parameterization == Parameterization::TwoPL ? p.gamma(jj) : 1.0;
      v.push_back(-g * p.beta(jj));
    }
    if (spec.parameterization == Parameterization::TwoPL)
      for (std::size_t j = 0; j < spec.n_items(); ++j)
        if (!spec.items.is_reference(j)) v.push_back(p.gamma(static_cast<Eigen::Index>(j)));
  }
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void unpack_items(const Eigen::VectorXd& v, ParameterSet& p, const ModelSpec& spec) {
  Eigen::Index at = 0;
  if (spec.parameterization == Parameterization::LC) {
    for (Eigen::Index c = 0; c < p.lc_prob.rows(); ++c)
      for (Eigen::Index j = 0; j < p.lc_prob.cols(); ++j) p.lc_prob(c, j) = 1.0 / (1.0 + std::exp(-v(at++)));
    return;
  }
  for (Eigen::Index c = 0; c < p.xi.rows(); ++c)
    for (Eigen::Index d = 0; d < p.xi.cols(); ++d) p.xi(c, d) = v(at++);
  std::vector<std::pair<Eigen::Index, double>> intercepts;
  for (std::size_t j = 0; j < spec.n_items(); ++j)
    if (!spec.items.is_reference(j)) intercepts.emplace_back(static_cast<Eigen::Index>(j), v(at++));
  if (spec.parameterization == Parameterization::TwoPL)
    for (const auto& [jj, c] : intercepts) p.gamma(jj) = v(at++);
  for (const auto& [jj, c] : intercepts) p.beta(jj) = -c / p.gamma(jj);
}

namespace {

void append(std::vector<double>& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
}

void extract(const Eigen::VectorXd& v, Eigen::Index& at, Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = v(at++);
}

Eigen::VectorXd to_vector(std::vector<double> v) {
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

Eigen::VectorXd pack_student_weights(const ParameterSet& p) {
  std::vector<double> v;
  append(v, p.zeta0_v);
  append(v, p.zeta1_v);
  return to_vector(std::move(v));
}

void unpack_student_weights(const Eigen::VectorXd& v, ParameterSet& p) {
  Eigen::Index at = 0;
  extract(v, at, p.zeta0_v);
  extract(v, at, p.zeta1_v);
}

Eigen::VectorXd pack_school_weights(const ParameterSet& p) {
  std::vector<double> v;
  append(v, p.zeta0_u);
  append(v, p.zeta1_u);
  return to_vector(std::move(v));
}

void unpack_school_weights(const Eigen::VectorXd& v, ParameterSet& p) {
  Eigen::Index at = 0;
  Eigen::MatrixXd z0 = p.zeta0_u;
  extract(v, at, z0);
  p.zeta0_u = z0;
  extract(v, at, p.zeta1_u);
}

ModelSpec make_spec(const InstanceShape& shape) {
  std::vector<std::size_t> dims(shape.items);
  for (std::size_t j = 0; j < shape.items; ++j) dims[j] = j % shape.dims;
  ModelSpec spec;
  spec.items = mlirt::ItemBank::from_dimension_map(dims);
  spec.k_v = shape.k_v;
  spec.k_u = shape.k_u;
  spec.parameterization = shape.parameterization;
  spec.m_v = shape.m_v;
  spec.m_u = shape.m_u;
  return spec;
}

ParameterSet random_params(const ModelSpec& spec, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  auto fill = [&](Eigen::MatrixXd& m, double scale) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = scale * unit(rng);
  };
  ParameterSet p = ParameterSet::neutral(spec);
  for (std::size_t j = 0; j < spec.n_items(); ++j) {
    if (spec.items.is_reference(j)) continue;
    p.beta(static_cast<Eigen::Index>(j)) = unit(rng);
    if (spec.parameterization == Parameterization::TwoPL)
      p.gamma(static_cast<Eigen::Index>(j)) = 1.1 + 0.5 * unit(rng);
  }
  fill(p.xi, 1.5);
  fill(p.zeta0_v, 1.0);
  fill(p.zeta1_v, 1.0);
  Eigen::MatrixXd z0u = p.zeta0_u;
  fill(z0u, 1.0);
  p.zeta0_u = z0u;
  fill(p.zeta1_u, 1.0);
  if (spec.parameterization == Parameterization::LC)
    for (Eigen::Index c = 0; c < p.lc_prob.rows(); ++c)
      for (Eigen::Index j = 0; j < p.lc_prob.cols(); ++j) p.lc_prob(c, j) = 0.5 + 0.35 * unit(rng);
  return p;
}

ResponseDataset random_data(const InstanceShape& shape, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> size(shape.min_students, shape.max_students);
  ResponseDataset data;
  for (std::size_t h = 0; h < shape.groups; ++h) {
    mlirt::Group g;
    g.id = "G" + std::to_string(h + 1);
    g.w.resize(static_cast<Eigen::Index>(shape.m_u));
    for (Eigen::Index a = 0; a < g.w.size(); ++a) g.w(a) = normal(rng);
    const std::size_t n = size(rng);
    for (std::size_t i = 0; i < n; ++i) {
      mlirt::Student s;
      s.id = "P" + std::to_string(i + 1);
      s.x.resize(static_cast<Eigen::Index>(shape.m_v));
      for (Eigen::Index a = 0; a < s.x.size(); ++a) s.x(a) = normal(rng);
      for (std::size_t j = 0; j < shape.items; ++j) {
        if (u01(rng) < shape.missing_rate)
          s.responses.push_back(Response::Missing);
        else
          s.responses.push_back(u01(rng) < 0.5 ? Response::Right : Response::Wrong);
      }
      g.students.push_back(std::move(s));
    }
    data.groups.push_back(std::move(g));
  }
  return data;
}

ResponseDataset model_data(const InstanceShape& shape, const ModelSpec& spec,
                           const ParameterSet& p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto draw = [&](const std::vector<double>& probs) {
    double t = u01(rng);
    for (std::size_t k = 0; k + 1 < probs.size(); ++k) {
      if (t < probs[k]) return k;
      t -= probs[k];
    }
    return probs.size() - 1;
  };
  ResponseDataset data = random_data(shape, rng);
  for (auto& g : data.groups) {
    const std::size_t u = draw(type_weights(p, g.w));
    for (auto& s : g.students) {
      const std::size_t v = draw(class_weights(p, s.x, u));
      for (std::size_t j = 0; j < s.responses.size(); ++j)
        if (s.responses[j] != Response::Missing)
          s.responses[j] = u01(rng) < success_prob(spec, p, j, v) ? Response::Right : Response::Wrong;
    }
  }
  return data;
}

}  // namespace oracle
