#include "mlirt/likelihood.hpp"

#include "mlirt/numeric.hpp"
#include "mlirt/parallel.hpp"
#include "mlirt/weights.hpp"

#include <cmath>
#include <string>

namespace mlirt {

std::size_t ResponseDataset::n_students() const {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.students.size();
  return n;
}

void check_dataset(const ResponseDataset& data, const ModelSpec& spec) {
  if (data.groups.empty()) throw std::invalid_argument("dataset has no groups");
  for (const auto& g : data.groups) {
    if (g.students.empty()) throw std::invalid_argument("group " + g.id + " has no students");
    if (static_cast<std::size_t>(g.w.size()) != spec.m_u)
      throw std::invalid_argument("group " + g.id + " has " + std::to_string(g.w.size()) +
                                  " covariates, expected " + std::to_string(spec.m_u));
    if (!g.w.allFinite()) throw std::invalid_argument("group " + g.id + " covariate not finite");
    for (const auto& st : g.students) {
      if (st.responses.size() != spec.n_items())
        throw std::invalid_argument("student " + st.id + " in group " + g.id + " has " +
                                    std::to_string(st.responses.size()) + " responses, expected " +
                                    std::to_string(spec.n_items()));
      if (static_cast<std::size_t>(st.x.size()) != spec.m_v)
        throw std::invalid_argument("student " + st.id + " in group " + g.id + " has " +
                                    std::to_string(st.x.size()) + " covariates, expected " +
                                    std::to_string(spec.m_v));
      if (!st.x.allFinite())
        throw std::invalid_argument("student " + st.id + " covariate not finite");
    }
  }
}

ItemLogProbs item_log_probs(const ModelSpec& spec, const ParameterSet& params) {
  const auto kv = static_cast<Eigen::Index>(spec.k_v);
  const auto r = static_cast<Eigen::Index>(spec.n_items());
  ItemLogProbs t{Eigen::MatrixXd(kv, r), Eigen::MatrixXd(kv, r)};
  for (Eigen::Index v = 0; v < kv; ++v) {
    for (Eigen::Index j = 0; j < r; ++j) {
      if (spec.parameterization == Parameterization::LC) {
        const double p = params.lc_prob(v, j);
        t.log_p1(v, j) = std::log(p);
        t.log_p0(v, j) = std::log1p(-p);
      } else {
        const double z = item_logit(spec, params, static_cast<std::size_t>(j),
                                    static_cast<std::size_t>(v));
        t.log_p1(v, j) = log_sigmoid(z);
        t.log_p0(v, j) = log_sigmoid(-z);
      }
    }
  }
  return t;
}

double student_conditional_loglik(const std::vector<Response>& y, std::size_t cls,
                                  const ItemLogProbs& table) {
  const auto v = static_cast<Eigen::Index>(cls);
  double acc = 0.0;
  for (std::size_t j = 0; j < y.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    if (y[j] == Response::Right)
      acc += table.log_p1(v, jj);
    else if (y[j] == Response::Wrong)
      acc += table.log_p0(v, jj);
  }
  return acc;
}

double student_conditional_loglik(const std::vector<Response>& y, std::size_t cls,
                                  const ParameterSet& params, const ModelSpec& spec) {
  if (cls >= spec.k_v) throw std::out_of_range("class index out of range");
  if (y.size() != spec.n_items())
    throw std::invalid_argument("response vector length differs from item count");
  return student_conditional_loglik(y, cls, item_log_probs(spec, params));
}

Eigen::VectorXd student_class_logliks(const std::vector<Response>& y, const ItemLogProbs& table) {
  Eigen::VectorXd out(table.log_p1.rows());
  for (Eigen::Index v = 0; v < out.size(); ++v)
    out(v) = student_conditional_loglik(y, static_cast<std::size_t>(v), table);
  return out;
}

namespace {

double group_type_loglik(const Group& group, std::size_t u, const ParameterSet& params,
                         const ItemLogProbs& table) {
  double acc = 0.0;
  for (const auto& st : group.students) {
    const Eigen::VectorXd terms =
        student_class_log_weights(params, st.x, u) + student_class_logliks(st.responses, table);
    acc += log_sum_exp(terms);
  }
  return acc;
}

double group_marginal_loglik(const Group& group, const ParameterSet& params,
                             const ModelSpec& spec, const ItemLogProbs& table) {
  Eigen::VectorXd terms = school_type_log_weights(params, group.w);
  for (std::size_t u = 0; u < spec.k_u; ++u)
    terms(static_cast<Eigen::Index>(u)) += group_type_loglik(group, u, params, table);
  return log_sum_exp(terms);
}

}  // namespace

double group_conditional_loglik(const Group& group, std::size_t type, const ParameterSet& params,
                                const ModelSpec& spec) {
  if (type >= spec.k_u) throw std::out_of_range("school type index out of range");
  return group_type_loglik(group, type, params, item_log_probs(spec, params));
}

double marginal_loglik(const ResponseDataset& data, const ParameterSet& params,
                       const ModelSpec& spec, unsigned threads) {
  check_parameters(spec, params);
  check_dataset(data, spec);
  const ItemLogProbs table = item_log_probs(spec, params);
  std::vector<double> per_group(data.n_groups());
  detail::parallel_for(data.n_groups(), threads, [&](std::size_t h) {
    per_group[h] = group_marginal_loglik(data.groups[h], params, spec, table);
  });
  double total = 0.0;
  for (double v : per_group) total += v;
  return total;
}

double brute_force_loglik(const ResponseDataset& data, const ParameterSet& params,
                          const ModelSpec& spec, double cap) {
  check_parameters(spec, params);
  check_dataset(data, spec);
  double terms = 0.0;
  for (const auto& g : data.groups)
    terms += static_cast<double>(spec.k_u) *
             std::pow(static_cast<double>(spec.k_v), static_cast<double>(g.students.size()));
  if (terms > cap)
    throw EnumerationCapExceeded("brute-force enumeration needs " + std::to_string(terms) +
                                 " terms, cap is " + std::to_string(cap));

  // Linear-scale conditional probabilities p(y_hi | v).
  auto conditional = [&](const Student& st, std::size_t v) {
    double p = 1.0;
    for (std::size_t j = 0; j < spec.n_items(); ++j) {
      if (st.responses[j] == Response::Missing) continue;
      const double q = item_success_prob(spec, params, j, v);
      p *= st.responses[j] == Response::Right ? q : 1.0 - q;
    }
    return p;
  };

  double total = 0.0;
  for (const auto& g : data.groups) {
    const std::size_t n = g.students.size();
    const Eigen::VectorXd type_w = school_type_weights(params, g.w);
    double group_lik = 0.0;
    for (std::size_t u = 0; u < spec.k_u; ++u) {
      std::vector<Eigen::VectorXd> class_w;
      for (const auto& st : g.students) class_w.push_back(student_class_weights(params, st.x, u));
      std::vector<std::size_t> labels(n, 0);
      while (true) {
        double term = type_w(static_cast<Eigen::Index>(u));
        for (std::size_t i = 0; i < n; ++i)
          term *= class_w[i](static_cast<Eigen::Index>(labels[i])) *
                  conditional(g.students[i], labels[i]);
        group_lik += term;
        std::size_t pos = 0;
        while (pos < n && ++labels[pos] == spec.k_v) labels[pos++] = 0;
        if (pos == n) break;
      }
    }
    total += std::log(group_lik);
  }
  return total;
}

}  // namespace mlirt
