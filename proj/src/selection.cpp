#include "mlirt/selection.hpp"

#include "mlirt/rng.hpp"
#include "mlirt/weights.hpp"

#include <cmath>
#include <stdexcept>

namespace mlirt {

double bic(double loglik, std::size_t n_par, std::size_t n) {
  if (n < 1) throw std::invalid_argument("BIC sample size must be at least 1");
  return -2.0 * loglik + std::log(static_cast<double>(n)) * static_cast<double>(n_par);
}

std::size_t BicSampleSize::resolve(const ResponseDataset& data) const {
  switch (kind) {
    case Kind::Students: return data.n_students();
    case Kind::Schools: return data.n_groups();
    case Kind::Explicit: return value;
  }
  return 0;
}

std::string BicSampleSize::describe() const {
  switch (kind) {
    case Kind::Students: return "students";
    case Kind::Schools: return "schools";
    case Kind::Explicit: return std::to_string(value);
  }
  return "?";
}

BicSampleSize BicSampleSize::parse(const std::string& text) {
  if (text == "students") return {Kind::Students, 0};
  if (text == "schools") return {Kind::Schools, 0};
  std::size_t pos = 0;
  unsigned long long n = 0;
  try {
    n = std::stoull(text, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != text.size() || n == 0)
    throw std::invalid_argument("--bic-n expects 'students', 'schools' or a positive integer, got '" +
                                text + "'");
  return {Kind::Explicit, static_cast<std::size_t>(n)};
}

std::optional<std::size_t> choose_by_stopping_rule(const std::vector<std::optional<double>>& bics) {
  std::optional<std::size_t> prev;
  for (std::size_t i = 0; i < bics.size(); ++i) {
    if (!bics[i]) continue;
    if (prev && *bics[i] > *bics[*prev]) return prev;
    prev = i;
  }
  return prev;
}

SweepResult sweep_school_types(const ResponseDataset& data, const ModelSpec& base_spec,
                               const std::vector<std::size_t>& k_u_values,
                               const FitControls& controls, const BicSampleSize& bic_n) {
  if (k_u_values.empty()) throw std::invalid_argument("empty k_U range");
  for (std::size_t i = 1; i < k_u_values.size(); ++i)
    if (k_u_values[i] <= k_u_values[i - 1])
      throw std::invalid_argument("k_U range must be strictly ascending");
  SweepResult result;
  result.bic_n = bic_n.resolve(data);
  std::vector<std::optional<double>> bics;
  for (std::size_t k_u : k_u_values) {
    if (k_u < base_spec.k_v)
      result.warnings.push_back("k_U = " + std::to_string(k_u) + " is below k_V = " +
                                std::to_string(base_spec.k_v) +
                                " (recommended k_U >= k_V)");
    ModelSpec spec = base_spec;
    spec.k_u = k_u;
    FitControls ctl = controls;
    ctl.seed = substream_seed(controls.seed, k_u);
    SweepRow row;
    row.k_u = k_u;
    row.n_par = count_free_parameters(spec);
    try {
      FitResult res = multistart_fit(data, spec, ctl);
      row.loglik = res.loglik;
      row.bic = bic(res.loglik, row.n_par, result.bic_n);
      row.converged = res.converged;
      row.fit = std::move(res);
      bics.emplace_back(row.bic);
    } catch (const std::invalid_argument&) {
      throw;
    } catch (const std::exception& e) {
      row.error = e.what();
      row.loglik = std::nan("");
      row.bic = std::nan("");
      bics.emplace_back(std::nullopt);
    }
    result.rows.push_back(std::move(row));
    const auto chosen = choose_by_stopping_rule(bics);
    if (chosen && *chosen + 1 < bics.size()) break;  // BIC went up: stop
  }
  const auto chosen = choose_by_stopping_rule(bics);
  if (!chosen) throw AllStartsFailed("every fit in the sweep failed");
  result.chosen_k_u = result.rows[*chosen].k_u;
  return result;
}

std::size_t argmax_lowest(const Eigen::VectorXd& values) {
  std::size_t best = 0;
  for (Eigen::Index k = 1; k < values.size(); ++k)
    if (values(k) > values(static_cast<Eigen::Index>(best))) best = static_cast<std::size_t>(k);
  return best;
}

std::vector<std::vector<Assignment>> assign_students(const PosteriorTables& post) {
  std::vector<std::vector<Assignment>> out(post.z_hiv.size());
  for (std::size_t h = 0; h < post.z_hiv.size(); ++h)
    for (const auto& z : post.z_hiv[h]) {
      const std::size_t v = argmax_lowest(z);
      out[h].push_back({v, z(static_cast<Eigen::Index>(v))});
    }
  return out;
}

std::vector<Assignment> assign_schools(const PosteriorTables& post) {
  std::vector<Assignment> out;
  for (Eigen::Index h = 0; h < post.z_hu.rows(); ++h) {
    const Eigen::VectorXd z = post.z_hu.row(h).transpose();
    const std::size_t u = argmax_lowest(z);
    out.push_back({u, z(static_cast<Eigen::Index>(u))});
  }
  return out;
}

Eigen::VectorXd average_weights(const std::vector<Eigen::VectorXd>& weights) {
  if (weights.empty()) throw std::invalid_argument("no weight vectors to average");
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(weights.front().size());
  for (const auto& w : weights) {
    if (w.size() != acc.size()) throw std::invalid_argument("weight vectors differ in length");
    acc += w;
  }
  return acc / static_cast<double>(weights.size());
}

AverageWeights average_class_weights(const ResponseDataset& data, const ParameterSet& params,
                                      const ModelSpec& spec, const PosteriorTables& post) {
  std::vector<Eigen::VectorXd> per_student;
  std::vector<Eigen::VectorXd> per_school;
  for (std::size_t h = 0; h < data.groups.size(); ++h) {
    const Eigen::VectorXd zu = post.z_hu.row(static_cast<Eigen::Index>(h)).transpose();
    per_school.push_back(zu);
    for (const auto& st : data.groups[h].students) {
      Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec.k_v));
      for (std::size_t u = 0; u < spec.k_u; ++u)
        w += zu(static_cast<Eigen::Index>(u)) * student_class_weights(params, st.x, u);
      per_student.push_back(std::move(w));
    }
  }
  return {average_weights(per_student), average_weights(per_school)};
}

Eigen::MatrixXd standardize_abilities(const Eigen::MatrixXd& xi, const Eigen::VectorXd& weights) {
  if (weights.size() != xi.rows())
    throw std::invalid_argument("one weight per class row is required");
  const Eigen::VectorXd w = weights / weights.sum();
  Eigen::MatrixXd out(xi.rows(), xi.cols());
  for (Eigen::Index d = 0; d < xi.cols(); ++d) {
    const double mean = w.dot(xi.col(d));
    const Eigen::VectorXd centered = xi.col(d).array() - mean;
    const double var = w.dot(centered.cwiseProduct(centered));
    const double scale = std::max(1.0, xi.col(d).cwiseAbs().maxCoeff());
    if (!(var > 1e-24 * scale * scale))
      out.col(d).setZero();
    else
      out.col(d) = centered / std::sqrt(var);
  }
  return out;
}

SupportPoints school_support_points(const ResponseDataset& data, const ParameterSet& params,
                                    const ModelSpec& spec, const PosteriorTables& post,
                                    const Eigen::VectorXd& class_weights) {
  const Eigen::MatrixXd xi_std = standardize_abilities(params.xi, class_weights);
  // class ability averaged over dimensions
  const Eigen::VectorXd raw_mean = params.xi.rowwise().mean();
  const Eigen::VectorXd std_mean = xi_std.rowwise().mean();
  SupportPoints out;
  for (std::size_t u = 0; u < spec.k_u; ++u) {
    const auto uu = static_cast<Eigen::Index>(u);
    double mass = 0.0, raw_acc = 0.0, std_acc = 0.0, peak = 0.0;
    for (std::size_t h = 0; h < data.groups.size(); ++h) {
      const auto& g = data.groups[h];
      const double z = post.z_hu(static_cast<Eigen::Index>(h), uu);
      peak = std::max(peak, z);
      double raw_school = 0.0, std_school = 0.0;
      for (const auto& st : g.students) {
        const Eigen::VectorXd pi = student_class_weights(params, st.x, u);
        raw_school += pi.dot(raw_mean);
        std_school += pi.dot(std_mean);
      }
      const double n = static_cast<double>(g.students.size());
      mass += z;
      raw_acc += z * raw_school / n;
      std_acc += z * std_school / n;
    }
    if (peak <= 1e-12) {
      out.raw.emplace_back(std::nullopt);
      out.standardized.emplace_back(std::nullopt);
    } else {
      out.raw.emplace_back(raw_acc / mass);
      out.standardized.emplace_back(std_acc / mass);
    }
  }
  return out;
}

Eigen::MatrixXd type_probabilities_by_profile(const ParameterSet& params,
                                              const Eigen::MatrixXd& profiles) {
  Eigen::MatrixXd out(profiles.rows(), params.zeta0_u.size() + 1);
  for (Eigen::Index k = 0; k < profiles.rows(); ++k)
    out.row(k) = school_type_weights(params, profiles.row(k).transpose()).transpose();
  return out;
}

ClassificationResult classify(const ResponseDataset& data, const ParameterSet& params,
                              const ModelSpec& spec, const PosteriorTables& post) {
  ClassificationResult out;
  out.students = assign_students(post);
  out.schools = assign_schools(post);
  out.average = average_class_weights(data, params, spec, post);
  out.standardized_xi = standardize_abilities(params.xi, out.average.classes);
  out.support = school_support_points(data, params, spec, post, out.average.classes);
  return out;
}

}  // namespace mlirt
