#include "mlirt/report_io.hpp"

#include "json_util.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace mlirt {

using detail::json;

double round_sig12(double x) { return detail::round_sig12(x); }

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), 0, 0, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json optional_to_json(const std::vector<std::optional<double>>& v) {
  json out = json::array();
  for (const auto& x : v) out.push_back(x ? json(round_sig12(*x)) : json(nullptr));
  return out;
}

std::vector<std::optional<double>> optional_from_json(const json& j) {
  std::vector<std::optional<double>> out;
  for (const auto& x : j) out.push_back(x.is_null() ? std::nullopt : std::optional(x.get<double>()));
  return out;
}

std::string g12(double x) {
  std::ostringstream ss;
  ss << std::setprecision(12) << x;
  return ss.str();
}

std::string profile_label(const Eigen::VectorXd& w, const std::vector<CovariateDecl>& decls) {
  std::string label;
  Eigen::Index at = 0;
  for (const auto& d : decls) {
    std::string part;
    if (!d.categorical) {
      part = d.name + "=" + g12(w(at++));
    } else {
      part = d.name + "=" + d.reference;
      for (const auto& l : d.indicator_levels())
        if (w(at++) == 1.0) part = d.name + "=" + l;
    }
    label += (label.empty() ? "" : ";") + part;
  }
  return label;
}

}  // namespace

std::vector<ProfileRow> school_profiles(const ResponseDataset& data, const ModelConfig& config,
                                        const ParameterSet& params, std::size_t limit) {
  std::vector<ProfileRow> rows;
  if (config.spec.m_u == 0) return rows;
  std::vector<Eigen::VectorXd> distinct;
  for (const auto& g : data.groups) {
    const bool known = std::any_of(distinct.begin(), distinct.end(),
                                   [&](const Eigen::VectorXd& w) { return w == g.w; });
    if (known) continue;
    distinct.push_back(g.w);
    if (distinct.size() > limit) return {};
  }
  std::sort(distinct.begin(), distinct.end(), [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
  });
  Eigen::MatrixXd profiles(static_cast<Eigen::Index>(distinct.size()),
                           static_cast<Eigen::Index>(config.spec.m_u));
  for (std::size_t k = 0; k < distinct.size(); ++k)
    profiles.row(static_cast<Eigen::Index>(k)) = distinct[k].transpose();
  const Eigen::MatrixXd probs = type_probabilities_by_profile(params, profiles);
  for (std::size_t k = 0; k < distinct.size(); ++k) {
    ProfileRow row;
    row.label = profile_label(distinct[k], config.school_covariates);
    row.covariates = distinct[k];
    row.probabilities = probs.row(static_cast<Eigen::Index>(k)).transpose();
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string fit_report_text(const FitReport& rep) {
  json j = json::object();
  j["model"] = detail::config_to_json(rep.config);
  j["parameters"] = detail::params_to_json(rep.params, true);
  json fit = json::object();
  fit["loglik"] = round_sig12(rep.loglik);
  fit["n_par"] = rep.n_par;
  fit["bic"] = round_sig12(rep.bic);
  fit["bic_n"] = rep.bic_n;
  fit["bic_n_rule"] = rep.bic_n_rule;
  fit["iterations"] = rep.n_iter;
  fit["converged"] = rep.converged;
  fit["best_start"] = rep.start_index;
  fit["schools"] = rep.n_schools;
  fit["students"] = rep.n_students;
  json trace = json::array();
  for (double v : rep.trace) trace.push_back(round_sig12(v));
  fit["trace"] = trace;
  j["fit"] = fit;
  json cls = json::object();
  cls["average_class_weights"] = detail::vector_to_json(rep.average_class_weights, true);
  cls["average_type_weights"] = detail::vector_to_json(rep.average_type_weights, true);
  cls["standardized_xi"] = detail::matrix_to_json(rep.standardized_xi, true);
  cls["support_points"] = optional_to_json(rep.support.raw);
  cls["standardized_support_points"] = optional_to_json(rep.support.standardized);
  json prof = json::array();
  for (const auto& p : rep.profiles) {
    json row = json::object();
    row["label"] = p.label;
    row["covariates"] = detail::vector_to_json(p.covariates, true);
    row["type_probabilities"] = detail::vector_to_json(p.probabilities, true);
    prof.push_back(row);
  }
  cls["school_profiles"] = prof;
  j["classification"] = cls;
  return j.dump(2) + "\n";
}

FitReport parse_fit_report(const std::string& text, const std::string& source) {
  const json j = detail::parse_json_text(text, source);
  try {
    FitReport rep;
    rep.config = detail::config_from_json(j.at("model"));
    const ModelSpec& spec = rep.config.spec;
    rep.params = detail::params_from_json(j.at("parameters"), spec);
    const json& fit = j.at("fit");
    rep.loglik = fit.at("loglik").get<double>();
    rep.n_par = fit.at("n_par").get<std::size_t>();
    rep.bic = fit.at("bic").get<double>();
    rep.bic_n = fit.at("bic_n").get<std::size_t>();
    rep.bic_n_rule = fit.at("bic_n_rule").get<std::string>();
    rep.n_iter = fit.at("iterations").get<std::size_t>();
    rep.converged = fit.at("converged").get<bool>();
    rep.start_index = fit.at("best_start").get<std::size_t>();
    rep.n_schools = fit.at("schools").get<std::size_t>();
    rep.n_students = fit.at("students").get<std::size_t>();
    rep.trace = fit.at("trace").get<std::vector<double>>();
    const json& cls = j.at("classification");
    const auto kv = static_cast<Eigen::Index>(spec.k_v);
    rep.average_class_weights = detail::vector_from_json(cls.at("average_class_weights"), kv,
                                                         "average_class_weights");
    rep.average_type_weights = detail::vector_from_json(
        cls.at("average_type_weights"), static_cast<Eigen::Index>(spec.k_u), "average_type_weights");
    rep.standardized_xi = detail::matrix_from_json(
        cls.at("standardized_xi"), kv,
        static_cast<Eigen::Index>(spec.n_dims()), "standardized_xi");
    rep.support.raw = optional_from_json(cls.at("support_points"));
    rep.support.standardized = optional_from_json(cls.at("standardized_support_points"));
    for (const auto& row : cls.at("school_profiles")) {
      ProfileRow p;
      p.label = row.at("label").get<std::string>();
      p.covariates = detail::vector_from_json(row.at("covariates"),
                                              static_cast<Eigen::Index>(spec.m_u), "covariates");
      p.probabilities = detail::vector_from_json(row.at("type_probabilities"),
                                                 static_cast<Eigen::Index>(spec.k_u),
                                                 "type_probabilities");
      rep.profiles.push_back(std::move(p));
    }
    return rep;
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError(source, 0, 0, e.what());
  }
}

void write_fit_report(const std::filesystem::path& path, const FitReport& report) {
  write_text(path, fit_report_text(report));
}

FitReport read_fit_report(const std::filesystem::path& path) {
  return parse_fit_report(read_text(path), path.string());
}

void write_student_assignments(const std::filesystem::path& path, const ResponseDataset& data,
                               const PosteriorTables& post) {
  const auto assigned = assign_students(post);
  std::ostringstream out;
  out << "school_id,student_id,class,posterior";
  const Eigen::Index kv = post.z_hiv.empty() || post.z_hiv[0].empty() ? 0 : post.z_hiv[0][0].size();
  for (Eigen::Index v = 0; v < kv; ++v) out << ",p_class_" << v + 1;
  out << "\n";
  for (std::size_t h = 0; h < data.groups.size(); ++h) {
    const auto& g = data.groups[h];
    for (std::size_t i = 0; i < g.students.size(); ++i) {
      const auto& a = assigned[h][i];
      out << g.id << "," << g.students[i].id << "," << a.label + 1 << "," << g12(a.posterior);
      for (Eigen::Index v = 0; v < kv; ++v) out << "," << g12(post.z_hiv[h][i](v));
      out << "\n";
    }
  }
  write_text(path, out.str());
}

void write_school_assignments(const std::filesystem::path& path, const ResponseDataset& data,
                              const PosteriorTables& post) {
  const auto assigned = assign_schools(post);
  std::ostringstream out;
  out << "school_id,type,posterior";
  for (Eigen::Index u = 0; u < post.z_hu.cols(); ++u) out << ",p_type_" << u + 1;
  out << "\n";
  for (std::size_t h = 0; h < data.groups.size(); ++h) {
    out << data.groups[h].id << "," << assigned[h].label + 1 << "," << g12(assigned[h].posterior);
    for (Eigen::Index u = 0; u < post.z_hu.cols(); ++u)
      out << "," << g12(post.z_hu(static_cast<Eigen::Index>(h), u));
    out << "\n";
  }
  write_text(path, out.str());
}

std::string parameters_text(const ParameterSet& params) {
  return detail::params_to_json(params, true).dump(2) + "\n";
}

void write_truth(const std::filesystem::path& path, const SimulationDesign& design,
                 const SimulatedData& sim) {
  json j = json::object();
  j["model"] = detail::config_to_json(config_for_design(design));
  j["seed"] = design.seed;
  j["parameters"] = detail::params_to_json(design.truth, false);
  json schools = json::array();
  for (std::size_t h = 0; h < sim.data.groups.size(); ++h) {
    json s = json::object();
    s["school_id"] = sim.data.groups[h].id;
    s["type"] = sim.school_types[h] + 1;
    json cls = json::array();
    for (auto v : sim.student_classes[h]) cls.push_back(v + 1);
    s["student_classes"] = cls;
    schools.push_back(s);
  }
  j["schools"] = schools;
  write_text(path, j.dump(2) + "\n");
}

std::string sweep_text(const SweepResult& sweep, const ModelSpec& base_spec) {
  std::ostringstream out;
  out << "k_V = " << base_spec.k_v << ", parameterization " << to_string(base_spec.parameterization)
      << ", BIC sample size " << sweep.bic_n << "\n";
  out << std::left << std::setw(6) << "k_U" << std::right << std::setw(20) << "loglik"
      << std::setw(8) << "n_par" << std::setw(20) << "BIC" << "  status\n";
  for (const auto& row : sweep.rows) {
    out << std::left << std::setw(6) << row.k_u << std::right;
    if (!row.error.empty()) {
      out << std::setw(20) << "-" << std::setw(8) << row.n_par << std::setw(20) << "-"
          << "  failed: " << row.error << "\n";
      continue;
    }
    out << std::setw(20) << g12(row.loglik) << std::setw(8) << row.n_par << std::setw(20)
        << g12(row.bic) << "  " << (row.converged ? "converged" : "not converged") << "\n";
  }
  for (const auto& w : sweep.warnings) out << "warning: " << w << "\n";
  if (sweep.chosen_k_u > 0)
    out << "chosen k_U = " << sweep.chosen_k_u << "\n";
  else
    out << "no k_U could be fitted\n";
  return out.str();
}

std::string sweep_csv(const SweepResult& sweep) {
  std::ostringstream out;
  out << "k_u,loglik,n_par,bic,converged,chosen\n";
  for (const auto& row : sweep.rows) {
    out << row.k_u << ",";
    if (row.error.empty())
      out << g12(row.loglik) << "," << row.n_par << "," << g12(row.bic) << ","
          << (row.converged ? 1 : 0);
    else
      out << "NA," << row.n_par << ",NA,0";
    out << "," << (row.k_u == sweep.chosen_k_u ? 1 : 0) << "\n";
  }
  return out.str();
}

}  // namespace mlirt
