#include "json_util.hpp"

#include <cmath>
#include <cstdio>
#include <algorithm>
#include <cstdlib>
#include <stdexcept>

namespace mlirt::detail {

double round_sig12(double x) {
  if (!std::isfinite(x) || x == 0.0) return x;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return std::strtod(buf, nullptr);
}

json vector_to_json(const Eigen::VectorXd& v, bool round) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(round ? round_sig12(v(i)) : v(i));
  return out;
}

json matrix_to_json(const Eigen::MatrixXd& m, bool round) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(vector_to_json(m.row(r).transpose(), round));
  return out;
}

Eigen::VectorXd vector_from_json(const json& j, Eigen::Index size, const std::string& what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != size)
    throw std::invalid_argument(what + ": expected an array of " + std::to_string(size) + " numbers");
  Eigen::VectorXd v(size);
  for (Eigen::Index i = 0; i < size; ++i) v(i) = j.at(static_cast<std::size_t>(i)).get<double>();
  return v;
}

Eigen::MatrixXd matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols,
                                 const std::string& what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
    throw std::invalid_argument(what + ": expected " + std::to_string(rows) + " rows");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    m.row(r) = vector_from_json(j.at(static_cast<std::size_t>(r)), cols, what).transpose();
  return m;
}

json params_to_json(const ParameterSet& p, bool round) {
  json j = json::object();
  j["beta"] = vector_to_json(p.beta, round);
  j["gamma"] = vector_to_json(p.gamma, round);
  j["xi"] = matrix_to_json(p.xi, round);
  j["zeta0_v"] = matrix_to_json(p.zeta0_v, round);
  j["zeta1_v"] = matrix_to_json(p.zeta1_v, round);
  j["zeta0_u"] = vector_to_json(p.zeta0_u, round);
  j["zeta1_u"] = matrix_to_json(p.zeta1_u, round);
  if (p.lc_prob.size() > 0) j["lc_prob"] = matrix_to_json(p.lc_prob, round);
  return j;
}

ParameterSet params_from_json(const json& j, const ModelSpec& spec) {
  const auto r = static_cast<Eigen::Index>(spec.n_items());
  const auto s = static_cast<Eigen::Index>(spec.n_dims());
  const auto kv = static_cast<Eigen::Index>(spec.k_v);
  const auto ku = static_cast<Eigen::Index>(spec.k_u);
  ParameterSet p = ParameterSet::neutral(spec);
  // Omitted blocks keep their neutral values.
  if (j.contains("beta")) p.beta = vector_from_json(j["beta"], r, "beta");
  if (j.contains("gamma")) p.gamma = vector_from_json(j["gamma"], r, "gamma");
  if (j.contains("xi")) p.xi = matrix_from_json(j["xi"], kv, s, "xi");
  if (j.contains("zeta0_v")) p.zeta0_v = matrix_from_json(j["zeta0_v"], ku, kv - 1, "zeta0_v");
  if (j.contains("zeta1_v"))
    p.zeta1_v = matrix_from_json(j["zeta1_v"], kv - 1, static_cast<Eigen::Index>(spec.m_v), "zeta1_v");
  if (j.contains("zeta0_u")) p.zeta0_u = vector_from_json(j["zeta0_u"], ku - 1, "zeta0_u");
  if (j.contains("zeta1_u"))
    p.zeta1_u = matrix_from_json(j["zeta1_u"], ku - 1, static_cast<Eigen::Index>(spec.m_u), "zeta1_u");
  if (spec.parameterization == Parameterization::LC && j.contains("lc_prob"))
    p.lc_prob = matrix_from_json(j["lc_prob"], kv, r, "lc_prob");
  check_parameters(spec, p);
  return p;
}

namespace {

json decls_to_json(const std::vector<CovariateDecl>& decls) {
  json out = json::array();
  for (const auto& d : decls) {
    json c = json::object();
    c["name"] = d.name;
    c["type"] = d.categorical ? "categorical" : "numeric";
    if (d.categorical) {
      c["levels"] = d.levels;
      c["reference"] = d.reference;
    }
    out.push_back(c);
  }
  return out;
}

std::vector<CovariateDecl> decls_from_json(const json& j, const std::string& where) {
  std::vector<CovariateDecl> out;
  if (j.is_null()) return out;
  if (!j.is_array()) throw std::invalid_argument(where + " must be an array");
  for (const auto& c : j) {
    CovariateDecl d;
    d.name = c.at("name").get<std::string>();
    const std::string type = c.value("type", std::string("numeric"));
    if (type == "categorical") {
      d.categorical = true;
      d.levels = c.at("levels").get<std::vector<std::string>>();
      if (d.levels.size() < 2)
        throw std::invalid_argument("categorical covariate " + d.name + " needs two or more levels");
      d.reference = c.value("reference", d.levels.front());
      if (std::find(d.levels.begin(), d.levels.end(), d.reference) == d.levels.end())
        throw std::invalid_argument("reference level " + d.reference + " of " + d.name +
                                    " is not among its levels");
    } else if (type != "numeric") {
      throw std::invalid_argument("covariate " + d.name + " has unknown type " + type);
    }
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace

json config_to_json(const ModelConfig& cfg) {
  json j = json::object();
  j["kv"] = cfg.spec.k_v;
  j["ku"] = cfg.spec.k_u;
  j["parameterization"] = std::string(to_string(cfg.spec.parameterization));
  json dims = json::array();
  for (auto d : cfg.spec.items.dim_of) dims.push_back(d + 1);
  j["dimensions"] = dims;
  json refs = json::array();
  for (auto r : cfg.spec.items.reference_item) refs.push_back(r + 1);
  j["reference_items"] = refs;
  j["student_covariates"] = decls_to_json(cfg.student_covariates);
  j["school_covariates"] = decls_to_json(cfg.school_covariates);
  json c = json::object();
  c["max_iter"] = cfg.controls.max_iter;
  c["tol_loglik"] = cfg.controls.tol_loglik;
  c["tol_param"] = cfg.controls.tol_param;
  c["newton_max_iter"] = cfg.controls.newton_max_iter;
  c["newton_tol"] = cfg.controls.newton_tol;
  c["starts"] = cfg.controls.n_starts;
  c["seed"] = cfg.controls.seed;
  c["threads"] = cfg.controls.threads;
  j["controls"] = c;
  j["bic_n"] = cfg.bic_n;
  return j;
}

ModelConfig config_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  ModelConfig cfg;
  cfg.spec.k_v = j.value("kv", std::size_t{1});
  cfg.spec.k_u = j.value("ku", std::size_t{1});
  cfg.spec.parameterization = parse_parameterization(j.value("parameterization", std::string("2pl")));
  if (j.contains("dimensions")) {
    std::vector<std::size_t> dims;
    for (const auto& d : j["dimensions"]) {
      const auto v = d.get<long long>();
      if (v < 1) throw std::invalid_argument("dimensions are numbered from 1");
      dims.push_back(static_cast<std::size_t>(v - 1));
    }
    cfg.spec.items = ItemBank::from_dimension_map(std::move(dims));
    if (j.contains("items") && j["items"].get<std::size_t>() != cfg.spec.n_items())
      throw std::invalid_argument("'items' disagrees with the length of 'dimensions'");
  } else if (j.contains("items")) {
    cfg.spec.items = ItemBank::unidimensional(j["items"].get<std::size_t>());
  } else {
    throw std::invalid_argument("config needs 'dimensions' or 'items'");
  }
  if (j.contains("reference_items")) {
    std::vector<std::size_t> refs;
    for (const auto& r : j["reference_items"]) {
      const auto v = r.get<long long>();
      if (v < 1) throw std::invalid_argument("reference items are numbered from 1");
      refs.push_back(static_cast<std::size_t>(v - 1));
    }
    if (refs.size() != cfg.spec.n_dims())
      throw std::invalid_argument("one reference item per dimension is required");
    cfg.spec.items.reference_item = refs;
  }
  cfg.student_covariates = decls_from_json(j.value("student_covariates", json()), "student_covariates");
  cfg.school_covariates = decls_from_json(j.value("school_covariates", json()), "school_covariates");
  cfg.spec.m_v = 0;
  for (const auto& d : cfg.student_covariates) cfg.spec.m_v += d.width();
  cfg.spec.m_u = 0;
  for (const auto& d : cfg.school_covariates) cfg.spec.m_u += d.width();
  if (j.contains("controls")) {
    const json& c = j["controls"];
    auto& ctl = cfg.controls;
    ctl.max_iter = c.value("max_iter", ctl.max_iter);
    ctl.tol_loglik = c.value("tol_loglik", ctl.tol_loglik);
    ctl.tol_param = c.value("tol_param", ctl.tol_param);
    ctl.newton_max_iter = c.value("newton_max_iter", ctl.newton_max_iter);
    ctl.newton_tol = c.value("newton_tol", ctl.newton_tol);
    ctl.n_starts = c.value("starts", ctl.n_starts);
    ctl.seed = c.value("seed", ctl.seed);
    ctl.threads = c.value("threads", ctl.threads);
  }
  cfg.bic_n = j.value("bic_n", cfg.bic_n);
  if (const auto issues = validate_spec(cfg.spec); !issues.empty())
    throw std::invalid_argument("invalid model: " + issues.front());
  check_controls(cfg.controls);
  return cfg;
}

json parse_json_text(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(source, 0, 0, e.what());
  }
}

}  // namespace mlirt::detail
