#include "mlirt/dataset_io.hpp"

#include "json_util.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace mlirt {

using detail::json;

ParseError::ParseError(std::string file_, std::size_t line_, std::size_t column_,
                       const std::string& msg)
    : std::runtime_error([&] {
        std::string where = file_;
        if (line_ > 0) where += ":" + std::to_string(line_);
        if (column_ > 0) where += ":" + std::to_string(column_);
        return where + ": " + msg;
      }()),
      file(std::move(file_)), line(line_), column(column_) {}

std::vector<std::string> CovariateDecl::indicator_levels() const {
  std::vector<std::string> out;
  for (const auto& l : levels)
    if (l != reference) out.push_back(l);
  return out;
}

std::vector<std::string> expanded_names(const std::vector<CovariateDecl>& decls) {
  std::vector<std::string> out;
  for (const auto& d : decls) {
    if (!d.categorical) {
      out.push_back(d.name);
      continue;
    }
    for (const auto& l : d.indicator_levels()) out.push_back(d.name + "=" + l);
  }
  return out;
}

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), 0, 0, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;  // (line number, fields)
};

CsvTable read_csv(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto fields = split_csv(line);
    if (t.header.empty()) {
      t.header = std::move(fields);
      continue;
    }
    if (fields.size() != t.header.size())
      throw ParseError(path.string(), lineno, 0,
                       "expected " + std::to_string(t.header.size()) + " fields, found " +
                           std::to_string(fields.size()));
    t.rows.emplace_back(lineno, std::move(fields));
  }
  if (t.header.empty()) throw ParseError(path.string(), 0, 0, "missing header row");
  return t;
}

double parse_number(const std::string& token, const std::string& file, std::size_t line,
                    std::size_t col) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(token, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != token.size() || !std::isfinite(v))
    throw ParseError(file, line, col, "expected a finite number, found '" + token + "'");
  return v;
}

// Column index of each declared covariate in header.
std::vector<std::size_t> locate_columns(const std::vector<std::string>& header,
                                        const std::vector<CovariateDecl>& decls,
                                        const std::string& file) {
  std::vector<std::size_t> cols;
  for (const auto& d : decls) {
    const auto it = std::find(header.begin(), header.end(), d.name);
    if (it == header.end()) throw ParseError(file, 1, 0, "missing covariate column '" + d.name + "'");
    cols.push_back(static_cast<std::size_t>(it - header.begin()));
  }
  return cols;
}

Eigen::VectorXd expand_covariates(const std::vector<std::string>& fields,
                                  const std::vector<CovariateDecl>& decls,
                                  const std::vector<std::size_t>& cols, const std::string& file,
                                  std::size_t line) {
  std::size_t width = 0;
  for (const auto& d : decls) width += d.width();
  Eigen::VectorXd x(static_cast<Eigen::Index>(width));
  Eigen::Index at = 0;
  for (std::size_t k = 0; k < decls.size(); ++k) {
    const auto& d = decls[k];
    const std::string& tok = fields[cols[k]];
    if (!d.categorical) {
      x(at++) = parse_number(tok, file, line, cols[k] + 1);
      continue;
    }
    if (std::find(d.levels.begin(), d.levels.end(), tok) == d.levels.end())
      throw ParseError(file, line, cols[k] + 1,
                       "level '" + tok + "' of covariate " + d.name + " is not declared");
    for (const auto& l : d.indicator_levels()) x(at++) = tok == l ? 1.0 : 0.0;
  }
  return x;
}

std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Raw field values of the covariates of one unit, reconstructed from the
// expanded vector.
std::vector<std::string> collapse_covariates(const Eigen::VectorXd& x,
                                             const std::vector<CovariateDecl>& decls) {
  std::vector<std::string> out;
  Eigen::Index at = 0;
  for (const auto& d : decls) {
    if (!d.categorical) {
      out.push_back(format_g17(x(at++)));
      continue;
    }
    std::string level = d.reference;
    for (const auto& l : d.indicator_levels())
      if (x(at++) == 1.0) level = l;
    out.push_back(level);
  }
  return out;
}

}  // namespace

ModelConfig parse_config(const std::string& text, const std::string& source) {
  const json j = detail::parse_json_text(text, source);
  try {
    return detail::config_from_json(j);
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError(source, 0, 0, e.what());
  }
}

ModelConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_file(path), path.string());
}

std::string config_to_text(const ModelConfig& config) {
  return detail::config_to_json(config).dump(2) + "\n";
}

void save_config(const std::filesystem::path& path, const ModelConfig& config) {
  write_file(path, config_to_text(config));
}

LoadedDataset load_dataset(const std::filesystem::path& students,
                           const std::filesystem::path& schools, const ModelConfig& config) {
  const std::string sfile = schools.string();
  const std::string pfile = students.string();
  if (!std::filesystem::exists(schools)) throw ParseError(sfile, 0, 0, "file not found");
  if (!std::filesystem::exists(students)) throw ParseError(pfile, 0, 0, "file not found");
  const CsvTable school_tab = read_csv(schools);
  const CsvTable student_tab = read_csv(students);
  LoadedDataset out;

  if (school_tab.header.front() != "school_id")
    throw ParseError(sfile, 1, 1, "first column must be school_id");
  const auto school_cols = locate_columns(school_tab.header, config.school_covariates, sfile);
  std::map<std::string, std::size_t> group_index;
  std::vector<Group> groups;
  for (const auto& [line, fields] : school_tab.rows) {
    const std::string& id = fields[0];
    if (id.empty()) throw ParseError(sfile, line, 1, "empty school_id");
    if (group_index.count(id)) throw ParseError(sfile, line, 1, "duplicate school_id '" + id + "'");
    group_index[id] = groups.size();
    Group g;
    g.id = id;
    g.w = expand_covariates(fields, config.school_covariates, school_cols, sfile, line);
    groups.push_back(std::move(g));
  }
  out.school_rows = school_tab.rows.size();

  const auto& header = student_tab.header;
  if (header.size() < 2 || header[0] != "school_id" || header[1] != "student_id")
    throw ParseError(pfile, 1, 1, "first columns must be school_id, student_id");
  std::size_t r = 0;
  while (2 + r < header.size() && header[2 + r].rfind("item_", 0) == 0) ++r;
  out.item_columns = r;
  if (r != config.spec.n_items())
    throw SpecMismatch(pfile + ": found " + std::to_string(r) + " item columns, the model has " +
                       std::to_string(config.spec.n_items()) + " items");
  const auto student_cols = locate_columns(header, config.student_covariates, pfile);
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& [line, fields] : student_tab.rows) {
    const auto it = group_index.find(fields[0]);
    if (it == group_index.end())
      throw ParseError(pfile, line, 1, "school_id '" + fields[0] + "' not in " + sfile);
    if (fields[1].empty()) throw ParseError(pfile, line, 2, "empty student_id");
    if (!seen.emplace(fields[0], fields[1]).second)
      throw ParseError(pfile, line, 2,
                       "duplicate student '" + fields[1] + "' in school '" + fields[0] + "'");
    Student st;
    st.id = fields[1];
    st.responses.resize(r);
    for (std::size_t j = 0; j < r; ++j) {
      const std::string& tok = fields[2 + j];
      if (tok == "1")
        st.responses[j] = Response::Right;
      else if (tok == "0")
        st.responses[j] = Response::Wrong;
      else if (tok == "NA" || tok.empty())
        st.responses[j] = Response::Missing;
      else
        throw ParseError(pfile, line, 3 + j, "response must be 0, 1 or NA, found '" + tok + "'");
    }
    st.x = expand_covariates(fields, config.student_covariates, student_cols, pfile, line);
    groups[it->second].students.push_back(std::move(st));
  }
  out.student_rows = student_tab.rows.size();

  for (auto& g : groups) {
    if (g.students.empty()) {
      out.warnings.push_back("school " + g.id + " has no students and was dropped");
      continue;
    }
    out.data.groups.push_back(std::move(g));
  }
  if (out.data.groups.empty()) throw ParseError(pfile, 0, 0, "no student rows");
  return out;
}

void write_dataset(const std::filesystem::path& students, const std::filesystem::path& schools,
                   const ResponseDataset& data, const ModelConfig& config) {
  std::ostringstream sc;
  sc << "school_id";
  for (const auto& d : config.school_covariates) sc << "," << d.name;
  sc << "\n";
  for (const auto& g : data.groups) {
    sc << g.id;
    for (const auto& v : collapse_covariates(g.w, config.school_covariates)) sc << "," << v;
    sc << "\n";
  }
  write_file(schools, sc.str());

  std::ostringstream st;
  st << "school_id,student_id";
  for (std::size_t j = 0; j < config.spec.n_items(); ++j) st << ",item_" << j + 1;
  for (const auto& d : config.student_covariates) st << "," << d.name;
  st << "\n";
  for (const auto& g : data.groups) {
    for (const auto& s : g.students) {
      st << g.id << "," << s.id;
      for (auto y : s.responses)
        st << (y == Response::Right ? ",1" : y == Response::Wrong ? ",0" : ",NA");
      for (const auto& v : collapse_covariates(s.x, config.student_covariates)) st << "," << v;
      st << "\n";
    }
  }
  write_file(students, st.str());
}

namespace {

std::vector<CovariateGenerator> generators_from_json(const json& j) {
  std::vector<CovariateGenerator> out;
  if (j.is_null()) return out;
  for (const auto& c : j) {
    CovariateGenerator g;
    g.name = c.at("name").get<std::string>();
    const std::string type = c.value("type", std::string("categorical"));
    if (type == "categorical") {
      g.kind = CovariateGenerator::Kind::Categorical;
      g.levels = c.at("levels").get<std::vector<std::string>>();
      if (c.contains("probs")) {
        g.probs = detail::vector_from_json(c["probs"], static_cast<Eigen::Index>(g.levels.size()),
                                           "probs of " + g.name);
      } else {
        g.probs = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(g.levels.size()),
                                            1.0 / static_cast<double>(g.levels.size()));
      }
    } else if (type == "normal") {
      g.kind = CovariateGenerator::Kind::Normal;
      g.mean = c.value("mean", 0.0);
      g.sd = c.value("sd", 1.0);
    } else {
      throw std::invalid_argument("covariate generator " + g.name + " has unknown type " + type);
    }
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<CovariateDecl> decls_for(const std::vector<CovariateGenerator>& gens) {
  std::vector<CovariateDecl> out;
  for (const auto& g : gens) {
    CovariateDecl d;
    d.name = g.name;
    d.categorical = g.kind == CovariateGenerator::Kind::Categorical;
    if (d.categorical) {
      d.levels = g.levels;
      d.reference = g.levels.front();
    }
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace

SimulationDesign parse_design(const std::string& text, const std::string& source) {
  const json j = detail::parse_json_text(text, source);
  try {
    SimulationDesign d;
    d.student_covariates = generators_from_json(j.value("student_covariates", json()));
    d.school_covariates = generators_from_json(j.value("school_covariates", json()));
    // reuse the model-config reader for the spec part, with declarations
    // derived from the generators
    json model = j;
    json sdecl = json::array(), gdecl = json::array();
    for (const auto& dd : decls_for(d.student_covariates)) {
      json c = {{"name", dd.name}, {"type", dd.categorical ? "categorical" : "numeric"}};
      if (dd.categorical) c["levels"] = dd.levels;
      sdecl.push_back(c);
    }
    for (const auto& dd : decls_for(d.school_covariates)) {
      json c = {{"name", dd.name}, {"type", dd.categorical ? "categorical" : "numeric"}};
      if (dd.categorical) c["levels"] = dd.levels;
      gdecl.push_back(c);
    }
    model["student_covariates"] = sdecl;
    model["school_covariates"] = gdecl;
    d.spec = detail::config_from_json(model).spec;
    d.truth = detail::params_from_json(j.at("truth"), d.spec);
    d.n_groups = j.at("schools").get<std::size_t>();
    const json& sizes = j.at("group_size");
    if (sizes.is_array()) {
      d.min_group_size = sizes.at(0).get<std::size_t>();
      d.max_group_size = sizes.at(1).get<std::size_t>();
    } else {
      d.min_group_size = d.max_group_size = sizes.get<std::size_t>();
    }
    d.mask_rate = j.value("mask_rate", 0.0);
    d.seed = j.value("seed", std::uint64_t{0});
    check_design(d);
    return d;
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError(source, 0, 0, e.what());
  }
}

SimulationDesign load_design(const std::filesystem::path& path) {
  return parse_design(read_file(path), path.string());
}

ModelConfig config_for_design(const SimulationDesign& design) {
  ModelConfig cfg;
  cfg.spec = design.spec;
  cfg.student_covariates = decls_for(design.student_covariates);
  cfg.school_covariates = decls_for(design.school_covariates);
  return cfg;
}

}  // namespace mlirt
