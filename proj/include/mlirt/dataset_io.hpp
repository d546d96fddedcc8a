#pragma once

#include "mlirt/dataset.hpp"
#include "mlirt/em.hpp"
#include "mlirt/model.hpp"
#include "mlirt/simulate.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace mlirt {

/// Error in an input file, located by 1-based line and column (field) number;
/// 0 means "whole file" or "whole line".
struct ParseError : std::runtime_error {
  ParseError(std::string file, std::size_t line, std::size_t column, const std::string& msg);
  std::string file;
  std::size_t line;
  std::size_t column;
};

/// A declared covariate column. Categorical columns expand to one indicator
/// per non-reference level, in declaration order.
struct CovariateDecl {
  std::string name;
  bool categorical = false;
  std::vector<std::string> levels;
  std::string reference;

  std::vector<std::string> indicator_levels() const;
  std::size_t width() const { return categorical ? levels.size() - 1 : 1; }
  bool operator==(const CovariateDecl&) const = default;
};

/// Expanded column names: "gender=F" for indicators, the plain name otherwise.
std::vector<std::string> expanded_names(const std::vector<CovariateDecl>& decls);

/// Everything the model config file declares.
struct ModelConfig {
  ModelSpec spec;  // m_v and m_u follow the covariate declarations
  std::vector<CovariateDecl> student_covariates;
  std::vector<CovariateDecl> school_covariates;
  FitControls controls;
  std::string bic_n = "students";
};

/// Parses the JSON model config. Throws ParseError (file = source).
ModelConfig parse_config(const std::string& text, const std::string& source = "<config>");
ModelConfig load_config(const std::filesystem::path& path);
std::string config_to_text(const ModelConfig& config);
void save_config(const std::filesystem::path& path, const ModelConfig& config);

struct LoadedDataset {
  ResponseDataset data;
  std::size_t student_rows = 0;
  std::size_t school_rows = 0;
  std::size_t item_columns = 0;
  std::vector<std::string> warnings;
};

/// Raised when a dataset's shape disagrees with the model config.
struct SpecMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Reads the comma-separated students and schools files. Students:
/// school_id, student_id, item_1..item_r (0, 1 or NA), then covariates by
/// name. Schools: school_id then covariates by name. Groups follow the order
/// of the schools file; schools without students are dropped with a warning.
LoadedDataset load_dataset(const std::filesystem::path& students,
                           const std::filesystem::path& schools, const ModelConfig& config);

/// Inverse of load_dataset (categorical indicators are written back as level
/// labels, numeric values with 17 significant digits).
void write_dataset(const std::filesystem::path& students, const std::filesystem::path& schools,
                   const ResponseDataset& data, const ModelConfig& config);

/// Simulation design from its JSON description.
SimulationDesign parse_design(const std::string& text, const std::string& source = "<design>");
SimulationDesign load_design(const std::filesystem::path& path);

/// Model config matching a design's spec and covariate columns.
ModelConfig config_for_design(const SimulationDesign& design);

}  // namespace mlirt
