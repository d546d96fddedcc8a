#pragma once

// JSON conversions shared by the config, design, report and truth files.

#include "mlirt/dataset_io.hpp"
#include "mlirt/model.hpp"

#include <json.hpp>

#include <Eigen/Dense>

#include <string>

namespace mlirt::detail {

using json = nlohmann::ordered_json;

double round_sig12(double x);

json vector_to_json(const Eigen::VectorXd& v, bool round);
json matrix_to_json(const Eigen::MatrixXd& m, bool round);
Eigen::VectorXd vector_from_json(const json& j, Eigen::Index size, const std::string& what);
Eigen::MatrixXd matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols,
                                 const std::string& what);

json params_to_json(const ParameterSet& params, bool round);
ParameterSet params_from_json(const json& j, const ModelSpec& spec);

json config_to_json(const ModelConfig& config);
/// Throws std::invalid_argument or nlohmann exceptions; callers wrap them.
ModelConfig config_from_json(const json& j);

json parse_json_text(const std::string& text, const std::string& source);

}  // namespace mlirt::detail
