#pragma once

#include "mlirt/model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace mlirt {

enum class Response : std::int8_t { Wrong = 0, Right = 1, Missing = -1 };

struct Student {
  std::string id;
  Eigen::VectorXd x;               // student covariates
  std::vector<Response> responses;  // length r

  bool operator==(const Student& o) const {
    return id == o.id && x == o.x && responses == o.responses;
  }
};

struct Group {
  std::string id;
  Eigen::VectorXd w;  // school covariates
  std::vector<Student> students;

  bool operator==(const Group& o) const {
    return id == o.id && w == o.w && students == o.students;
  }
};

/// Binary responses of students nested in schools.
struct ResponseDataset {
  std::vector<Group> groups;

  std::size_t n_groups() const { return groups.size(); }
  std::size_t n_students() const;

  bool operator==(const ResponseDataset&) const = default;
};

/// Throws std::invalid_argument when the dataset does not fit spec: no groups,
/// an empty group, a response vector of the wrong length or covariates of the
/// wrong arity or non-finite.
void check_dataset(const ResponseDataset& data, const ModelSpec& spec);

}  // namespace mlirt
