#include "mlirt/weights.hpp"

#include <doctest.h>

#include <cmath>

using namespace mlirt;

namespace {

ModelSpec weights_spec(std::size_t k_v, std::size_t k_u, std::size_t m_v, std::size_t m_u) {
  ModelSpec spec;
  spec.items = ItemBank::unidimensional(2);
  spec.k_v = k_v;
  spec.k_u = k_u;
  spec.m_v = m_v;
  spec.m_u = m_u;
  return spec;
}

}  // namespace

TEST_CASE("student_class_weights") {
  SUBCASE("zero coefficients are uniform") {
    const auto spec = weights_spec(3, 2, 1, 0);
    const auto p = ParameterSet::neutral(spec);
    const Eigen::VectorXd w = student_class_weights(p, Eigen::VectorXd::Ones(1), 1);
    for (int v = 0; v < 3; ++v) CHECK(w(v) == doctest::Approx(1.0 / 3.0));
  }
  SUBCASE("intercept ln 2") {
    const auto spec = weights_spec(2, 1, 0, 0);
    auto p = ParameterSet::neutral(spec);
    p.zeta0_v(0, 0) = std::log(2.0);
    const Eigen::VectorXd w = student_class_weights(p, Eigen::VectorXd(0), 0);
    CHECK(w(0) == doctest::Approx(1.0 / 3.0));
    CHECK(w(1) == doctest::Approx(2.0 / 3.0));
  }
  SUBCASE("slope ln 3 at x = 1") {
    const auto spec = weights_spec(2, 1, 1, 0);
    auto p = ParameterSet::neutral(spec);
    p.zeta1_v(0, 0) = std::log(3.0);
    const Eigen::VectorXd w = student_class_weights(p, Eigen::VectorXd::Ones(1), 0);
    CHECK(w(0) == doctest::Approx(0.25));
    CHECK(w(1) == doctest::Approx(0.75));
  }
  SUBCASE("intercepts depend on the type, slopes do not") {
    const auto spec = weights_spec(2, 2, 1, 0);
    auto p = ParameterSet::neutral(spec);
    p.zeta0_v(1, 0) = 1.0;
    p.zeta1_v(0, 0) = 0.5;
    const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 2.0);
    CHECK(student_class_weights(p, x, 0)(1) == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
    CHECK(student_class_weights(p, x, 1)(1) == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))));
  }
  SUBCASE("errors") {
    const auto spec = weights_spec(2, 2, 1, 0);
    const auto p = ParameterSet::neutral(spec);
    CHECK_THROWS_AS(student_class_weights(p, Eigen::VectorXd::Ones(1), 2), std::out_of_range);
    CHECK_THROWS_AS(student_class_weights(p, Eigen::VectorXd::Ones(3), 0), std::invalid_argument);
  }
}

TEST_CASE("school_type_weights") {
  {
    const auto p = ParameterSet::neutral(weights_spec(2, 5, 0, 0));
    const Eigen::VectorXd w = school_type_weights(p, Eigen::VectorXd(0));
    for (int u = 0; u < 5; ++u) CHECK(w(u) == doctest::Approx(0.2));
  }
  {
    const auto p = ParameterSet::neutral(weights_spec(2, 2, 0, 0));
    const Eigen::VectorXd w = school_type_weights(p, Eigen::VectorXd(0));
    CHECK(w(0) == doctest::Approx(0.5));
  }
  {
    auto p = ParameterSet::neutral(weights_spec(2, 3, 0, 0));
    p.zeta0_u << std::log(2.0), std::log(3.0);
    const Eigen::VectorXd w = school_type_weights(p, Eigen::VectorXd(0));
    CHECK(w(0) == doctest::Approx(1.0 / 6.0));
    CHECK(w(1) == doctest::Approx(2.0 / 6.0));
    CHECK(w(2) == doctest::Approx(3.0 / 6.0));
  }
}

TEST_CASE("log weights stay finite for extreme logits") {
  Eigen::VectorXd c(2);
  c << 700.0, -700.0;
  const Eigen::VectorXd lw = log_softmax_with_reference(c);
  CHECK(lw.allFinite());
  CHECK(std::exp(lw(1)) == doctest::Approx(1.0));
  CHECK(lw(2) < -1000.0);
}
