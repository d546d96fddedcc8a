#include "mlirt/em.hpp"
#include "mlirt/selection.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace mlirt;

namespace {

PosteriorTables student_posteriors(std::initializer_list<std::vector<double>> rows) {
  PosteriorTables post;
  post.z_hu = Eigen::MatrixXd::Ones(1, 1);
  post.z_hiv.resize(1);
  post.z_joint.resize(1);
  for (const auto& r : rows) {
    Eigen::VectorXd z = Eigen::Map<const Eigen::VectorXd>(r.data(), static_cast<Eigen::Index>(r.size()));
    post.z_hiv[0].push_back(z);
    post.z_joint[0].push_back(z.transpose());
  }
  return post;
}

PosteriorTables school_posteriors(std::initializer_list<std::vector<double>> rows) {
  PosteriorTables post;
  post.z_hu.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index h = 0;
  for (const auto& r : rows) {
    for (std::size_t u = 0; u < r.size(); ++u) post.z_hu(h, static_cast<Eigen::Index>(u)) = r[u];
    ++h;
  }
  return post;
}

std::vector<std::optional<double>> seq(std::initializer_list<double> v) {
  return {v.begin(), v.end()};
}

}  // namespace

TEST_CASE("bic") {
  CHECK(bic(-100.0, 5, 100) == doctest::Approx(223.02585).epsilon(1e-8));
  CHECK(bic(0.0, 0, 17) == 0.0);
  CHECK(std::abs(bic(-530039.6, 169, 27592) - 1061807.27) < 0.01);
  CHECK_THROWS_AS(bic(-1.0, 1, 0), std::invalid_argument);
}

TEST_CASE("BIC sample size flag") {
  CHECK(BicSampleSize::parse("students").kind == BicSampleSize::Kind::Students);
  CHECK(BicSampleSize::parse("schools").kind == BicSampleSize::Kind::Schools);
  CHECK(BicSampleSize::parse("250").value == 250);
  CHECK_THROWS_AS(BicSampleSize::parse("0"), std::invalid_argument);
  CHECK_THROWS_AS(BicSampleSize::parse("many"), std::invalid_argument);
}

TEST_CASE("stopping rule") {
  // shape of a published sweep: decreasing through the fifth value, then up
  CHECK(choose_by_stopping_rule(seq({1068000, 1064000, 1062500, 1061900, 1061700, 1061750})) == 4u);
  CHECK(choose_by_stopping_rule(seq({10, 11, 12})) == 0u);
  CHECK(choose_by_stopping_rule(seq({10, 9, 8})) == 2u);
  CHECK(choose_by_stopping_rule(seq({10, 9, 11, 5})) == 1u);  // stops at the first increase
  CHECK(choose_by_stopping_rule(seq({42})) == 0u);
  std::vector<std::optional<double>> gap{10.0, std::nullopt, 8.0, 9.0};
  CHECK(choose_by_stopping_rule(gap) == 2u);
  CHECK_FALSE(choose_by_stopping_rule({std::nullopt}).has_value());
}

TEST_CASE("MAP assignments break ties toward the lowest label") {
  const auto s = assign_students(student_posteriors({{0.1, 0.7, 0.2}, {1.0 / 3, 1.0 / 3, 1.0 / 3}, {1, 0, 0}}));
  CHECK(s[0][0].label == 1);
  CHECK(s[0][1].label == 0);
  CHECK(s[0][2].label == 0);
  CHECK(s[0][2].posterior == 1.0);
  const auto t = assign_schools(school_posteriors({{0.6, 0.4}, {0.5, 0.5}, {0, 1}}));
  CHECK(t[0].label == 0);
  CHECK(t[1].label == 0);
  CHECK(t[2].label == 1);
  CHECK(t[2].posterior == 1.0);
}

TEST_CASE("average weights") {
  Eigen::VectorXd a(2), b(2);
  a << 0.2, 0.8;
  b << 0.6, 0.4;
  const Eigen::VectorXd m = average_weights({a, b});
  CHECK(m(0) == doctest::Approx(0.4));
  CHECK(m(1) == doctest::Approx(0.6));

  std::mt19937_64 rng(4);
  oracle::InstanceShape shape;
  shape.k_v = 3;
  const auto spec = oracle::make_spec(shape);
  const auto p = oracle::random_params(spec, rng);
  const auto data = oracle::random_data(shape, rng);
  const auto avg = average_class_weights(data, p, spec, e_step(data, p, spec));
  CHECK(std::abs(avg.classes.sum() - 1.0) < 1e-10);
  CHECK(std::abs(avg.types.sum() - 1.0) < 1e-10);

  shape.k_v = 1;
  const auto s1 = oracle::make_spec(shape);
  const auto p1 = oracle::random_params(s1, rng);
  CHECK(average_class_weights(data, p1, s1, e_step(data, p1, s1)).classes(0) == doctest::Approx(1.0));
}

TEST_CASE("standardize_abilities") {
  Eigen::MatrixXd xi(3, 2);
  xi << -1, 2, 0, 2, 1, 2;
  const Eigen::VectorXd w = Eigen::VectorXd::Constant(3, 1.0 / 3.0);
  const Eigen::MatrixXd z = standardize_abilities(xi, w);
  CHECK(z(0, 0) == doctest::Approx(-1.2247).epsilon(1e-4));
  CHECK(z(1, 0) == doctest::Approx(0.0));
  CHECK(z(2, 0) == doctest::Approx(1.2247).epsilon(1e-4));
  CHECK(z.col(1).isZero());
  const Eigen::MatrixXd again = standardize_abilities(z, w);
  CHECK((again - z).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("school support points") {
  std::mt19937_64 rng(12);
  oracle::InstanceShape shape;
  shape.groups = 3;
  shape.k_v = 3;
  shape.k_u = 2;
  shape.items = 4;
  shape.dims = 2;
  const auto spec = oracle::make_spec(shape);
  auto p = oracle::random_params(spec, rng);
  const auto data = oracle::random_data(shape, rng);
  const auto post = e_step(data, p, spec);
  const Eigen::VectorXd cw = Eigen::VectorXd::Constant(3, 1.0 / 3.0);

  SUBCASE("hand double average") {
    const auto sp = school_support_points(data, p, spec, post, cw);
    for (std::size_t u = 0; u < 2; ++u) {
      double num = 0.0, den = 0.0;
      for (std::size_t h = 0; h < data.groups.size(); ++h) {
        double school = 0.0;
        for (const auto& s : data.groups[h].students) {
          const auto pv = oracle::class_weights(p, s.x, u);
          for (std::size_t v = 0; v < 3; ++v)
            school += pv[v] * 0.5 * (p.xi(static_cast<Eigen::Index>(v), 0) + p.xi(static_cast<Eigen::Index>(v), 1));
        }
        school /= static_cast<double>(data.groups[h].students.size());
        const double z = post.z_hu(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(u));
        num += z * school;
        den += z;
      }
      REQUIRE(sp.raw[u].has_value());
      CHECK(*sp.raw[u] == doctest::Approx(num / den).epsilon(1e-12));
    }
  }
  SUBCASE("equal abilities") {
    p.xi.setConstant(0.7);
    const auto sp = school_support_points(data, p, spec, post, cw);
    for (std::size_t u = 0; u < 2; ++u) {
      CHECK(*sp.raw[u] == doctest::Approx(0.7));
      CHECK(*sp.standardized[u] == 0.0);
    }
  }
  SUBCASE("empty type") {
    PosteriorTables degenerate = post;
    degenerate.z_hu.col(0).setOnes();
    degenerate.z_hu.col(1).setZero();
    const auto sp = school_support_points(data, p, spec, degenerate, cw);
    CHECK(sp.raw[0].has_value());
    CHECK_FALSE(sp.raw[1].has_value());
  }
}

TEST_CASE("type probabilities by covariate profile") {
  ModelSpec spec;
  spec.items = ItemBank::unidimensional(1);
  spec.k_u = 2;
  spec.m_u = 1;
  auto p = ParameterSet::neutral(spec);
  Eigen::MatrixXd profiles(2, 1);
  profiles << 0.0, 1.0;
  CHECK(type_probabilities_by_profile(p, profiles)(1, 0) == doctest::Approx(0.5));
  p.zeta0_u << std::log(4.0);
  p.zeta1_u << 0.7;
  const Eigen::MatrixXd t = type_probabilities_by_profile(p, profiles);
  CHECK(t(0, 0) == doctest::Approx(0.2));
  CHECK(t(0, 1) == doctest::Approx(0.8));
  for (Eigen::Index k = 0; k < 2; ++k) CHECK(std::abs(t.row(k).sum() - 1.0) < 1e-12);
}

TEST_CASE("sweep on a small dataset") {
  std::mt19937_64 rng(6);
  oracle::InstanceShape shape;
  shape.groups = 12;
  shape.min_students = 3;
  shape.max_students = 5;
  shape.items = 3;
  shape.k_v = 2;
  shape.m_v = 0;
  shape.m_u = 0;
  const auto data = oracle::random_data(shape, rng);
  const auto spec = oracle::make_spec(shape);
  FitControls c;
  c.n_starts = 2;
  const auto one = sweep_school_types(data, spec, {3}, c, BicSampleSize{});
  CHECK(one.chosen_k_u == 3);
  CHECK(one.rows.size() == 1);
  const auto range = sweep_school_types(data, spec, {1, 2, 3}, c, BicSampleSize::parse("schools"));
  CHECK(range.bic_n == 12);
  for (const auto& row : range.rows) {
    ModelSpec s = spec;
    s.k_u = row.k_u;
    CHECK(row.n_par == count_free_parameters(s));
    CHECK(row.bic == doctest::Approx(bic(row.loglik, row.n_par, 12)));
  }
  CHECK_FALSE(range.warnings.empty());  // k_U = 1 < k_V
  CHECK_THROWS_AS(sweep_school_types(data, spec, {2, 1}, c, BicSampleSize{}), std::invalid_argument);
}
