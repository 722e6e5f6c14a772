#include <doctest.h>

#include "rbcv/error.hpp"
#include "rbcv/families.hpp"

#include <cmath>
#include <vector>

using namespace rbcv;

namespace {

SampleBatch single_point(double x) {
  SampleBatch b;
  b.points.resize(1, 1);
  b.points(0, 0) = x;
  b.dist.components = {Marginal::uniform(0, 5)};
  return b;
}

}  // namespace

TEST_CASE("eval_family examples") {
  const FamilySpec tc1 = make_tc1();
  const FamilySpec tc2 = make_tc2();
  CHECK(eval_family(tc1, 0.0, single_point(1.0))[0] == 1.0);
  CHECK(eval_family(tc1, 3.0, single_point(0.2))[0] == 0.0);
  CHECK(eval_family(tc2, 0.5, single_point(0.5))[0] == doctest::Approx(std::sqrt(0.6)).epsilon(1e-15));
}

TEST_CASE("eval_family errors") {
  const FamilySpec tc1 = make_tc1();
  SampleBatch two_d;
  two_d.points = RowMatrix::Zero(3, 2);
  CHECK_THROWS_AS(eval_family(tc1, 1.0, two_d), ConfigError);
  CHECK_THROWS_AS(eval_family(tc1, 4.5, single_point(1.0)), DomainError);
  CHECK_NOTHROW(eval_family(tc1, 4.0, single_point(1.0)));
  CHECK_THROWS_AS(make_family("tc7"), ConfigError);
}

TEST_CASE("testcase1_f examples") {
  CHECK(testcase1_f(0.25) == 0.5);
  CHECK(testcase1_f(1.75) == 0.5);
  CHECK(testcase1_f(5.0) == 0.0);
  CHECK(testcase1_f(-0.1) == 0.0);
  CHECK(testcase1_f(0.5) == 1.0);
  CHECK(testcase1_f(1.5) == 1.0);
}

TEST_CASE("testcase2_f examples") {
  CHECK(testcase2_f(1.0, 0.4) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));
  CHECK(testcase2_f(0.0, 0.0) == doctest::Approx(std::sqrt(0.1)).epsilon(1e-15));
  CHECK(testcase2_f(0.25, 1.0) ==
        doctest::Approx(0.5 / std::sqrt(0.35) * 0.75 + std::sqrt(0.35)).epsilon(1e-15));
  CHECK_THROWS_AS(testcase2_f(1.5, 0.5), DomainError);
  CHECK_THROWS_AS(testcase2_f(0.5, -0.1), DomainError);
}

TEST_CASE("translate_hat is a translation") {
  const FamilySpec tc1 = make_tc1();
  const auto batch = draw_family_batch(tc1, 500, 4, 0);
  for (double mu : {0.0, 0.7, 1.9, 3.0}) {
    const auto v = eval_family(tc1, mu, batch);
    for (std::size_t k = 0; k < batch.size(); ++k) CHECK(v[k] == testcase1_f(batch.points(k, 0) - mu));
  }
}

TEST_CASE("sqrt_kink is C1 across the kink") {
  for (double mu : {0.1, 0.35, 0.6, 0.9}) {
    const double slope = 0.5 / std::sqrt(mu + 0.1);
    double prev_err = 1.0;
    for (double h : {1e-2, 1e-3, 1e-4}) {
      CHECK(std::abs(testcase2_f(mu, mu + h) - testcase2_f(mu, mu - h)) <= 2.0 * slope * h * 1.01);
      const double right = (testcase2_f(mu, mu + h) - testcase2_f(mu, mu)) / h;
      const double left = (testcase2_f(mu, mu) - testcase2_f(mu, mu - h)) / h;
      const double err = std::abs(right - left);
      CHECK(err <= 10.0 * h);
      CHECK(err < prev_err);
      prev_err = err;
    }
  }
}

TEST_CASE("families are bounded on dense grids") {
  for (int i = 0; i <= 400; ++i) {
    const double mu = 3.0 * i / 400.0;
    for (int j = 0; j <= 400; ++j) {
      const double v = testcase1_f(5.0 * j / 400.0 - mu);
      CHECK((v >= 0.0 && v <= 1.0));
    }
  }
  const double hi = std::sqrt(1.1) + 0.5 / std::sqrt(0.1);
  for (int i = 0; i <= 400; ++i) {
    const double mu = i / 400.0;
    for (int j = 0; j <= 400; ++j) {
      const double v = testcase2_f(mu, j / 400.0);
      CHECK((v >= std::sqrt(0.1) - 1e-15 && v <= hi));
    }
  }
}

TEST_CASE("trial sets") {
  const TrialSet a = make_trial_set({0.0, 3.0}, 100, 1);
  const TrialSet b = make_trial_set({0.0, 3.0}, 100, 1);
  const TrialSet c = make_trial_set({0.0, 3.0}, 100, 2);
  CHECK(a.parameters == b.parameters);
  CHECK(a.parameters != c.parameters);
  CHECK(std::is_sorted(a.parameters.begin(), a.parameters.end()));
  for (double mu : a.parameters) CHECK((mu > 0.0 && mu < 3.0));
  CHECK_THROWS_AS(make_trial_set({0.0, 3.0}, 0, 1), ConfigError);
}

TEST_CASE("family specs validate") {
  CHECK_NOTHROW(make_tc1().validate());
  CHECK_NOTHROW(make_tc2().validate());
  FamilySpec bad = make_tc1();
  bad.parameter_domain = {2.0, 1.0};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = make_tc1();
  bad.input_dim = 2;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("heat2d evaluations and admissibility") {
  const FamilySpec h = make_heat2d(4);
  CHECK(h.input_dim == 2);
  const auto batch = draw_family_batch(h, 64, 3, 0);
  const auto pred = h.admissibility();
  for (std::size_t k = 0; k < batch.size(); ++k) {
    CHECK(pred(std::span<const double>(batch.points.data() + 2 * k, 2)));
  }
  const std::vector<double> far{1.0, -7.0};
  CHECK_FALSE(pred(far));
  const auto v = eval_family(h, 5.0, batch);
  for (double x : v) {
    CHECK(std::isfinite(x));
    CHECK(x > 0.0);
  }

  EvaluationCache cache(h);
  const auto& r1 = cache.row(5.0, batch);
  const auto& r2 = cache.row(5.0, batch);
  CHECK(&r1 == &r2);
  CHECK(r1 == v);
}
