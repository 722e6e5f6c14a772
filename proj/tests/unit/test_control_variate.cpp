#include <doctest.h>

#include "rbcv/control_variate.hpp"
#include "rbcv/error.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

using namespace rbcv;

namespace {

double naive_var(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return s / static_cast<double>(v.size());
}

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

std::vector<double> ref_means_for(const FamilySpec& f, const std::vector<double>& params, const SampleBatch& ref) {
  std::vector<double> out;
  for (double mu : params) out.push_back(mean_of(eval_family(f, mu, ref)));
  return out;
}

OnlineContext tc1_context(const std::vector<double>& params, std::size_t m_ref, std::size_t m_small,
                          bool same_batch = false) {
  const FamilySpec f = make_tc1();
  SampleBatch ref = draw_family_batch(f, m_ref, 5, 0);
  SampleBatch small = same_batch ? ref : draw_family_batch(f, m_small, 5, 1);
  const auto means = ref_means_for(f, params, ref);
  return OnlineContext::build(f, params, means, std::move(ref), std::move(small));
}

}  // namespace

TEST_CASE("fit_lambda examples") {
  SUBCASE("snapshot parameter is represented exactly") {
    const std::vector<double> params{0.4, 1.3, 2.2};
    const OnlineContext ctx = tc1_context(params, 4000, 300);
    const auto f = eval_family(ctx.family, 1.3, ctx.small_batch);
    const Eigen::VectorXd lambda = fit_lambda(ctx, f);
    CHECK(residual_variance(ctx, f, lambda) <= 1e-8);
    CHECK(lambda[1] == doctest::Approx(1.0).epsilon(1e-8));
    std::vector<double> rebuilt(f.size(), 0.0);
    for (std::size_t i = 0; i < 3; ++i) {
      const auto row = ctx.small_evals.row(i);
      for (std::size_t k = 0; k < f.size(); ++k) rebuilt[k] += lambda[i] * row[k];
    }
    const double shift = f[0] - rebuilt[0];
    for (std::size_t k = 0; k < f.size(); ++k) CHECK(f[k] - rebuilt[k] == doctest::Approx(shift).epsilon(1e-8));
  }
  SUBCASE("one snapshot gives the covariance ratio") {
    const OnlineContext ctx = tc1_context({1.0}, 2000, 400);
    const auto f = eval_family(ctx.family, 1.7, ctx.small_batch);
    const auto g = ctx.small_evals.row(0);
    const double expect = empirical_cov(f, g) / empirical_var(g);
    CHECK(fit_lambda(ctx, 1.7)[0] == doctest::Approx(expect).epsilon(1e-12));
  }
  SUBCASE("empty basis") {
    const OnlineContext ctx = tc1_context({}, 1000, 100);
    CHECK(fit_lambda(ctx, 1.0).size() == 0);
    CHECK(estimate_expectation(ctx, 1.0, Eigen::VectorXd()) == doctest::Approx(mean_of(eval_family(ctx.family, 1.0, ctx.small_batch))));
  }
  SUBCASE("collinear snapshots use the minimum-norm solution") {
    const OnlineContext ctx = tc1_context({1.0, 1.0}, 1000, 200);
    const Eigen::VectorXd l = fit_lambda(ctx, 1.0);
    CHECK(l[0] == doctest::Approx(0.5).epsilon(1e-8));
    CHECK(l[1] == doctest::Approx(0.5).epsilon(1e-8));
  }
}

TEST_CASE("fit_lambda matches a brute-force grid") {
  const FamilySpec f = make_tc2();
  for (std::uint64_t inst = 0; inst < 6; ++inst) {
    const std::vector<double> params{0.1 + 0.1 * inst, 0.6 + 0.05 * inst};
    SampleBatch ref = draw_family_batch(f, 2000, 40 + inst, 0);
    SampleBatch small = draw_family_batch(f, 60, 40 + inst, 1);
    const auto means = ref_means_for(f, params, ref);
    const OnlineContext ctx = OnlineContext::build(f, params, means, ref, small);
    const double mu = 0.33 + 0.05 * inst;
    const auto t = eval_family(f, mu, small);
    const auto a = ctx.small_evals.row(0), b = ctx.small_evals.row(1);
    const Eigen::VectorXd l = fit_lambda(ctx, t);
    const double fitted = residual_variance(ctx, t, l);
    double best = naive_var(t), c1 = 0.0, c2 = 0.0, w = 20.0;
    for (int level = 0; level < 30; ++level) {
      double n1 = c1, n2 = c2;
      for (int i = 0; i < 200; ++i)
        for (int j = 0; j < 200; ++j) {
          const double l1 = c1 - w + 2.0 * w * i / 199.0, l2 = c2 - w + 2.0 * w * j / 199.0;
          std::vector<double> r(t.size());
          for (std::size_t k = 0; k < t.size(); ++k) r[k] = t[k] - l1 * a[k] - l2 * b[k];
          const double v = naive_var(r);
          if (v < best) {
            best = v;
            n1 = l1;
            n2 = l2;
          }
        }
      c1 = n1;
      c2 = n2;
      w *= 0.2;
    }
    CHECK(std::abs(fitted - best) <= 1e-6 * best);
  }
}

TEST_CASE("estimate_expectation examples") {
  const std::vector<double> params{0.5, 2.0};
  const OnlineContext ctx = tc1_context(params, 3000, 200);
  SUBCASE("zero lambda is the plain small-batch mean") {
    const auto f = eval_family(ctx.family, 1.1, ctx.small_batch);
    CHECK(estimate_expectation(ctx, 1.1, Eigen::VectorXd::Zero(2)) == doctest::Approx(mean_of(f)).epsilon(1e-15));
  }
  SUBCASE("unit lambda at a snapshot returns its reference mean") {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(2);
    e[1] = 1.0;
    CHECK(estimate_expectation(ctx, 2.0, e) == doctest::Approx(ctx.ref_means[1]).epsilon(1e-14));
  }
  SUBCASE("constant family") {
    OnlineContext c = ctx;
    c.small_evals.values.setConstant(3.0);
    c.ref_means = {3.0, 3.0};
    const std::vector<double> f(c.small_batch.size(), 3.0);
    for (double l1 : {-2.0, 0.0, 0.7})
      CHECK(estimate_expectation(c, f, Eigen::Vector2d(l1, 1.5)) == doctest::Approx(3.0).epsilon(1e-15));
  }
  CHECK_THROWS_AS(estimate_expectation(ctx, 1.0, Eigen::VectorXd::Zero(3)), DomainError);
}

TEST_CASE("relative_error and equivalent samples examples") {
  const std::vector<double> params{0.5, 1.5, 2.5};
  SUBCASE("snapshot with small batch equal to the reference batch") {
    const OnlineContext ctx = tc1_context(params, 3000, 0, true);
    CHECK(relative_error(ctx, 1.5) <= 1e-6);
    CHECK(std::isinf(equivalent_mc_samples(ctx, 1.5)));
  }
  SUBCASE("lambda zero on the reference batch gives e = 0") {
    const OnlineContext ctx = tc1_context(params, 3000, 0, true);
    const auto f = eval_family(ctx.family, 0.9, ctx.ref_batch);
    const double est = estimate_expectation(ctx, f, Eigen::VectorXd::Zero(3));
    CHECK(std::abs(est - mean_of(f)) / std::abs(mean_of(f)) == 0.0);
  }
  SUBCASE("empty basis on the reference batch gives M_MC = M") {
    const OnlineContext ctx = tc1_context({}, 3000, 0, true);
    CHECK(equivalent_mc_samples(ctx, 0.9) == doctest::Approx(3000.0).epsilon(1e-12));
  }
  SUBCASE("zero reference mean is undefined") {
    const OnlineContext ctx = tc1_context({}, 500, 0, true);
    OnlineContext c = ctx;
    // f_0 vanishes above x = 2.
    for (Eigen::Index k = 0; k < c.ref_batch.points.rows(); ++k) c.ref_batch.points(k, 0) = 4.5;
    const OnlineRow row = online_query(c, 0.0);
    CHECK_FALSE(row.rel_error.has_value());
    c.small_batch = c.ref_batch;
    CHECK_THROWS_AS(relative_error(c, 0.0), NumericalError);
  }
}

TEST_CASE("fitted lambda never increases the small-batch variance") {
  const std::vector<double> params{0.2, 0.9, 1.6, 2.4};
  const OnlineContext ctx = tc1_context(params, 2000, 150);
  for (double mu = 0.0; mu <= 4.0; mu += 0.25) {
    const OnlineRow row = online_query(ctx, mu);
    const auto f = eval_family(ctx.family, mu, ctx.small_batch);
    CHECK(row.residual_var <= naive_var(f) * (1.0 + 1e-12) + 1e-15);
    CHECK(row.m_mc > 0.0);
  }
}

TEST_CASE("estimator with fixed lambda is unbiased over small batches") {
  const FamilySpec f = make_tc1();
  const std::vector<double> params{0.6, 1.8};
  SampleBatch ref = draw_family_batch(f, 100000, 12, 0);
  const auto means = ref_means_for(f, params, ref);
  const double mu = 1.2;
  const double target = mean_of(eval_family(f, mu, ref));
  const Eigen::Vector2d lambda(0.4, 0.3);
  std::vector<double> estimates;
  for (std::uint64_t s = 1; s <= 200; ++s) {
    const OnlineContext ctx = OnlineContext::build(f, params, means, ref, draw_family_batch(f, 200, 12, s));
    estimates.push_back(estimate_expectation(ctx, mu, lambda));
  }
  const double m = mean_of(estimates);
  const double se = std::sqrt(naive_var(estimates) / static_cast<double>(estimates.size()));
  CHECK(std::abs(m - target) <= 3.0 * se + 1e-12);
}
