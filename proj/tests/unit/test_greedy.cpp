#include <doctest.h>

#include "rbcv/error.hpp"
#include "rbcv/greedy.hpp"
#include "rbcv/io.hpp"
#include "rbcv/rng.hpp"
#include "rbcv/theory.hpp"

#include <cmath>
#include <sstream>

using namespace rbcv;

namespace {

// Plain two-pass variance, independent of the library's statistics.
double naive_var(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return s / static_cast<double>(v.size());
}

double residual_var_at(const std::vector<double>& t, const std::vector<double>& a,
                       const std::vector<double>& b, double l1, double l2) {
  std::vector<double> r(t.size());
  for (std::size_t k = 0; k < t.size(); ++k) r[k] = t[k] - l1 * a[k] - l2 * b[k];
  return naive_var(r);
}

// 200 x 200 grid over a box, then repeated zoom around the best node.
double grid_minimum(const std::vector<double>& t, const std::vector<double>& a,
                    const std::vector<double>& b, double half_width) {
  double c1 = 0.0, c2 = 0.0, w = half_width, best = residual_var_at(t, a, b, 0, 0);
  for (int level = 0; level < 30; ++level) {
    double n1 = c1, n2 = c2;
    for (int i = 0; i < 200; ++i) {
      for (int j = 0; j < 200; ++j) {
        const double l1 = c1 - w + 2.0 * w * i / 199.0;
        const double l2 = c2 - w + 2.0 * w * j / 199.0;
        const double v = residual_var_at(t, a, b, l1, l2);
        if (v < best) {
          best = v;
          n1 = l1;
          n2 = l2;
        }
      }
    }
    c1 = n1;
    c2 = n2;
    w *= 0.2;
  }
  return best;
}

std::vector<double> noise(std::uint64_t stream, std::size_t m) {
  const CounterStream s(2024, stream);
  std::vector<double> v(m);
  for (std::size_t k = 0; k < m; ++k) v[k] = s.open_unit(k) - 0.5;
  return v;
}

RowMatrix rows_of(const std::vector<std::vector<double>>& rows) {
  RowMatrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t k = 0; k < rows[i].size(); ++k) out(i, k) = rows[i][k];
  return out;
}

GreedyConfig tc1_config(std::size_t trial, std::size_t m_ref, std::uint64_t seed = 1) {
  GreedyConfig c;
  c.family = make_tc1();
  c.trial = make_trial_set(c.family.parameter_domain, trial, 1);
  c.m_ref = m_ref;
  c.m1 = 10;
  c.gamma = 0.9;
  c.seed = seed;
  c.max_iters = 12;
  return c;
}

ReducedBasis basis_on(const RowMatrix& snapshots) {
  ReducedBasis basis;
  basis.coeffs.resize(0, 0);
  basis.ref_evals.values.resize(0, snapshots.cols());
  basis.ref_basis.resize(0, snapshots.cols());
  for (Eigen::Index i = 0; i < snapshots.rows(); ++i) {
    const std::span<const double> f(snapshots.data() + i * snapshots.cols(), static_cast<std::size_t>(snapshots.cols()));
    const BestFit fit = best_fit_orthonormal(f, basis.ref_basis);
    basis = orthonormalize_next(std::move(basis), static_cast<double>(i), static_cast<std::size_t>(i), f,
                                std::sqrt(fit.residual_var), fit.lambda);
  }
  return basis;
}

double max_offdiag_identity_error(const RowMatrix& g) {
  const Eigen::MatrixXd gram = gram_matrix(g);
  return (gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("variant names") {
  for (Variant v : {Variant::IMC, Variant::HMC, Variant::SHMC}) CHECK(parse_variant(to_string(v)) == v);
  CHECK_THROWS_AS(parse_variant("mc"), ConfigError);
}

TEST_CASE("best_fit_residual examples") {
  const auto t = noise(1, 300);
  SUBCASE("empty basis") {
    const BestFit fit = best_fit_residual(t, RowMatrix(0, 300));
    CHECK(fit.lambda.size() == 0);
    CHECK(fit.residual_var == doctest::Approx(naive_var(t)).epsilon(1e-13));
  }
  SUBCASE("target inside the basis") {
    const auto other = noise(2, 300);
    const BestFit fit = best_fit_residual(t, rows_of({other, t}));
    CHECK(fit.residual_var <= 1e-10 * naive_var(t));
    CHECK(fit.lambda[1] == doctest::Approx(1.0).epsilon(1e-10));
  }
  SUBCASE("collinear basis is degenerate") {
    std::vector<double> twice(t);
    for (double& v : twice) v = 2.0 * v + 1.0;
    CHECK_THROWS_AS(best_fit_residual(noise(3, 300), rows_of({t, twice})), DegenerateBasisError);
  }
  SUBCASE("batch mismatch") {
    CHECK_THROWS_AS(best_fit_residual(t, rows_of({noise(2, 200)})), DomainError);
  }
}

TEST_CASE("best_fit_residual matches a brute-force lambda grid") {
  for (std::uint64_t inst = 0; inst < 10; ++inst) {
    const std::size_t m = 40 + 7 * inst;
    const auto a = noise(100 + inst, m);
    const auto b = noise(200 + inst, m);
    const auto e = noise(300 + inst, m);
    const CounterStream s(5, inst);
    const double l1 = 4.0 * s.open_unit(0) - 2.0, l2 = 4.0 * s.open_unit(1) - 2.0;
    std::vector<double> t(m);
    for (std::size_t k = 0; k < m; ++k) t[k] = l1 * a[k] + l2 * b[k] + 0.3 * e[k] + 5.0;
    const BestFit fit = best_fit_residual(t, rows_of({a, b}));
    const double oracle = grid_minimum(t, a, b, 5.0);
    CHECK(std::abs(fit.residual_var - oracle) <= 1e-6 * oracle);
    CHECK(residual_var_at(t, a, b, fit.lambda[0], fit.lambda[1]) == doctest::Approx(fit.residual_var).epsilon(1e-9));
  }
}

TEST_CASE("orthonormal fit agrees with the normal equations on an orthonormal basis") {
  const RowMatrix snaps = rows_of({noise(1, 500), noise(2, 500), noise(3, 500)});
  const ReducedBasis basis = basis_on(snaps);
  const auto t = noise(4, 500);
  const BestFit a = best_fit_orthonormal(t, basis.ref_basis);
  const BestFit b = best_fit_residual(t, basis.ref_basis);
  CHECK(a.residual_var == doctest::Approx(b.residual_var).epsilon(1e-10));
  for (int i = 0; i < 3; ++i) CHECK(a.lambda[i] == doctest::Approx(b.lambda[i]).epsilon(1e-9));
}

TEST_CASE("orthonormalize_next examples") {
  const auto f1 = noise(7, 400);
  SUBCASE("first snapshot is normalised") {
    const ReducedBasis b = basis_on(rows_of({f1}));
    std::vector<double> g(b.ref_basis.data(), b.ref_basis.data() + 400);
    CHECK(naive_var(g) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(b.coeffs(0, 0) == doctest::Approx(1.0 / std::sqrt(naive_var(f1))).epsilon(1e-12));
  }
  SUBCASE("repeating a snapshot is degenerate") {
    const ReducedBasis b = basis_on(rows_of({f1}));
    const BestFit fit = best_fit_orthonormal(f1, b.ref_basis);
    CHECK_THROWS_AS(orthonormalize_next(b, 1.0, 1, f1, std::sqrt(fit.residual_var), fit.lambda),
                    DegenerateSnapshotError);
    CHECK_THROWS_AS(orthonormalize_next(b, 1.0, 1, f1, 0.0, fit.lambda), DegenerateSnapshotError);
  }
  SUBCASE("coefficients reproduce the stored basis") {
    const RowMatrix snaps = rows_of({f1, noise(8, 400), noise(9, 400), noise(10, 400)});
    const ReducedBasis b = basis_on(snaps);
    CHECK(max_offdiag_identity_error(b.ref_basis) <= 1e-12);
    CHECK((b.basis_values(snaps) - b.ref_basis).cwiseAbs().maxCoeff() <= 1e-10);
    for (Eigen::Index i = 0; i < 4; ++i) {
      CHECK(b.coeffs(i, i) > 0.0);
      for (Eigen::Index j = i + 1; j < 4; ++j) CHECK(b.coeffs(i, j) == 0.0);
    }
    const ReducedBasis p = b.prefix(2);
    CHECK(p.size() == 2);
    CHECK(p.coeffs.rows() == 2);
    CHECK_THROWS_AS(b.prefix(5), DomainError);
  }
}

TEST_CASE("select_parameter examples") {
  const FamilySpec tc1 = make_tc1();
  const SampleBatch batch = draw_family_batch(tc1, 2000, 3, 1);
  SUBCASE("empty basis picks the largest variance") {
    const TrialSet trial = make_trial_set(tc1.parameter_domain, 30, 4);
    ReducedBasis empty;
    const Selection sel = select_parameter(trial, empty, batch, tc1);
    std::size_t best = 0;
    double best_var = -1.0;
    for (std::size_t p = 0; p < trial.parameters.size(); ++p) {
      const double v = naive_var(eval_family(tc1, trial.parameters[p], batch));
      if (v > best_var) {
        best_var = v;
        best = p;
      }
    }
    CHECK(sel.index == best);
    CHECK(sel.mu == trial.parameters[best]);
    CHECK(sel.residual_var == doctest::Approx(best_var).epsilon(1e-10));
    CHECK(sel.profile.size() == 30);
  }
  SUBCASE("single trial parameter") {
    TrialSet one;
    one.parameters = {1.25};
    CHECK(select_parameter(one, ReducedBasis{}, batch, tc1).mu == 1.25);
  }
  SUBCASE("basis holding every trial snapshot is degenerate") {
    TrialSet trial;
    trial.parameters = {0.3, 1.1, 2.6};
    ReducedBasis basis = basis_on(eval_rows(tc1, trial.parameters, batch).values);
    basis.snapshot_trial_index = {0, 1, 2};
    const Selection sel = select_parameter(trial, basis, batch, tc1);
    CHECK(sel.degenerate);
  }
  SUBCASE("ties resolve to the first index") {
    const Selection sel = argmax_profile({1.0, 3.0, 3.0, 2.0}, std::vector<double>{0.1, 0.2, 0.3, 0.4}, 0.0);
    CHECK(sel.index == 1);
    CHECK(argmax_profile({0.0, 0.0}, std::vector<double>{0.1, 0.2}, 0.0).degenerate);
  }
}

TEST_CASE("grow_samples examples") {
  const PhiFunction phi = [](double k) { return theory::phi(k, 1, 2.0); };
  CHECK(grow_samples(10, 0.0, 0.0, phi, 1) == 12);
  CHECK(grow_samples(100, 0.3, 0.3, phi, 2) == 111);
  CHECK(grow_samples(100, 0.5, 0.25, phi, 2) == 401);
  for (std::size_t m = 1; m < 2000; m += 37) CHECK(grow_samples(m, 0.4, 0.5, phi, 3) > m);
  CHECK_THROWS_AS(grow_samples(100, 0.0, 0.25, phi, 2), DomainError);
  CHECK_THROWS_AS(grow_samples(0, 0.5, 0.25, phi, 2), DomainError);
}

TEST_CASE("accept_iteration examples") {
  const std::vector<double> one{1.0};
  CHECK(accept_iteration(one, one, 0.99, Variant::HMC).accepted);
  const auto rej = accept_iteration(one, std::vector<double>{0.75}, 0.9, Variant::HMC);
  CHECK_FALSE(rej.accepted);
  CHECK(rej.ratio == 0.25);
  const auto sh = accept_iteration(std::vector<double>{1, 1}, std::vector<double>{1, 0.9}, 0.9, Variant::SHMC);
  CHECK(sh.accepted);
  CHECK(sh.ratio == doctest::Approx(0.1).epsilon(1e-15));
  CHECK_THROWS_AS(accept_iteration(std::vector<double>{0.0}, one, 0.9, Variant::HMC), DegenerateRatioError);
  const auto excl = accept_iteration(std::vector<double>{1e-20, 1.0}, std::vector<double>{0.5, 1.0}, 0.9,
                                     Variant::SHMC, 1e-12);
  CHECK(excl.ratio == 0.0);
}

TEST_CASE("termination_check examples") {
  CHECK_FALSE(termination_check(0.0, 100000, 0.5, 10));
  CHECK(termination_check(1.0, 100000, 1e-6, 100));
  CHECK_FALSE(termination_check(1.0, 100000, 1.0, 100));
}

TEST_CASE("config validation") {
  GreedyConfig c = tc1_config(10, 1000);
  CHECK_NOTHROW(c.validate());
  c.gamma = 1.2;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = tc1_config(10, 1000);
  c.trial.parameters.push_back(3.5);
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("run_imc with one trial parameter stops after one snapshot") {
  GreedyConfig c = tc1_config(1, 2000);
  const GreedyResult r = run_imc(c);
  CHECK(r.basis.size() == 1);
  CHECK(r.trace.terminated_reason == "trial set exhausted");
  CHECK_FALSE(r.trace.truncated);
}

TEST_CASE("run_imc invariants") {
  GreedyConfig c = tc1_config(60, 8000);
  c.max_iters = 25;
  const GreedyResult r = run_imc(c);
  REQUIRE(r.basis.size() >= 10);
  CHECK(max_offdiag_identity_error(r.basis.ref_basis) <= 1e-8);
  for (std::size_t n = 1; n < r.trace.records.size(); ++n)
    CHECK(r.trace.records[n].theta_mu <= r.trace.records[n - 1].theta_mu);
  for (Eigen::Index i = 0; i < r.basis.coeffs.rows(); ++i) {
    CHECK(r.basis.coeffs(i, i) > 0.0);
    for (Eigen::Index j = i + 1; j < r.basis.coeffs.cols(); ++j) CHECK(r.basis.coeffs(i, j) == 0.0);
  }
  // Snapshots are represented exactly: their residual against the basis vanishes.
  for (std::size_t i = 0; i < r.basis.size(); ++i) {
    const auto f = r.basis.ref_evals.row(i);
    const BestFit fit = best_fit_orthonormal(f, r.basis.ref_basis);
    const double mean = empirical_mean(f);
    std::vector<double> res(f.size());
    for (std::size_t k = 0; k < f.size(); ++k) {
      double v = f[k] - mean;
      for (Eigen::Index j = 0; j < fit.lambda.size(); ++j) v -= fit.lambda[j] * r.basis.ref_basis(j, k);
      res[k] = v;
    }
    CHECK(std::sqrt(naive_var(res)) <= 1e-8);
  }
  // Nested spaces: the first k basis functions span the first k snapshots.
  const ReducedBasis p = r.basis.prefix(5);
  CHECK((p.basis_values(p.ref_evals.values) - r.basis.ref_basis.topRows(5)).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("run_hmc and run_shmc respect their acceptance rule") {
  for (Variant v : {Variant::HMC, Variant::SHMC}) {
    GreedyConfig c = tc1_config(40, 5000);
    c.max_iters = 10;
    c.statistical_stop = false;
    const GreedyResult r = run_greedy(c, v);
    CHECK(r.trace.records.size() == 10);
    CHECK(r.trace.terminated_reason == "iteration budget reached");
    CHECK_FALSE(r.trace.truncated);
    CHECK(max_offdiag_identity_error(r.basis.ref_basis) <= 1e-8);
    const double threshold = 1.0 - c.gamma * c.gamma;
    std::size_t prev_m = c.m1;
    std::uint64_t prev_stream = 0;
    for (const auto& rec : r.trace.records) {
      std::size_t m = prev_m;
      for (std::size_t i = 0; i < rec.retries.size(); ++i) {
        const auto& a = rec.retries[i];
        if (i == 0) CHECK(a.m == prev_m);
        else CHECK(a.m > m);
        CHECK(a.stream_id > prev_stream);
        prev_stream = a.stream_id;
        CHECK_FALSE(a.ratio < threshold);
        m = a.m;
      }
      if (rec.retries.empty()) CHECK(rec.m == prev_m);
      else CHECK(rec.m > m);
      CHECK(rec.stream_id > prev_stream);
      prev_stream = rec.stream_id;
      REQUIRE(rec.ratio.has_value());
      CHECK(*rec.ratio < threshold);
      if (v == Variant::HMC) {
        const double t2 = rec.theta_mu * rec.theta_mu, b2 = *rec.beta_mu * *rec.beta_mu;
        CHECK(std::abs(t2 - b2) / t2 == doctest::Approx(*rec.ratio).epsilon(1e-9));
      }
      CHECK(rec.m >= prev_m);
      prev_m = rec.m;
    }
  }
}

TEST_CASE("greedy runs are deterministic") {
  GreedyConfig c = tc1_config(30, 3000, 9);
  c.max_iters = 6;
  const auto a = run_hmc(c, Variant::HMC);
  const auto b = run_hmc(c, Variant::HMC);
  std::ostringstream sa, sb;
  write_trace_csv(sa, {a.trace});
  write_trace_csv(sb, {b.trace});
  CHECK(sa.str() == sb.str());
  CHECK(a.basis.coeffs == b.basis.coeffs);
}

TEST_CASE("limits flag the trace instead of failing") {
  GreedyConfig c = tc1_config(30, 3000);
  c.max_iters = 3;
  c.statistical_stop = true;
  c.epsilon = 1e-12;
  const auto imc = run_imc(c);
  CHECK(imc.trace.truncated);
  CHECK(imc.trace.records.size() == 3);

  c.max_iters = 20;
  c.retry_cap = 1;
  c.m1 = 2;
  c.gamma = 0.999;
  const auto hmc = run_hmc(c, Variant::SHMC);
  CHECK(hmc.trace.truncated);
  CHECK(hmc.trace.terminated_reason.find("retry cap") == 0);
}
