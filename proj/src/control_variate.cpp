#include "rbcv/control_variate.hpp"

#include "rbcv/error.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>

namespace rbcv {

OnlineContext OnlineContext::build(const FamilySpec& family, const ReducedBasis& basis,
                                   std::size_t n, SampleBatch ref_batch, SampleBatch small_batch) {
  if (n > basis.size()) throw DomainError("online context: n exceeds basis size");
  return build(family, std::span<const double>(basis.snapshot_params.data(), n),
               std::span<const double>(basis.ref_means.data(), n), std::move(ref_batch),
               std::move(small_batch));
}

OnlineContext OnlineContext::build(const FamilySpec& family, std::span<const double> snapshot_params,
                                   std::span<const double> ref_means, SampleBatch ref_batch,
                                   SampleBatch small_batch) {
  if (snapshot_params.size() != ref_means.size())
    throw DomainError("online context: one reference mean per snapshot expected");
  OnlineContext ctx;
  ctx.family = family;
  ctx.snapshot_params.assign(snapshot_params.begin(), snapshot_params.end());
  ctx.ref_means.assign(ref_means.begin(), ref_means.end());
  ctx.ref_batch = std::move(ref_batch);
  ctx.small_batch = std::move(small_batch);
  ctx.small_evals = eval_rows(family, ctx.snapshot_params, ctx.small_batch);
  return ctx;
}

Eigen::VectorXd fit_lambda(const OnlineContext& ctx, std::span<const double> f_small) {
  const std::size_t n = ctx.size();
  if (n == 0) return {};
  if (f_small.size() != ctx.small_evals.cols())
    throw DomainError("fit_lambda: target not evaluated on the small batch");
  const RowMatrix snaps = center_rows(ctx.small_evals.values);
  RowMatrix target(1, static_cast<Eigen::Index>(f_small.size()));
  std::copy(f_small.begin(), f_small.end(), target.data());
  const RowMatrix tc = center_rows(target);
  const Eigen::MatrixXd a = centered_cross_cov(snaps, snaps);
  const Eigen::VectorXd b = centered_cross_cov(snaps, tc).col(0);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
  if (eig.info() != Eigen::Success) throw NumericalError("fit_lambda: eigensolve failed");
  const Eigen::VectorXd& ev = eig.eigenvalues();
  const double cutoff = kSpectralCutoff * std::max(0.0, ev.cwiseAbs().maxCoeff());
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (ev[i] > cutoff) inv[i] = 1.0 / ev[i];
  const Eigen::MatrixXd& v = eig.eigenvectors();
  return v * inv.asDiagonal() * (v.transpose() * b);
}

Eigen::VectorXd fit_lambda(const OnlineContext& ctx, double mu) {
  const auto f = eval_family(ctx.family, mu, ctx.small_batch);
  return fit_lambda(ctx, f);
}

double estimate_expectation(const OnlineContext& ctx, std::span<const double> f_small,
                            const Eigen::VectorXd& lambda) {
  if (static_cast<std::size_t>(lambda.size()) != ctx.size())
    throw DomainError("estimate_expectation: lambda size does not match basis size");
  double out = empirical_mean(f_small);
  for (std::size_t i = 0; i < ctx.size(); ++i)
    out += lambda[static_cast<Eigen::Index>(i)] *
           (ctx.ref_means[i] - empirical_mean(ctx.small_evals.row(i)));
  return out;
}

double estimate_expectation(const OnlineContext& ctx, double mu, const Eigen::VectorXd& lambda) {
  const auto f = eval_family(ctx.family, mu, ctx.small_batch);
  return estimate_expectation(ctx, f, lambda);
}

double residual_variance(const OnlineContext& ctx, std::span<const double> f_small,
                         const Eigen::VectorXd& lambda) {
  if (static_cast<std::size_t>(lambda.size()) != ctx.size())
    throw DomainError("residual_variance: lambda size does not match basis size");
  std::vector<double> r(f_small.begin(), f_small.end());
  for (std::size_t i = 0; i < ctx.size(); ++i) {
    const auto row = ctx.small_evals.row(i);
    const double l = lambda[static_cast<Eigen::Index>(i)];
    for (std::size_t k = 0; k < r.size(); ++k) r[k] -= l * row[k];
  }
  return empirical_var(r);
}

OnlineRow online_query(const OnlineContext& ctx, double mu) {
  const auto f_ref = eval_family(ctx.family, mu, ctx.ref_batch);
  return online_query(ctx, mu, f_ref);
}

OnlineRow online_query(const OnlineContext& ctx, double mu, std::span<const double> f_ref) {
  if (f_ref.size() != ctx.ref_batch.size())
    throw DomainError("online_query: f_ref not evaluated on the reference batch");
  OnlineRow row;
  row.mu = mu;
  const auto f_small = eval_family(ctx.family, mu, ctx.small_batch);
  row.lambda = fit_lambda(ctx, f_small);
  row.estimate = estimate_expectation(ctx, f_small, row.lambda);
  row.ref_mean = empirical_mean(f_ref);
  row.ref_var = empirical_var(f_ref);
  if (std::abs(row.ref_mean) > 1e-14)
    row.rel_error = std::abs(row.ref_mean - row.estimate) / std::abs(row.ref_mean);
  row.residual_var = residual_variance(ctx, f_small, row.lambda);
  const double floor = kResidualFloor * std::max(1.0, row.ref_var);
  row.m_mc = row.residual_var > floor
                 ? row.ref_var * static_cast<double>(ctx.small_batch.size()) / row.residual_var
                 : std::numeric_limits<double>::infinity();
  return row;
}

double relative_error(const OnlineContext& ctx, double mu) {
  const OnlineRow row = online_query(ctx, mu);
  if (!row.rel_error)
    throw NumericalError("relative_error: reference mean at mu=" + std::to_string(mu) +
                         " is zero; e_n is undefined");
  return *row.rel_error;
}

double equivalent_mc_samples(const OnlineContext& ctx, double mu) {
  return online_query(ctx, mu).m_mc;
}

}  // namespace rbcv
