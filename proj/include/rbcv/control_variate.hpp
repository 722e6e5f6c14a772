#pragma once

// Online phase: for a new mu, fit lambda on a small batch and combine
//   sum lambda_i E_ref(f_i) + E_small(f_mu) - sum lambda_i E_small(f_i).

#include "rbcv/families.hpp"
#include "rbcv/greedy.hpp"
#include "rbcv/stats.hpp"

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace rbcv {

struct OnlineContext {
  FamilySpec family;
  std::vector<double> snapshot_params;
  std::vector<double> ref_means;  ///< E_ref(f_{mu_i})
  SampleBatch ref_batch;          ///< kept for the reference quantities of e_n and M_MC
  SampleBatch small_batch;
  EvalMatrix small_evals;         ///< snapshots on small_batch

  std::size_t size() const { return snapshot_params.size(); }

  /// Context using the first n snapshots of a basis; evaluates the snapshots
  /// on the small batch.
  static OnlineContext build(const FamilySpec& family, const ReducedBasis& basis, std::size_t n,
                             SampleBatch ref_batch, SampleBatch small_batch);
  static OnlineContext build(const FamilySpec& family, std::span<const double> snapshot_params,
                             std::span<const double> ref_means, SampleBatch ref_batch,
                             SampleBatch small_batch);
};

/// Cutoff relative to the largest eigenvalue below which directions of A are dropped.
inline constexpr double kSpectralCutoff = 1e-10;

/// Minimum-norm solution of A lambda = b in the snapshot representation on the small batch.
Eigen::VectorXd fit_lambda(const OnlineContext& ctx, std::span<const double> f_small);
Eigen::VectorXd fit_lambda(const OnlineContext& ctx, double mu);

double estimate_expectation(const OnlineContext& ctx, std::span<const double> f_small,
                            const Eigen::VectorXd& lambda);
double estimate_expectation(const OnlineContext& ctx, double mu, const Eigen::VectorXd& lambda);

/// Var_small(f_mu - sum lambda_i f_i).
double residual_variance(const OnlineContext& ctx, std::span<const double> f_small,
                         const Eigen::VectorXd& lambda);

struct OnlineRow {
  double mu = 0.0;
  double estimate = 0.0;
  double ref_mean = 0.0;
  std::optional<double> rel_error;  ///< empty when |E_ref(f_mu)| <= 1e-14
  double m_mc = 0.0;                ///< +inf when the residual variance is 0
  double residual_var = 0.0;
  double ref_var = 0.0;
  Eigen::VectorXd lambda;
};

/// Estimator, e_n(mu) and M_MC(mu) at one parameter.
OnlineRow online_query(const OnlineContext& ctx, double mu);
/// Same with f_mu already evaluated on the reference batch.
OnlineRow online_query(const OnlineContext& ctx, double mu, std::span<const double> f_ref);

double relative_error(const OnlineContext& ctx, double mu);
double equivalent_mc_samples(const OnlineContext& ctx, double mu);

}  // namespace rbcv
