#pragma once

// Monte-Carlo greedy selection of control-variate snapshots.
//
//   IMC   every statistic on the reference batch
//   HMC   selection on a fresh batch Z^n of size M_n, acceptance checked at
//         the selected parameter, M_n grown until accepted
//   SHMC  as HMC, acceptance checked over the whole trial set
//
// Basis functions g_i are stored as combinations of snapshot functions,
//   g_i = sum_{j<=i} C_ij f_{mu_j} + const,
// orthonormal for the empirical covariance on the reference batch.

#include "rbcv/families.hpp"
#include "rbcv/stats.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rbcv {

enum class Variant { IMC, HMC, SHMC };

std::string to_string(Variant v);
Variant parse_variant(const std::string& name);

/// Relative floor below which a residual variance counts as zero.
inline constexpr double kResidualFloor = 1e-12;

struct ReducedBasis {
  std::vector<double> snapshot_params;
  std::vector<std::size_t> snapshot_trial_index;
  Eigen::MatrixXd coeffs;       ///< n x n, lower triangular, positive diagonal
  std::vector<double> thetas;   ///< normalisers theta_i(mu_i)
  std::vector<double> ref_means;
  EvalMatrix ref_evals;         ///< snapshots on the reference batch
  RowMatrix ref_basis;          ///< centred g_i on the reference batch

  std::size_t size() const { return snapshot_params.size(); }

  /// Centred g_i values from (raw or centred) snapshot rows on any batch.
  RowMatrix basis_values(const RowMatrix& snapshot_rows) const;

  /// The nested basis made of the first k snapshots.
  ReducedBasis prefix(std::size_t k) const;
};

struct BestFit {
  double residual_var = 0.0;
  Eigen::VectorXd lambda;
};

/// argmin over lambda of Var_Z(target - sum lambda_i basis_i) via the normal
/// equations A lambda = b, A_ij = Cov(basis_i, basis_j), b_i = Cov(target, basis_i).
/// Throws DegenerateBasisError when cond(A) > 1e12.
BestFit best_fit_residual(std::span<const double> target, const RowMatrix& basis_rows);

/// Same minimisation when the basis rows are orthonormal on this batch:
/// lambda_i = Cov(target, basis_i).
BestFit best_fit_orthonormal(std::span<const double> target, const RowMatrix& basis_rows);

/// Residual variances of many targets against one basis on the same batch.
struct ResidualProfile {
  std::vector<double> residual_var;
  Eigen::MatrixXd lambda;  ///< targets x basis
};

ResidualProfile residual_profile(const RowMatrix& targets, const RowMatrix& basis_rows);

struct Selection {
  std::size_t index = 0;
  double mu = 0.0;
  double residual_var = 0.0;
  std::vector<double> profile;
  bool degenerate = false;  ///< every residual at or below the floor
};

/// First-index argmax of a residual profile; degenerate when max <= floor.
Selection argmax_profile(std::vector<double> profile, std::span<const double> params, double floor);

/// Evaluates the trial set on the batch and selects the parameter with the
/// largest best-fit residual variance against the basis.
Selection select_parameter(const TrialSet& trial, const ReducedBasis& basis,
                           const SampleBatch& batch, const FamilySpec& family);

/// Appends g_new = (f_new - sum lambda_i g_i) / theta_new, followed by one
/// re-orthogonalisation pass on the reference batch.
ReducedBasis orthonormalize_next(ReducedBasis basis, double mu_new, std::size_t trial_index,
                                 std::span<const double> f_new_ref, double theta_new,
                                 const Eigen::VectorXd& lambda_ref);

using PhiFunction = std::function<double(double)>;

/// Sample-growth rule M <- ceil(b M + 1), b = 1.1 at n = 1, otherwise
/// b = max(1.1, phi(theta_prev^2) / phi(theta_curr^2)).
std::size_t grow_samples(std::size_t m, double theta_prev_sq, double theta_curr_sq,
                         const PhiFunction& phi, std::size_t n);

struct Acceptance {
  bool accepted = false;
  double ratio = 0.0;  ///< R^n
};

/// R = |theta^2 - beta^2| / theta^2 at one parameter (HMC) or its sup over the
/// trial set (SHMC, parameters with theta^2 <= exclusion_floor skipped).
/// Accepted iff R < 1 - gamma^2.
Acceptance accept_iteration(std::span<const double> theta_sq, std::span<const double> beta_sq,
                            double gamma, Variant variant, double exclusion_floor = 0.0);

/// True (stop) once Var_ref(f_bar)/M_ref > Var_ref(f - f_bar)/M_prev.
bool termination_check(double var_ref_of_cv, std::size_t m_ref, double var_ref_of_residual,
                       std::size_t m_prev);

struct GreedyConfig {
  FamilySpec family;
  TrialSet trial;
  double gamma = 0.9;
  std::size_t m1 = 10;
  std::size_t m_ref = 100000;
  double epsilon = 1e-3;
  std::size_t max_iters = 100;
  std::size_t retry_cap = 200;
  std::uint64_t seed = 0;
  double alpha = 2.0;  ///< tail exponent in phi
  /// (S)HMC only: when false the statistical stopping rule is skipped and the
  /// run stops after exactly max_iters accepted iterations.
  bool statistical_stop = true;

  void validate() const;
};

struct Attempt {
  std::size_t m = 0;
  double ratio = 0.0;
  std::uint64_t stream_id = 0;
  double mu = 0.0;
  double theta_mu = 0.0;
  double beta_mu = 0.0;
  bool accepted = false;
  bool degenerate_basis = false;
};

struct IterationRecord {
  std::size_t n = 0;
  double mu = 0.0;
  std::size_t trial_index = 0;
  std::size_t m = 0;                  ///< accepted M_n (M_ref for IMC)
  std::uint64_t stream_id = 0;        ///< stream of the accepted batch Z^n
  double theta_mu = 0.0;              ///< theta_n(mu_n) on the reference batch
  double theta_sup = 0.0;             ///< sup over the trial set
  std::optional<double> beta_mu;      ///< beta_n(mu_n) on Z^n
  std::optional<double> beta_sup;
  std::optional<double> ratio;        ///< accepted R^n (HMC/SHMC)
  double var_ref_of_cv = 0.0;         ///< Var_ref(f_bar_{mu_n})
  std::vector<Attempt> retries;       ///< rejected attempts, in order
  std::vector<double> theta_profile;  ///< theta_n(mu) over the trial set
  std::vector<double> beta_profile;   ///< beta_n(mu) over the trial set (HMC/SHMC)
};

struct GreedyTrace {
  Variant variant = Variant::IMC;
  std::vector<IterationRecord> records;
  std::string terminated_reason;
  bool truncated = false;
  std::uint64_t seed = 0;
  std::uint64_t ref_stream = 0;
  std::size_t m_ref = 0;
  std::uint64_t trial_seed = 0;

  std::size_t total_retries() const;
};

struct GreedyResult {
  ReducedBasis basis;
  GreedyTrace trace;
};

inline constexpr std::uint64_t kRefStream = 0;

SampleBatch draw_reference_batch(const GreedyConfig& config);

GreedyResult run_imc(const GreedyConfig& config);
GreedyResult run_hmc(const GreedyConfig& config, Variant variant);
GreedyResult run_greedy(const GreedyConfig& config, Variant variant);

}  // namespace rbcv
