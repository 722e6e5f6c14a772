#pragma once

// Sample-count bounds for the MC greedy being weak-greedy with high
// probability, and empirical probes of the Wasserstein-1 concentration
//   P[T1(Z) >= kappa] <= C exp(-c M phi(kappa)).

#include "rbcv/families.hpp"
#include "rbcv/greedy.hpp"
#include "rbcv/stats.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace rbcv::theory {

/// Concentration rate function:
///   d = 1   kappa^2            (kappa <= 1)
///   d = 2   kappa / log(2 + 1/kappa)^2
///   d >= 3  kappa^d
/// and kappa^alpha above 1 in every dimension.
double phi(double kappa, std::size_t d, double alpha);

/// delta_n = 1 - (1 - delta)^(2^-n); the infinite product of (1 - delta_n) is 1 - delta.
double delta_schedule(double delta, std::size_t n);

struct TheoryParams {
  double alpha = 2.0;
  double beta = 1.0;
  double C = 1.0;  ///< illustrative until replaced by a probe fit
  double c = 1.0;  ///< illustrative until replaced by a probe fit
  bool fitted = false;
  double gamma = 0.9;
  double delta = 0.1;
  double K2 = 1.0;
  double Kinf = 1.0;
  double KL = 1.0;
  std::size_t d = 1;

  void validate() const;
};

/// kappa_{n-1}: the n = 1 branch uses (1 - gamma^2) sigma^2 / (8 Kinf KL), the
/// n >= 2 branch min(1/(2(n-1)), (1-gamma^2) sigma^2 / (n (9 K2^2 + 4))) / (6 Kinf KL).
double kappa_bound(std::size_t n, double gamma, double sigma_hat_sq, double K2, double Kinf_n,
                   double KL_n);

struct SampleBound {
  std::size_t count = 1;
  bool vacuous = false;
};

/// ceil(-ln(delta_n / C) / (c phi(kappa))); vacuous (count 1) when delta_n >= C.
SampleBound sample_lower_bound(double delta_n, double C, double c, double kappa, std::size_t d,
                               double alpha);

/// int |F_M(x) - F(x)| dx for sorted samples against a 1-D marginal,
/// evaluated in closed form between consecutive order statistics.
double wasserstein1_1d(std::span<const double> sorted_samples, const Marginal& law);

/// Generic variant for an arbitrary cdf supported on [lo, hi]: adaptive
/// Gauss-Kronrod quadrature of |F_M - F| between order statistics.
double wasserstein1_1d(std::span<const double> sorted_samples,
                       const std::function<double(double)>& cdf, double lo, double hi,
                       double tol = 1e-9);

struct ProbePoint {
  std::size_t m = 0;
  double kappa = 0.0;
  double frequency = 0.0;
  std::size_t trials = 0;
};

struct ConcentrationFit {
  double C = 0.0;
  double c = 0.0;
  double r_squared = 0.0;
  std::size_t points = 0;  ///< grid points with nonzero frequency
  bool valid = false;      ///< at least two usable points
};

/// Fraction of `trials` independent batches of size m with T1 >= kappa.
/// Trial t uses stream first_stream + t.
double concentration_frequency(const Marginal& law, std::size_t m, double kappa,
                               std::size_t trials, std::uint64_t seed,
                               std::uint64_t first_stream = 0);

struct ProbeResult {
  std::vector<ProbePoint> grid;
  ConcentrationFit fit;
};

/// Frequencies on an (M, kappa) grid and the least-squares fit of
/// -ln(frequency) = -ln C + c M phi(kappa) over points with frequency > 0.
ProbeResult concentration_probe(const Marginal& law, std::span<const std::size_t> ms,
                                std::span<const double> kappas, std::size_t trials,
                                std::uint64_t seed, double alpha = 2.0);

ConcentrationFit fit_concentration(std::span<const ProbePoint> grid, std::size_t d, double alpha);

/// Regularity constants of g_mu = f_mu - E f_mu, estimated on a dense grid.
struct FamilyConstants {
  double K2 = 0.0;
  double Kinf = 0.0;
  double KL = 0.0;
  std::string provenance;
};

FamilyConstants estimate_family_constants(const FamilySpec& family,
                                          std::span<const double> params,
                                          std::size_t grid_points = 4001);

/// Sup norm and Lipschitz constant of a basis function g_i on a dense grid
/// (1-D families only).
struct FunctionNorms {
  double sup = 0.0;
  double lipschitz = 0.0;
};

std::vector<FunctionNorms> basis_function_norms(const FamilySpec& family, const ReducedBasis& basis,
                                                std::size_t grid_points = 4001);

struct BoundRow {
  std::size_t n = 0;
  double sigma_hat_sq = 0.0;
  double kappa = 0.0;
  double phi_of_kappa = 0.0;
  double delta_n = 0.0;
  std::size_t m_lower_bound = 1;
  bool vacuous = false;
};

struct BoundReport {
  std::vector<BoundRow> rows;
  TheoryParams params;
};

/// Bound table for n = 1..sigma_hat_sq.size(). sigma_hat_sq[n-1] is the sup
/// residual variance before iteration n; basis_norms[i] gives |g_{i+1}|.
BoundReport bound_report(const TheoryParams& params, std::span<const double> sigma_hat_sq,
                         std::span<const FunctionNorms> basis_norms);

}  // namespace rbcv::theory
