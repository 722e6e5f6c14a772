#pragma once

// Sampling and empirical moments.
//
// All empirical statistics use the biased 1/M normalisation
//   E_Z(f) = (1/M) sum f(Z_k),  Cov_Z(f,g) = E_Z(fg) - E_Z(f) E_Z(g),
// evaluated with a centred two-pass formula.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace rbcv {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// One-dimensional marginal law.
struct Marginal {
  enum class Kind { Uniform, Normal };
  Kind kind = Kind::Uniform;
  double a = 0.0;  ///< lower bound (uniform) or mean (normal)
  double b = 1.0;  ///< upper bound (uniform) or standard deviation (normal)

  static Marginal uniform(double lo, double hi) { return {Kind::Uniform, lo, hi}; }
  static Marginal normal(double mean, double stddev) { return {Kind::Normal, mean, stddev}; }

  double cdf(double x) const;
  double quantile(double u) const;
  /// Antiderivative of the cdf, normalised so that it vanishes at -infinity.
  double cdf_integral(double x) const;
  double mean() const;
  double variance() const;
  std::string describe() const;
};

/// Product measure of independent marginals; d = components.size().
struct DistributionSpec {
  std::vector<Marginal> components;

  std::size_t dim() const { return components.size(); }
  /// Throws ConfigError when a component is ill-posed.
  void validate() const;
  std::string describe() const;
};

/// Optional per-row admissibility predicate used for rejection redraws.
using RowPredicate = std::function<bool(std::span<const double>)>;

struct SampleBatch {
  RowMatrix points;  ///< M x d
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
  DistributionSpec dist;
  std::uint64_t redraws = 0;  ///< rows redrawn because the predicate rejected them

  std::size_t size() const { return static_cast<std::size_t>(points.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(points.cols()); }
  std::string tag() const;
};

/// Values of P functions on the M points of one batch (row p = function p).
struct EvalMatrix {
  RowMatrix values;
  std::string batch_tag;

  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(values.cols()); }
  std::span<const double> row(std::size_t p) const {
    return {values.data() + p * cols(), cols()};
  }
};

/// Draws m i.i.d. rows. Row k, component c, redraw attempt a maps to a fixed
/// counter, so the result does not depend on evaluation order.
SampleBatch draw_batch(const DistributionSpec& dist, std::size_t m, std::uint64_t seed,
                       std::uint64_t stream_id, const RowPredicate& admissible = {});

double empirical_mean(std::span<const double> row);
double empirical_cov(std::span<const double> a, std::span<const double> b);
double empirical_var(std::span<const double> row);

/// Textbook single-pass E(fg) - E(f)E(g); kept for cross-checking only.
double empirical_cov_textbook(std::span<const double> a, std::span<const double> b);

/// P x P matrix of pairwise empirical covariances; exactly symmetric.
Eigen::MatrixXd gram_matrix(const EvalMatrix& evals);
Eigen::MatrixXd gram_matrix(const RowMatrix& rows);

/// Rows with their empirical means removed.
RowMatrix center_rows(const RowMatrix& rows);

/// Covariances between the rows of two matrices over the same batch
/// (result(i, j) = Cov(a_i, b_j)); inputs must already be centred.
Eigen::MatrixXd centered_cross_cov(const RowMatrix& a_centered, const RowMatrix& b_centered);

}  // namespace rbcv
