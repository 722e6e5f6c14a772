#include "rbcv/stats.hpp"

#include "rbcv/error.hpp"
#include "rbcv/rng.hpp"

#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <sstream>

namespace rbcv {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

// Redraw attempts and components share the low 16 bits of the counter index.
constexpr int kSlotBits = 16;
constexpr std::uint64_t kMaxSlots = std::uint64_t{1} << kSlotBits;

void require_nonempty(std::span<const double> row, const char* op) {
  if (row.empty()) throw DomainError(std::string(op) + ": empty row");
}

void require_same_length(std::span<const double> a, std::span<const double> b, const char* op) {
  if (a.size() != b.size()) {
    throw DomainError(std::string(op) + ": length mismatch (" + std::to_string(a.size()) +
                      " vs " + std::to_string(b.size()) + ")");
  }
  require_nonempty(a, op);
}

}  // namespace

double Marginal::cdf(double x) const {
  if (kind == Kind::Uniform) {
    if (x <= a) return 0.0;
    if (x >= b) return 1.0;
    return (x - a) / (b - a);
  }
  return 0.5 * std::erfc(-(x - a) / b * kInvSqrt2);
}

double Marginal::quantile(double u) const {
  if (!(u > 0.0 && u < 1.0)) throw DomainError("quantile: u must lie in (0,1)");
  if (kind == Kind::Uniform) return a + (b - a) * u;
  return boost::math::quantile(boost::math::normal_distribution<double>(a, b), u);
}

double Marginal::cdf_integral(double x) const {
  if (kind == Kind::Uniform) {
    if (x <= a) return 0.0;
    if (x >= b) return 0.5 * (b - a) + (x - b);
    return 0.5 * (x - a) * (x - a) / (b - a);
  }
  // int_{-inf}^{x} Phi((t-m)/s) dt = s * (t Phi(t) + phi(t)) at t = (x-m)/s.
  const double t = (x - a) / b;
  const double big_phi = 0.5 * std::erfc(-t * kInvSqrt2);
  const double small_phi = kInvSqrt2Pi * std::exp(-0.5 * t * t);
  return b * (t * big_phi + small_phi);
}

double Marginal::mean() const { return kind == Kind::Uniform ? 0.5 * (a + b) : a; }

double Marginal::variance() const {
  return kind == Kind::Uniform ? (b - a) * (b - a) / 12.0 : b * b;
}

std::string Marginal::describe() const {
  std::ostringstream os;
  os.precision(17);
  if (kind == Kind::Uniform)
    os << "U(" << a << "," << b << ")";
  else
    os << "N(" << a << "," << b << ")";
  return os.str();
}

void DistributionSpec::validate() const {
  if (components.empty()) throw ConfigError("distribution: at least one component required");
  for (const auto& c : components) {
    if (c.kind == Marginal::Kind::Uniform && !(c.a < c.b))
      throw ConfigError("distribution: uniform requires a < b, got " + c.describe());
    if (c.kind == Marginal::Kind::Normal && !(c.b > 0.0))
      throw ConfigError("distribution: normal requires stddev > 0, got " + c.describe());
    if (!std::isfinite(c.a) || !std::isfinite(c.b))
      throw ConfigError("distribution: non-finite parameter in " + c.describe());
  }
}

std::string DistributionSpec::describe() const {
  std::string out;
  for (std::size_t i = 0; i < components.size(); ++i) {
    if (i) out += "x";
    out += components[i].describe();
  }
  return out;
}

std::string SampleBatch::tag() const {
  return "seed=" + std::to_string(seed) + ";stream=" + std::to_string(stream_id) +
         ";m=" + std::to_string(size()) + ";dist=" + dist.describe();
}

SampleBatch draw_batch(const DistributionSpec& dist, std::size_t m, std::uint64_t seed,
                       std::uint64_t stream_id, const RowPredicate& admissible) {
  dist.validate();
  if (m < 1) throw DomainError("draw_batch: m must be >= 1");
  const std::size_t d = dist.dim();
  const CounterStream stream(seed, stream_id);

  SampleBatch batch;
  batch.points.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(d));
  batch.seed = seed;
  batch.stream_id = stream_id;
  batch.dist = dist;

  const std::uint64_t max_attempts = kMaxSlots / d;
  for (std::size_t k = 0; k < m; ++k) {
    double* row = batch.points.data() + k * d;
    for (std::uint64_t attempt = 0;; ++attempt) {
      if (attempt >= max_attempts)
        throw NumericalError("draw_batch: admissibility predicate rejected every redraw");
      for (std::size_t c = 0; c < d; ++c) {
        const std::uint64_t index = (static_cast<std::uint64_t>(k) << kSlotBits) | (attempt * d + c);
        row[c] = dist.components[c].quantile(stream.open_unit(index));
      }
      if (!admissible || admissible(std::span<const double>(row, d))) break;
      ++batch.redraws;
    }
  }
  return batch;
}

double empirical_mean(std::span<const double> row) {
  require_nonempty(row, "empirical_mean");
  double sum = 0.0;
  for (double v : row) sum += v;
  return sum / static_cast<double>(row.size());
}

double empirical_cov(std::span<const double> a, std::span<const double> b) {
  require_same_length(a, b, "empirical_cov");
  const double ma = empirical_mean(a);
  const double mb = empirical_mean(b);
  double sum = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) sum += (a[k] - ma) * (b[k] - mb);
  return sum / static_cast<double>(a.size());
}

double empirical_cov_textbook(std::span<const double> a, std::span<const double> b) {
  require_same_length(a, b, "empirical_cov_textbook");
  double sum_ab = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) sum_ab += a[k] * b[k];
  return sum_ab / static_cast<double>(a.size()) - empirical_mean(a) * empirical_mean(b);
}

double empirical_var(std::span<const double> row) {
  const double v = empirical_cov(row, row);
  if (!std::isfinite(v)) throw DomainError("empirical_var: non-finite input");
  if (v >= 0.0) return v;
  double second_moment = 0.0;
  for (double x : row) second_moment += x * x;
  second_moment /= static_cast<double>(row.size());
  const double tol = 1e-12 * std::max(1.0, second_moment);
  if (v < -tol) throw DomainError("empirical_var: negative variance beyond tolerance");
  return 0.0;
}

RowMatrix center_rows(const RowMatrix& rows) {
  RowMatrix out(rows.rows(), rows.cols());
  const auto m = static_cast<std::size_t>(rows.cols());
  for (Eigen::Index p = 0; p < rows.rows(); ++p) {
    const std::span<const double> row(rows.data() + p * rows.cols(), m);
    const double mean = empirical_mean(row);
    double* dst = out.data() + p * rows.cols();
    for (std::size_t k = 0; k < m; ++k) dst[k] = row[k] - mean;
  }
  return out;
}

Eigen::MatrixXd centered_cross_cov(const RowMatrix& a_centered, const RowMatrix& b_centered) {
  if (a_centered.cols() != b_centered.cols())
    throw DomainError("centered_cross_cov: batch size mismatch");
  const auto m = a_centered.cols();
  Eigen::MatrixXd out(a_centered.rows(), b_centered.rows());
  for (Eigen::Index i = 0; i < a_centered.rows(); ++i) {
    const double* ai = a_centered.data() + i * m;
    for (Eigen::Index j = 0; j < b_centered.rows(); ++j) {
      const double* bj = b_centered.data() + j * m;
      double sum = 0.0;
      for (Eigen::Index k = 0; k < m; ++k) sum += ai[k] * bj[k];
      out(i, j) = sum / static_cast<double>(m);
    }
  }
  return out;
}

Eigen::MatrixXd gram_matrix(const RowMatrix& rows) {
  if (rows.rows() < 1) throw DomainError("gram_matrix: at least one row required");
  if (rows.cols() < 1) throw DomainError("gram_matrix: empty rows");
  const RowMatrix centered = center_rows(rows);
  const auto p = rows.rows();
  const auto m = rows.cols();
  Eigen::MatrixXd gram(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    const double* ri = centered.data() + i * m;
    for (Eigen::Index j = i; j < p; ++j) {
      const double* rj = centered.data() + j * m;
      double sum = 0.0;
      for (Eigen::Index k = 0; k < m; ++k) sum += ri[k] * rj[k];
      gram(i, j) = sum / static_cast<double>(m);
      gram(j, i) = gram(i, j);
    }
  }
  return gram;
}

Eigen::MatrixXd gram_matrix(const EvalMatrix& evals) { return gram_matrix(evals.values); }

}  // namespace rbcv
