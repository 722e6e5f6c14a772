#include "rbcv/theory.hpp"

#include "rbcv/error.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace rbcv::theory {

double phi(double kappa, std::size_t d, double alpha) {
  if (!(kappa > 0.0)) throw DomainError("phi: kappa must be > 0");
  if (!(alpha > 1.0)) throw DomainError("phi: alpha must be > 1");
  if (d < 1) throw DomainError("phi: dimension must be >= 1");
  if (kappa > 1.0) return std::pow(kappa, alpha);
  if (d == 1) return kappa * kappa;
  if (d == 2) {
    const double l = std::log(2.0 + 1.0 / kappa);
    return kappa / (l * l);
  }
  return std::pow(kappa, static_cast<double>(d));
}

double delta_schedule(double delta, std::size_t n) {
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError("delta_schedule: delta must lie in (0,1)");
  if (n < 1) throw DomainError("delta_schedule: n must be >= 1");
  // 1 - (1-delta)^(2^-n) = -expm1(2^-n log1p(-delta)), stable for large n.
  return -std::expm1(std::ldexp(std::log1p(-delta), -static_cast<int>(std::min<std::size_t>(n, 1074))));
}

void TheoryParams::validate() const {
  if (!(alpha > 1.0)) throw ConfigError("alpha must be > 1");
  if (!(beta > 0.0)) throw ConfigError("beta must be > 0");
  if (!(C > 0.0)) throw ConfigError("C must be > 0");
  if (!(c > 0.0)) throw ConfigError("c must be > 0");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in (0,1)");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0,1)");
  if (!(K2 > 0.0 && Kinf > 0.0 && KL > 0.0)) throw ConfigError("K2, Kinf and KL must be > 0");
  if (d < 1) throw ConfigError("d must be >= 1");
}

double kappa_bound(std::size_t n, double gamma, double sigma_hat_sq, double K2, double Kinf_n,
                   double KL_n) {
  if (n < 1) throw DomainError("kappa_bound: n must be >= 1");
  if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("kappa_bound: gamma must lie in (0,1)");
  if (!(sigma_hat_sq > 0.0) || !(K2 > 0.0) || !(Kinf_n > 0.0) || !(KL_n > 0.0))
    throw DomainError("kappa_bound: sigma^2 and the K constants must be > 0");
  const double g = 1.0 - gamma * gamma;
  if (n == 1) return g * sigma_hat_sq / (8.0 * Kinf_n * KL_n);
  const double nd = static_cast<double>(n);
  const double inner = std::min(1.0 / (2.0 * (nd - 1.0)), g * sigma_hat_sq / (nd * (9.0 * K2 * K2 + 4.0)));
  return inner / (6.0 * Kinf_n * KL_n);
}

SampleBound sample_lower_bound(double delta_n, double C, double c, double kappa, std::size_t d,
                               double alpha) {
  if (!(delta_n > 0.0)) throw DomainError("sample_lower_bound: delta_n must be > 0");
  if (!(C > 0.0) || !(c > 0.0)) throw DomainError("sample_lower_bound: C and c must be > 0");
  if (delta_n >= C) return {1, true};
  const double value = -std::log(delta_n / C) / (c * phi(kappa, d, alpha));
  if (!std::isfinite(value) || value > 1e18)
    return {std::numeric_limits<std::size_t>::max(), false};
  // Guard against 1000.0000000001 style rounding of exact quotients.
  const double nearest = std::round(value);
  const double count = std::abs(value - nearest) <= 1e-9 * std::max(1.0, nearest) ? nearest
                                                                                    : std::ceil(value);
  return {std::max<std::size_t>(1, static_cast<std::size_t>(count)), false};
}

namespace {

void require_sorted(std::span<const double> s) {
  if (s.empty()) throw DomainError("wasserstein1_1d: empty sample");
  for (std::size_t i = 1; i < s.size(); ++i)
    if (!(s[i - 1] <= s[i])) throw DomainError("wasserstein1_1d: samples must be sorted ascending");
}

/// int_l^r |level - F(x)| dx for a monotone F with antiderivative G and quantile Q.
double abs_gap(const Marginal& law, double level, double l, double r) {
  if (!(r > l)) return 0.0;
  const auto signed_int = [&](double lo, double hi) {
    return law.cdf_integral(hi) - law.cdf_integral(lo) - level * (hi - lo);
  };
  double cross = std::numeric_limits<double>::quiet_NaN();
  if (level > 0.0 && level < 1.0) cross = law.quantile(level);
  if (cross > l && cross < r) return std::abs(signed_int(l, cross)) + std::abs(signed_int(cross, r));
  return std::abs(signed_int(l, r));
}

}  // namespace

double wasserstein1_1d(std::span<const double> sorted, const Marginal& law) {
  require_sorted(sorted);
  const auto m = static_cast<double>(sorted.size());
  // Below the first sample F_M = 0, above the last F_M = 1.
  double total = law.cdf_integral(sorted.front());
  total += law.cdf_integral(sorted.back()) - sorted.back() + law.mean();
  for (std::size_t k = 1; k < sorted.size(); ++k)
    total += abs_gap(law, static_cast<double>(k) / m, sorted[k - 1], sorted[k]);
  return std::max(0.0, total);
}

double wasserstein1_1d(std::span<const double> sorted, const std::function<double(double)>& cdf,
                       double lo, double hi, double tol) {
  require_sorted(sorted);
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
    throw DomainError("wasserstein1_1d: support must be a finite nonempty interval");
  if (sorted.front() < lo || sorted.back() > hi)
    throw DomainError("wasserstein1_1d: samples outside the support");
  using Quad = boost::math::quadrature::gauss_kronrod<double, 15>;
  const auto m = static_cast<double>(sorted.size());
  double total = 0.0;
  double left = lo;
  for (std::size_t k = 0; k <= sorted.size(); ++k) {
    const double right = k < sorted.size() ? sorted[k] : hi;
    const double level = static_cast<double>(k) / m;
    if (right > left)
      total += Quad::integrate([&](double x) { return std::abs(level - cdf(x)); }, left, right, 15,
                               tol / (right - left + 1.0));
    left = std::max(left, right);
  }
  return total;
}

double concentration_frequency(const Marginal& law, std::size_t m, double kappa, std::size_t trials,
                               std::uint64_t seed, std::uint64_t first_stream) {
  if (m < 1 || trials < 1) throw DomainError("concentration_frequency: m and trials must be >= 1");
  DistributionSpec dist;
  dist.components = {law};
  std::vector<char> hit(trials, 0);
  for (std::size_t t = 0; t < trials; ++t) {
    const SampleBatch batch = draw_batch(dist, m, seed, first_stream + t);
    std::vector<double> s(batch.points.data(), batch.points.data() + m);
    std::sort(s.begin(), s.end());
    hit[t] = wasserstein1_1d(s, law) >= kappa ? 1 : 0;
  }
  std::size_t count = 0;
  for (char h : hit) count += static_cast<std::size_t>(h);
  return static_cast<double>(count) / static_cast<double>(trials);
}

ConcentrationFit fit_concentration(std::span<const ProbePoint> grid, std::size_t d, double alpha) {
  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto& p : grid) {
    if (!(p.frequency > 0.0)) continue;
    xs.push_back(static_cast<double>(p.m) * phi(p.kappa, d, alpha));
    ys.push_back(-std::log(p.frequency));
  }
  ConcentrationFit fit;
  fit.points = xs.size();
  if (xs.size() < 2) return fit;
  Eigen::MatrixXd a(static_cast<Eigen::Index>(xs.size()), 2);
  Eigen::VectorXd y(static_cast<Eigen::Index>(ys.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    a(static_cast<Eigen::Index>(i), 0) = 1.0;
    a(static_cast<Eigen::Index>(i), 1) = xs[i];
    y[static_cast<Eigen::Index>(i)] = ys[i];
  }
  if (a.col(1).maxCoeff() == a.col(1).minCoeff()) return fit;
  const Eigen::Vector2d coef = a.colPivHouseholderQr().solve(y);
  fit.C = std::exp(-coef[0]);
  fit.c = coef[1];
  const double mean_y = y.mean();
  const double ss_tot = (y.array() - mean_y).square().sum();
  const double ss_res = (y - a * coef).squaredNorm();
  fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  fit.valid = true;
  return fit;
}

ProbeResult concentration_probe(const Marginal& law, std::span<const std::size_t> ms,
                                std::span<const double> kappas, std::size_t trials,
                                std::uint64_t seed, double alpha) {
  ProbeResult out;
  std::uint64_t stream = 0;
  for (std::size_t m : ms) {
    for (double kappa : kappas) {
      ProbePoint p;
      p.m = m;
      p.kappa = kappa;
      p.trials = trials;
      p.frequency = concentration_frequency(law, m, kappa, trials, seed, stream);
      stream += trials;
      out.grid.push_back(p);
    }
  }
  out.fit = fit_concentration(out.grid, 1, alpha);
  return out;
}

namespace {

struct Grid {
  std::vector<double> x;
  double h = 0.0;
};

Grid support_grid(const FamilySpec& family, std::size_t points) {
  if (family.input_dim != 1)
    throw DomainError("family " + family.name() + ": grid estimates need a 1-D input law");
  const Marginal& law = family.distribution.components[0];
  if (law.kind != Marginal::Kind::Uniform)
    throw DomainError("grid estimates need a bounded (uniform) input law");
  if (points < 3) throw DomainError("grid estimates need at least 3 points");
  Grid g;
  g.x.resize(points);
  g.h = (law.b - law.a) / static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) g.x[i] = law.a + g.h * static_cast<double>(i);
  g.x.back() = law.b;
  return g;
}

/// Trapezoid mean of values on a uniform grid.
double grid_mean(const std::vector<double>& v) {
  double s = 0.5 * (v.front() + v.back());
  for (std::size_t i = 1; i + 1 < v.size(); ++i) s += v[i];
  return s / static_cast<double>(v.size() - 1);
}

FunctionNorms centred_norms(std::vector<double> v, double h, double* l2_sq) {
  const double mean = grid_mean(v);
  FunctionNorms out;
  std::vector<double> sq(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] -= mean;
    out.sup = std::max(out.sup, std::abs(v[i]));
    sq[i] = v[i] * v[i];
    if (i > 0) out.lipschitz = std::max(out.lipschitz, std::abs(v[i] - v[i - 1]) / h);
  }
  if (l2_sq) *l2_sq = grid_mean(sq);
  return out;
}

std::vector<double> values_on_grid(const FamilySpec& family, double mu, const Grid& g) {
  std::vector<double> v(g.x.size());
  for (std::size_t i = 0; i < g.x.size(); ++i)
    v[i] = eval_point(family, mu, std::span<const double>(&g.x[i], 1));
  return v;
}

}  // namespace

FamilyConstants estimate_family_constants(const FamilySpec& family, std::span<const double> params,
                                          std::size_t grid_points) {
  if (params.empty()) throw DomainError("estimate_family_constants: empty parameter list");
  const Grid g = support_grid(family, grid_points);
  FamilyConstants out;
  for (double mu : params) {
    double l2 = 0.0;
    const FunctionNorms nm = centred_norms(values_on_grid(family, mu, g), g.h, &l2);
    out.K2 = std::max(out.K2, std::sqrt(l2));
    out.Kinf = std::max(out.Kinf, nm.sup);
    out.KL = std::max(out.KL, nm.lipschitz);
  }
  out.provenance = "dense grid estimate (" + std::to_string(grid_points) + " points, " +
                   std::to_string(params.size()) + " parameters)";
  return out;
}

std::vector<FunctionNorms> basis_function_norms(const FamilySpec& family, const ReducedBasis& basis,
                                                std::size_t grid_points) {
  const Grid g = support_grid(family, grid_points);
  std::vector<std::vector<double>> snaps;
  for (double mu : basis.snapshot_params) snaps.push_back(values_on_grid(family, mu, g));
  std::vector<FunctionNorms> out;
  for (std::size_t i = 0; i < basis.size(); ++i) {
    std::vector<double> v(g.x.size(), 0.0);
    for (std::size_t j = 0; j <= i; ++j) {
      const double cij = basis.coeffs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      for (std::size_t k = 0; k < v.size(); ++k) v[k] += cij * snaps[j][k];
    }
    out.push_back(centred_norms(std::move(v), g.h, nullptr));
  }
  return out;
}

BoundReport bound_report(const TheoryParams& params, std::span<const double> sigma_hat_sq,
                         std::span<const FunctionNorms> basis_norms) {
  params.validate();
  BoundReport report;
  report.params = params;
  double kinf = params.Kinf;
  double kl = params.KL;
  for (std::size_t n = 1; n <= sigma_hat_sq.size(); ++n) {
    // K^{n-1} includes the first n-1 basis functions.
    if (n >= 2 && n - 2 < basis_norms.size()) {
      kinf = std::max(kinf, basis_norms[n - 2].sup);
      kl = std::max(kl, basis_norms[n - 2].lipschitz);
    }
    BoundRow row;
    row.n = n;
    row.sigma_hat_sq = sigma_hat_sq[n - 1];
    row.kappa = kappa_bound(n, params.gamma, row.sigma_hat_sq, params.K2, kinf, kl);
    row.phi_of_kappa = phi(row.kappa, params.d, params.alpha);
    row.delta_n = delta_schedule(params.delta, n);
    const SampleBound b =
        sample_lower_bound(row.delta_n, params.C, params.c, row.kappa, params.d, params.alpha);
    row.m_lower_bound = b.count;
    row.vacuous = b.vacuous;
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace rbcv::theory
