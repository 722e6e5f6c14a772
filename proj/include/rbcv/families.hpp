#pragma once

// Parameter-dependent integrands f_mu behind a single evaluation interface.
//
//   tc1     f_mu(x) = hat(x - mu), x ~ U(0,5), mu in [0,3] (evaluable on [0,4])
//   tc2     C^1 square-root/affine kink at x = mu, x ~ U(0,1), mu in [0,1]
//   heat2d  average of the P1 solution over the QoI triangle,
//           z ~ U(0.5,2) x N(0,1), mu in [0,10]

#include "rbcv/fem2d.hpp"
#include "rbcv/stats.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

namespace rbcv {

struct Interval {
  double lo = 0.0;
  double hi = 1.0;

  bool contains(double v) const { return v >= lo && v <= hi; }
};

enum class FamilyKind { TranslateHat, SqrtKink, Heat2d };

struct FamilySpec {
  FamilyKind kind = FamilyKind::TranslateHat;
  Interval parameter_domain;  ///< where the greedy searches
  Interval eval_interval;     ///< where f_mu may be evaluated (may exceed the domain)
  std::size_t input_dim = 1;
  DistributionSpec distribution;
  std::shared_ptr<const fem::FemContext> fem;  ///< heat2d only

  std::string name() const;
  void validate() const;
  /// Redraw predicate for batches (heat2d excludes non-elliptic z over the
  /// whole evaluation interval); empty for the analytic families.
  RowPredicate admissibility() const;
};

FamilySpec make_tc1();
FamilySpec make_tc2();
FamilySpec make_heat2d(int n_per_side = 16, double ellipticity_floor = fem::kDefaultEllipticityFloor);
/// "tc1" | "tc2" | "heat2d".
FamilySpec make_family(const std::string& name, int n_per_side = 16,
                       double ellipticity_floor = fem::kDefaultEllipticityFloor);

/// Piecewise-linear hat: 2x on [0,0.5], 1 on [0.5,1.5], 4-2x on [1.5,2], 0 elsewhere.
double testcase1_f(double x);

/// sqrt(x+0.1) on [0,mu], tangent continuation on [mu,1].
double testcase2_f(double mu, double x);

/// f_mu at a single input point.
double eval_point(const FamilySpec& family, double mu, std::span<const double> z);

/// f_mu at every point of the batch.
std::vector<double> eval_family(const FamilySpec& family, double mu, const SampleBatch& batch);

/// Rows f_{mu_p}(Z_k) for a parameter list.
EvalMatrix eval_rows(const FamilySpec& family, std::span<const double> params,
                     const SampleBatch& batch);

/// Draws a batch from the family's input law with its admissibility guard.
SampleBatch draw_family_batch(const FamilySpec& family, std::size_t m, std::uint64_t seed,
                              std::uint64_t stream_id);

struct TrialSet {
  std::vector<double> parameters;  ///< sorted ascending
  std::uint64_t seed = 0;
};

/// count i.i.d. uniform draws over the domain, stored sorted.
TrialSet make_trial_set(const Interval& domain, std::size_t count, std::uint64_t seed);

/// Memoises f_mu rows per (batch tag, mu) so each (mu, z) pair is solved once.
class EvaluationCache {
 public:
  explicit EvaluationCache(FamilySpec family) : family_(std::move(family)) {}

  const std::vector<double>& row(double mu, const SampleBatch& batch);
  const FamilySpec& family() const { return family_; }

 private:
  FamilySpec family_;
  std::map<std::pair<std::string, double>, std::vector<double>> rows_;
  std::mutex mutex_;
};

}  // namespace rbcv
