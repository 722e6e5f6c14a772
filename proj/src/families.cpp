#include "rbcv/families.hpp"

#include "rbcv/error.hpp"
#include "rbcv/rng.hpp"

#include <algorithm>
#include <cmath>

namespace rbcv {

std::string FamilySpec::name() const {
  switch (kind) {
    case FamilyKind::TranslateHat: return "tc1";
    case FamilyKind::SqrtKink: return "tc2";
    case FamilyKind::Heat2d: return "heat2d";
  }
  return "unknown";
}

void FamilySpec::validate() const {
  if (!(parameter_domain.lo < parameter_domain.hi))
    throw ConfigError("family " + name() + ": empty parameter domain");
  if (!(eval_interval.lo <= parameter_domain.lo && parameter_domain.hi <= eval_interval.hi))
    throw ConfigError("family " + name() + ": evaluation interval must contain the domain");
  distribution.validate();
  if (distribution.dim() != input_dim)
    throw ConfigError("family " + name() + ": distribution dimension does not match input_dim");
  if (kind == FamilyKind::Heat2d && !fem) throw ConfigError("family heat2d: missing FEM context");
}

RowPredicate FamilySpec::admissibility() const {
  if (kind != FamilyKind::Heat2d) return {};
  // Worst case over x and mu: 13 - mu_max + 0.5 z2 must stay above the floor.
  const double mu_max = std::max(std::abs(eval_interval.lo), std::abs(eval_interval.hi));
  const double floor = fem ? fem->ellipticity_floor : fem::kDefaultEllipticityFloor;
  return [mu_max, floor](std::span<const double> z) {
    return 13.0 - mu_max + 0.5 * z[1] > floor;
  };
}

FamilySpec make_tc1() {
  FamilySpec f;
  f.kind = FamilyKind::TranslateHat;
  f.parameter_domain = {0.0, 3.0};
  f.eval_interval = {0.0, 4.0};
  f.input_dim = 1;
  f.distribution.components = {Marginal::uniform(0.0, 5.0)};
  return f;
}

FamilySpec make_tc2() {
  FamilySpec f;
  f.kind = FamilyKind::SqrtKink;
  f.parameter_domain = {0.0, 1.0};
  f.eval_interval = {0.0, 1.0};
  f.input_dim = 1;
  f.distribution.components = {Marginal::uniform(0.0, 1.0)};
  return f;
}

FamilySpec make_heat2d(int n_per_side, double ellipticity_floor) {
  FamilySpec f;
  f.kind = FamilyKind::Heat2d;
  f.parameter_domain = {0.0, 10.0};
  f.eval_interval = {0.0, 10.0};
  f.input_dim = 2;
  f.distribution.components = {Marginal::uniform(0.5, 2.0), Marginal::normal(0.0, 1.0)};
  f.fem = std::make_shared<const fem::FemContext>(n_per_side, ellipticity_floor);
  return f;
}

FamilySpec make_family(const std::string& name, int n_per_side, double ellipticity_floor) {
  if (name == "tc1") return make_tc1();
  if (name == "tc2") return make_tc2();
  if (name == "heat2d") return make_heat2d(n_per_side, ellipticity_floor);
  throw ConfigError("unknown family '" + name + "' (expected tc1, tc2 or heat2d)");
}

double testcase1_f(double x) {
  if (x >= 0.0 && x <= 0.5) return 2.0 * x;
  if (x > 0.5 && x <= 1.5) return 1.0;
  if (x > 1.5 && x <= 2.0) return 4.0 - 2.0 * x;
  return 0.0;
}

double testcase2_f(double mu, double x) {
  if (!(mu >= 0.0 && mu <= 1.0)) throw DomainError("testcase2_f: mu outside [0,1]");
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("testcase2_f: x outside [0,1]");
  if (x <= mu) return std::sqrt(x + 0.1);
  const double s = std::sqrt(mu + 0.1);
  return 0.5 / s * (x - mu) + s;
}

double eval_point(const FamilySpec& family, double mu, std::span<const double> z) {
  if (z.size() != family.input_dim) throw ConfigError("eval_point: input dimension mismatch");
  switch (family.kind) {
    case FamilyKind::TranslateHat: return testcase1_f(z[0] - mu);
    case FamilyKind::SqrtKink: return testcase2_f(mu, z[0]);
    case FamilyKind::Heat2d: return family.fem->quantity_of_interest(mu, {z[0], z[1]});
  }
  throw ConfigError("eval_point: unknown family");
}

std::vector<double> eval_family(const FamilySpec& family, double mu, const SampleBatch& batch) {
  if (batch.dim() != family.input_dim)
    throw ConfigError("eval_family: batch dimension " + std::to_string(batch.dim()) +
                      " does not match family input dimension " +
                      std::to_string(family.input_dim));
  if (!family.eval_interval.contains(mu))
    throw DomainError("eval_family: mu=" + std::to_string(mu) + " outside evaluation interval of " +
                      family.name());
  const std::size_t m = batch.size();
  const std::size_t d = batch.dim();
  std::vector<double> out(m);
  for (std::size_t k = 0; k < m; ++k)
    out[k] = eval_point(family, mu, std::span<const double>(batch.points.data() + k * d, d));
  return out;
}

EvalMatrix eval_rows(const FamilySpec& family, std::span<const double> params,
                     const SampleBatch& batch) {
  EvalMatrix evals;
  evals.batch_tag = batch.tag();
  evals.values.resize(static_cast<Eigen::Index>(params.size()),
                      static_cast<Eigen::Index>(batch.size()));
  for (std::size_t p = 0; p < params.size(); ++p) {
    const auto row = eval_family(family, params[p], batch);
    std::copy(row.begin(), row.end(), evals.values.data() + p * batch.size());
  }
  return evals;
}

SampleBatch draw_family_batch(const FamilySpec& family, std::size_t m, std::uint64_t seed,
                              std::uint64_t stream_id) {
  return draw_batch(family.distribution, m, seed, stream_id, family.admissibility());
}

TrialSet make_trial_set(const Interval& domain, std::size_t count, std::uint64_t seed) {
  if (count < 1) throw ConfigError("trial set: size must be >= 1");
  if (!(domain.lo < domain.hi)) throw ConfigError("trial set: empty domain");
  const CounterStream stream(seed, 0);
  TrialSet trial;
  trial.seed = seed;
  trial.parameters.resize(count);
  for (std::size_t i = 0; i < count; ++i)
    trial.parameters[i] = domain.lo + (domain.hi - domain.lo) * stream.open_unit(i);
  std::sort(trial.parameters.begin(), trial.parameters.end());
  return trial;
}

const std::vector<double>& EvaluationCache::row(double mu, const SampleBatch& batch) {
  std::lock_guard lock(mutex_);
  auto key = std::make_pair(batch.tag(), mu);
  auto it = rows_.find(key);
  if (it == rows_.end()) it = rows_.emplace(std::move(key), eval_family(family_, mu, batch)).first;
  return it->second;
}

}  // namespace rbcv
