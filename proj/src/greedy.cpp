#include "rbcv/greedy.hpp"

#include "rbcv/error.hpp"
#include "rbcv/theory.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

namespace rbcv {

namespace {

constexpr double kMaxCondition = 1e12;

/// Inverse of a symmetric positive definite covariance matrix; throws when
/// its condition number exceeds kMaxCondition.
Eigen::MatrixXd checked_inverse(const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
  if (eig.info() != Eigen::Success) throw DegenerateBasisError("covariance eigensolve failed");
  const Eigen::VectorXd& ev = eig.eigenvalues();
  const double lo = ev.minCoeff();
  const double hi = ev.maxCoeff();
  if (!(lo > 0.0) || hi / lo > kMaxCondition)
    throw DegenerateBasisError("basis covariance matrix is numerically singular (eigenvalues " +
                               std::to_string(lo) + " .. " + std::to_string(hi) + ")");
  return eig.eigenvectors() * ev.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
}

RowMatrix as_row(std::span<const double> v) {
  RowMatrix m(1, static_cast<Eigen::Index>(v.size()));
  std::copy(v.begin(), v.end(), m.data());
  return m;
}

RowMatrix take_rows(const RowMatrix& src, const std::vector<std::size_t>& rows) {
  RowMatrix out(static_cast<Eigen::Index>(rows.size()), src.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = src.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

std::vector<double> row_variances(const RowMatrix& centered) {
  std::vector<double> out(static_cast<std::size_t>(centered.rows()));
  const auto m = static_cast<std::size_t>(centered.cols());
  for (Eigen::Index p = 0; p < centered.rows(); ++p) {
    const double* r = centered.data() + p * centered.cols();
    double sum = 0.0;
    for (std::size_t k = 0; k < m; ++k) sum += r[k] * r[k];
    out[static_cast<std::size_t>(p)] = sum / static_cast<double>(m);
  }
  return out;
}

double max_of(const std::vector<double>& v) {
  double out = 0.0;
  for (double x : v) out = std::max(out, x);
  return out;
}

std::vector<double> sqrt_all(const std::vector<double>& v) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::sqrt(std::max(0.0, v[i]));
  return out;
}

/// Trial-set statistics on the reference batch, updated as the basis grows.
/// theta_n(mu)^2 = Var_ref(f_mu) - sum_i Cov_ref(f_mu, g_i)^2 with the sum
/// accumulated in basis order, so each profile entry is nonincreasing in n.
class ReferenceState {
 public:
  explicit ReferenceState(const GreedyConfig& config)
      : batch_(draw_reference_batch(config)),
        evals_(eval_rows(config.family, config.trial.parameters, batch_)),
        centered_(center_rows(evals_.values)),
        var_(row_variances(centered_)),
        sum_sq_(var_.size(), 0.0),
        floor_(kResidualFloor * max_of(var_)) {}

  const SampleBatch& batch() const { return batch_; }
  const EvalMatrix& evals() const { return evals_; }
  const std::vector<double>& variances() const { return var_; }
  double floor() const { return floor_; }
  std::size_t trial_count() const { return var_.size(); }

  std::vector<double> theta_sq_profile() const {
    std::vector<double> out(var_.size());
    for (std::size_t p = 0; p < var_.size(); ++p) out[p] = std::max(0.0, var_[p] - sum_sq_[p]);
    return out;
  }

  /// Cov_ref(f_mu, g_i) for the current basis, i.e. the reference best-fit
  /// coefficients of f_mu.
  Eigen::VectorXd lambda(std::size_t p) const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(cov_.size()));
    for (std::size_t i = 0; i < cov_.size(); ++i) out[static_cast<Eigen::Index>(i)] = cov_[i][p];
    return out;
  }

  std::span<const double> raw_row(std::size_t p) const { return evals_.row(p); }

  void append_basis_function(std::span<const double> g_centered) {
    RowMatrix g = as_row(g_centered);
    const Eigen::MatrixXd c = centered_cross_cov(centered_, g);
    std::vector<double> column(var_.size());
    for (std::size_t p = 0; p < var_.size(); ++p) {
      column[p] = c(static_cast<Eigen::Index>(p), 0);
      sum_sq_[p] += column[p] * column[p];
    }
    cov_.push_back(std::move(column));
  }

 private:
  SampleBatch batch_;
  EvalMatrix evals_;
  RowMatrix centered_;
  std::vector<double> var_;
  std::vector<double> sum_sq_;
  std::vector<std::vector<double>> cov_;
  double floor_;
};

struct BatchProfile {
  std::vector<double> beta_sq;
  double batch_max_var = 0.0;
};

/// beta_n(mu)^2 for every trial parameter on a batch; throws
/// DegenerateBasisError when the basis is singular there.
BatchProfile batch_profile(const FamilySpec& family, const TrialSet& trial,
                           const ReducedBasis& basis, const SampleBatch& batch) {
  const EvalMatrix evals = eval_rows(family, trial.parameters, batch);
  const RowMatrix centered = center_rows(evals.values);
  BatchProfile out;
  out.batch_max_var = max_of(row_variances(centered));
  if (basis.size() == 0) {
    out.beta_sq = row_variances(centered);
    return out;
  }
  const RowMatrix g = basis.basis_values(take_rows(centered, basis.snapshot_trial_index));
  out.beta_sq = residual_profile(centered, g).residual_var;
  return out;
}

double var_of_cv(const Eigen::VectorXd& lambda) { return lambda.squaredNorm(); }

void record_reference_profile(IterationRecord& rec, const std::vector<double>& theta_sq) {
  rec.theta_profile = sqrt_all(theta_sq);
  rec.theta_sup = std::sqrt(max_of(theta_sq));
}

}  // namespace

std::string to_string(Variant v) {
  switch (v) {
    case Variant::IMC: return "imc";
    case Variant::HMC: return "hmc";
    case Variant::SHMC: return "shmc";
  }
  return "unknown";
}

Variant parse_variant(const std::string& name) {
  if (name == "imc" || name == "IMC") return Variant::IMC;
  if (name == "hmc" || name == "HMC") return Variant::HMC;
  if (name == "shmc" || name == "SHMC") return Variant::SHMC;
  throw ConfigError("unknown greedy variant '" + name + "' (expected imc, hmc or shmc)");
}

RowMatrix ReducedBasis::basis_values(const RowMatrix& snapshot_rows) const {
  if (static_cast<std::size_t>(snapshot_rows.rows()) != size())
    throw DomainError("basis_values: expected one row per snapshot");
  const RowMatrix g = coeffs.triangularView<Eigen::Lower>() * snapshot_rows;
  return center_rows(g);
}

ReducedBasis ReducedBasis::prefix(std::size_t k) const {
  if (k > size()) throw DomainError("ReducedBasis::prefix: k exceeds basis size");
  ReducedBasis out;
  const auto kk = static_cast<Eigen::Index>(k);
  out.snapshot_params.assign(snapshot_params.begin(), snapshot_params.begin() + kk);
  out.snapshot_trial_index.assign(snapshot_trial_index.begin(), snapshot_trial_index.begin() + kk);
  out.coeffs = coeffs.topLeftCorner(kk, kk);
  out.thetas.assign(thetas.begin(), thetas.begin() + kk);
  out.ref_means.assign(ref_means.begin(), ref_means.begin() + kk);
  out.ref_evals.batch_tag = ref_evals.batch_tag;
  out.ref_evals.values = ref_evals.values.topRows(kk);
  out.ref_basis = ref_basis.topRows(kk);
  return out;
}

BestFit best_fit_residual(std::span<const double> target, const RowMatrix& basis_rows) {
  if (basis_rows.rows() > 0 && static_cast<std::size_t>(basis_rows.cols()) != target.size())
    throw DomainError("best_fit_residual: target and basis evaluated on different batches");
  const ResidualProfile prof = residual_profile(as_row(target), basis_rows);
  return {prof.residual_var[0], prof.lambda.row(0).transpose()};
}

BestFit best_fit_orthonormal(std::span<const double> target, const RowMatrix& basis_rows) {
  BestFit fit;
  fit.lambda.resize(basis_rows.rows());
  const auto m = static_cast<std::size_t>(basis_rows.cols());
  double sum_sq = 0.0;
  for (Eigen::Index i = 0; i < basis_rows.rows(); ++i) {
    const std::span<const double> gi(basis_rows.data() + i * basis_rows.cols(), m);
    fit.lambda[i] = empirical_cov(target, gi);
    sum_sq += fit.lambda[i] * fit.lambda[i];
  }
  fit.residual_var = std::max(0.0, empirical_var(target) - sum_sq);
  return fit;
}

ResidualProfile residual_profile(const RowMatrix& targets, const RowMatrix& basis_rows) {
  const RowMatrix tc = center_rows(targets);
  ResidualProfile out;
  const std::vector<double> var = row_variances(tc);
  if (basis_rows.rows() == 0) {
    out.residual_var = var;
    out.lambda.resize(targets.rows(), 0);
    return out;
  }
  if (basis_rows.cols() != targets.cols())
    throw DomainError("residual_profile: targets and basis evaluated on different batches");
  const RowMatrix gc = center_rows(basis_rows);
  const Eigen::MatrixXd a = centered_cross_cov(gc, gc);
  const Eigen::MatrixXd b = centered_cross_cov(tc, gc);  // targets x basis
  const Eigen::MatrixXd a_inv = checked_inverse(a);
  out.lambda = b * a_inv;
  out.residual_var.resize(var.size());
  for (std::size_t p = 0; p < var.size(); ++p) {
    const auto pi = static_cast<Eigen::Index>(p);
    const Eigen::VectorXd lam = out.lambda.row(pi).transpose();
    const Eigen::VectorXd bp = b.row(pi).transpose();
    const double r = var[p] - 2.0 * lam.dot(bp) + lam.dot(a * lam);
    out.residual_var[p] = std::max(0.0, r);
  }
  return out;
}

Selection argmax_profile(std::vector<double> profile, std::span<const double> params, double floor) {
  if (profile.empty() || profile.size() != params.size())
    throw DomainError("select_parameter: empty or mismatched trial set");
  Selection sel;
  sel.index = 0;
  for (std::size_t p = 1; p < profile.size(); ++p)
    if (profile[p] > profile[sel.index]) sel.index = p;
  sel.mu = params[sel.index];
  sel.residual_var = profile[sel.index];
  sel.degenerate = !(sel.residual_var > floor);
  sel.profile = std::move(profile);
  return sel;
}

Selection select_parameter(const TrialSet& trial, const ReducedBasis& basis,
                           const SampleBatch& batch, const FamilySpec& family) {
  if (trial.parameters.empty()) throw DomainError("select_parameter: empty trial set");
  BatchProfile prof = batch_profile(family, trial, basis, batch);
  return argmax_profile(std::move(prof.beta_sq), trial.parameters,
                        kResidualFloor * prof.batch_max_var);
}

ReducedBasis orthonormalize_next(ReducedBasis basis, double mu_new, std::size_t trial_index,
                                 std::span<const double> f_new_ref, double theta_new,
                                 const Eigen::VectorXd& lambda_ref) {
  const std::size_t n = basis.size();
  if (static_cast<std::size_t>(lambda_ref.size()) != n)
    throw DomainError("orthonormalize_next: lambda size does not match basis size");
  if (n > 0 && static_cast<std::size_t>(basis.ref_basis.cols()) != f_new_ref.size())
    throw DomainError("orthonormalize_next: snapshot not evaluated on the reference batch");
  const double var_f = empirical_var(f_new_ref);
  if (!(theta_new > 0.0) || !std::isfinite(theta_new) ||
      theta_new * theta_new <= kResidualFloor * var_f)
    throw DegenerateSnapshotError("orthonormalize_next: snapshot at mu=" + std::to_string(mu_new) +
                                  " lies in the span of the basis (theta=" +
                                  std::to_string(theta_new) + ")");

  const auto ni = static_cast<Eigen::Index>(n);
  const auto m = static_cast<Eigen::Index>(f_new_ref.size());

  // Coefficient row of the new function in the snapshot representation.
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(ni + 1);
  row[ni] = 1.0;
  for (Eigen::Index i = 0; i < ni; ++i) row.head(ni) -= lambda_ref[i] * basis.coeffs.row(i);
  row /= theta_new;

  const RowMatrix fc = center_rows(as_row(f_new_ref));
  Eigen::RowVectorXd g = fc.row(0);
  for (Eigen::Index i = 0; i < ni; ++i) g -= lambda_ref[i] * basis.ref_basis.row(i);
  g /= theta_new;

  // Second Gram-Schmidt pass against the stored basis.
  for (Eigen::Index i = 0; i < ni; ++i) {
    const double c = g.dot(basis.ref_basis.row(i)) / static_cast<double>(m);
    g -= c * basis.ref_basis.row(i);
    row.head(ni) -= c * basis.coeffs.row(i);
  }
  g.array() -= g.mean();
  const double scale = std::sqrt(g.squaredNorm() / static_cast<double>(m));
  if (!(scale > 0.0) || !std::isfinite(scale))
    throw DegenerateSnapshotError("orthonormalize_next: re-orthogonalisation collapsed");
  g /= scale;
  row /= scale;

  Eigen::MatrixXd coeffs = Eigen::MatrixXd::Zero(ni + 1, ni + 1);
  coeffs.topLeftCorner(ni, ni) = basis.coeffs;
  coeffs.row(ni) = row;
  basis.coeffs = std::move(coeffs);

  basis.ref_basis.conservativeResize(ni + 1, m);
  basis.ref_basis.row(ni) = g;
  basis.ref_evals.values.conservativeResize(ni + 1, m);
  std::copy(f_new_ref.begin(), f_new_ref.end(), basis.ref_evals.values.data() + ni * m);

  basis.snapshot_params.push_back(mu_new);
  basis.snapshot_trial_index.push_back(trial_index);
  basis.thetas.push_back(theta_new);
  basis.ref_means.push_back(empirical_mean(f_new_ref));
  return basis;
}

std::size_t grow_samples(std::size_t m, double theta_prev_sq, double theta_curr_sq,
                         const PhiFunction& phi, std::size_t n) {
  if (m < 1) throw DomainError("grow_samples: M must be >= 1");
  // ceil(1.1 M + 1) in integer arithmetic; 1.1 is not representable exactly.
  std::size_t grown = (11 * m + 10 + 9) / 10;
  if (n > 1) {
    const double r = phi(theta_prev_sq) / phi(theta_curr_sq);
    if (r > 1.1) {
      const double target = std::ceil(r * static_cast<double>(m) + 1.0);
      if (!std::isfinite(target) || target > 1e15)
        throw DomainError("grow_samples: growth ratio overflows the sample count");
      grown = static_cast<std::size_t>(target);
    }
  }
  return std::max(grown, m + 1);
}

Acceptance accept_iteration(std::span<const double> theta_sq, std::span<const double> beta_sq,
                            double gamma, Variant variant, double exclusion_floor) {
  if (theta_sq.size() != beta_sq.size() || theta_sq.empty())
    throw DomainError("accept_iteration: theta and beta profiles must be nonempty and aligned");
  if (variant == Variant::IMC) throw DomainError("accept_iteration: not defined for IMC");
  if (variant == Variant::HMC && theta_sq.size() != 1)
    throw DomainError("accept_iteration: HMC compares a single parameter");
  Acceptance out;
  std::size_t compared = 0;
  for (std::size_t i = 0; i < theta_sq.size(); ++i) {
    if (variant == Variant::SHMC && theta_sq[i] <= exclusion_floor) continue;
    if (!(theta_sq[i] > 0.0)) throw DegenerateRatioError("accept_iteration: theta^2 = 0");
    out.ratio = std::max(out.ratio, std::abs(theta_sq[i] - beta_sq[i]) / theta_sq[i]);
    ++compared;
  }
  if (compared == 0) throw DegenerateRatioError("accept_iteration: no parameter with theta^2 > 0");
  out.accepted = out.ratio < 1.0 - gamma * gamma;
  return out;
}

bool termination_check(double var_ref_of_cv, std::size_t m_ref, double var_ref_of_residual,
                       std::size_t m_prev) {
  if (m_ref < 1 || m_prev < 1) throw DomainError("termination_check: counts must be >= 1");
  return var_ref_of_cv / static_cast<double>(m_ref) >
         var_ref_of_residual / static_cast<double>(m_prev);
}

void GreedyConfig::validate() const {
  family.validate();
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in (0,1)");
  if (m1 < 1) throw ConfigError("m1 must be >= 1");
  if (m_ref < 2) throw ConfigError("m_ref must be >= 2");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
  if (max_iters < 1) throw ConfigError("max_iters must be >= 1");
  if (retry_cap < 1) throw ConfigError("retry_cap must be >= 1");
  if (!(alpha > 1.0)) throw ConfigError("alpha must be > 1");
  if (trial.parameters.empty()) throw ConfigError("trial set must be nonempty");
  for (double mu : trial.parameters)
    if (!family.parameter_domain.contains(mu))
      throw ConfigError("trial parameter " + std::to_string(mu) + " outside the parameter domain");
}

std::size_t GreedyTrace::total_retries() const {
  std::size_t total = 0;
  for (const auto& r : records) total += r.retries.size();
  return total;
}

SampleBatch draw_reference_batch(const GreedyConfig& config) {
  return draw_family_batch(config.family, config.m_ref, config.seed, kRefStream);
}

namespace {

GreedyTrace make_trace(const GreedyConfig& config, Variant variant) {
  GreedyTrace trace;
  trace.variant = variant;
  trace.seed = config.seed;
  trace.ref_stream = kRefStream;
  trace.m_ref = config.m_ref;
  trace.trial_seed = config.trial.seed;
  return trace;
}

ReducedBasis empty_basis(const ReferenceState& ref) {
  ReducedBasis basis;
  basis.coeffs.resize(0, 0);
  basis.ref_evals.batch_tag = ref.batch().tag();
  basis.ref_evals.values.resize(0, static_cast<Eigen::Index>(ref.batch().size()));
  basis.ref_basis.resize(0, static_cast<Eigen::Index>(ref.batch().size()));
  return basis;
}

void extend_basis(ReducedBasis& basis, ReferenceState& ref, const TrialSet& trial,
                  std::size_t index, double theta) {
  basis = orthonormalize_next(std::move(basis), trial.parameters[index], index, ref.raw_row(index),
                              theta, ref.lambda(index));
  const auto last = static_cast<Eigen::Index>(basis.size() - 1);
  ref.append_basis_function(std::span<const double>(basis.ref_basis.data() + last * basis.ref_basis.cols(),
                                                    static_cast<std::size_t>(basis.ref_basis.cols())));
}

}  // namespace

GreedyResult run_imc(const GreedyConfig& config) {
  config.validate();
  ReferenceState ref(config);
  GreedyResult result{empty_basis(ref), make_trace(config, Variant::IMC)};
  GreedyTrace& trace = result.trace;

  double theta_prev = std::numeric_limits<double>::infinity();
  for (std::size_t n = 1;; ++n) {
    if (n > 1 && !(theta_prev >= config.epsilon)) {
      trace.terminated_reason = "epsilon reached";
      break;
    }
    if (n > config.max_iters) {
      trace.terminated_reason = "max_iters reached";
      trace.truncated = true;
      break;
    }
    const std::vector<double> theta_sq = ref.theta_sq_profile();
    const Selection sel = argmax_profile(theta_sq, config.trial.parameters, ref.floor());
    if (sel.degenerate) {
      trace.terminated_reason = "trial set exhausted";
      break;
    }
    IterationRecord rec;
    rec.n = n;
    rec.mu = sel.mu;
    rec.trial_index = sel.index;
    rec.m = config.m_ref;
    rec.stream_id = kRefStream;
    rec.theta_mu = std::sqrt(sel.residual_var);
    rec.var_ref_of_cv = var_of_cv(ref.lambda(sel.index));
    record_reference_profile(rec, theta_sq);
    try {
      extend_basis(result.basis, ref, config.trial, sel.index, rec.theta_mu);
    } catch (const DegenerateSnapshotError&) {
      trace.terminated_reason = "trial set exhausted";
      break;
    }
    trace.records.push_back(std::move(rec));
    theta_prev = trace.records.back().theta_mu;
  }
  return result;
}

GreedyResult run_hmc(const GreedyConfig& config, Variant variant) {
  if (variant == Variant::IMC) return run_imc(config);
  config.validate();
  ReferenceState ref(config);
  GreedyResult result{empty_basis(ref), make_trace(config, variant)};
  GreedyTrace& trace = result.trace;
  const std::size_t d = config.family.input_dim;
  const double alpha = config.alpha;
  const PhiFunction phi = [d, alpha](double kappa) { return theory::phi(kappa, d, alpha); };
  const double threshold = 1.0 - config.gamma * config.gamma;

  std::uint64_t next_stream = kRefStream + 1;
  std::size_t m = config.m1;

  for (std::size_t n = 1;; ++n) {
    if (n > config.max_iters) {
      trace.terminated_reason = config.statistical_stop ? "max_iters reached" : "iteration budget reached";
      trace.truncated = config.statistical_stop;
      break;
    }
    if (n > 1 && config.statistical_stop) {
      const IterationRecord& prev = trace.records.back();
      if (termination_check(prev.var_ref_of_cv, config.m_ref, prev.theta_mu * prev.theta_mu,
                            prev.m)) {
        trace.terminated_reason = "statistical error balanced";
        break;
      }
    }
    const std::vector<double> theta_sq = ref.theta_sq_profile();
    if (!(max_of(theta_sq) > ref.floor())) {
      trace.terminated_reason = "trial set exhausted";
      break;
    }
    const double theta_prev_sq =
        n > 1 ? trace.records.back().theta_mu * trace.records.back().theta_mu : 0.0;

    IterationRecord rec;
    rec.n = n;
    bool accepted = false;
    bool exhausted = false;
    while (!accepted) {
      if (rec.retries.size() >= config.retry_cap) break;
      Attempt attempt;
      attempt.m = m;
      attempt.stream_id = next_stream++;
      const SampleBatch batch = draw_family_batch(config.family, m, config.seed, attempt.stream_id);

      BatchProfile prof;
      try {
        prof = batch_profile(config.family, config.trial, result.basis, batch);
      } catch (const DegenerateBasisError&) {
        attempt.degenerate_basis = true;
        attempt.ratio = std::numeric_limits<double>::infinity();
        rec.retries.push_back(attempt);
        m = grow_samples(m, 0.0, 0.0, phi, 1);
        continue;
      }
      const Selection sel = argmax_profile(prof.beta_sq, config.trial.parameters,
                                           kResidualFloor * prof.batch_max_var);
      attempt.mu = sel.mu;
      attempt.beta_mu = std::sqrt(sel.residual_var);
      attempt.theta_mu = std::sqrt(theta_sq[sel.index]);

      bool degenerate_ratio = sel.degenerate;
      if (!degenerate_ratio) {
        try {
          const Acceptance acc =
              variant == Variant::HMC
                  ? accept_iteration(std::span<const double>(&theta_sq[sel.index], 1),
                                     std::span<const double>(&prof.beta_sq[sel.index], 1),
                                     config.gamma, variant)
                  : accept_iteration(theta_sq, prof.beta_sq, config.gamma, variant, ref.floor());
          attempt.ratio = acc.ratio;
          attempt.accepted = acc.accepted;
        } catch (const DegenerateRatioError&) {
          degenerate_ratio = true;
        }
      }
      if (degenerate_ratio) attempt.ratio = std::numeric_limits<double>::infinity();

      if (attempt.accepted && attempt.ratio < threshold) {
        accepted = true;
        rec.mu = sel.mu;
        rec.trial_index = sel.index;
        rec.m = m;
        rec.stream_id = attempt.stream_id;
        rec.theta_mu = attempt.theta_mu;
        rec.beta_mu = attempt.beta_mu;
        rec.ratio = attempt.ratio;
        rec.beta_profile = sqrt_all(prof.beta_sq);
        rec.beta_sup = std::sqrt(max_of(prof.beta_sq));
        rec.var_ref_of_cv = var_of_cv(ref.lambda(sel.index));
        record_reference_profile(rec, theta_sq);
        break;
      }
      rec.retries.push_back(attempt);
      if (degenerate_ratio || !(theta_sq[sel.index] > 0.0))
        m = grow_samples(m, 0.0, 0.0, phi, 1);
      else
        m = grow_samples(m, theta_prev_sq, theta_sq[sel.index], phi, n);
    }
    if (!accepted) {
      trace.terminated_reason = "retry cap reached at n=" + std::to_string(n);
      trace.truncated = true;
      break;
    }
    try {
      extend_basis(result.basis, ref, config.trial, rec.trial_index, rec.theta_mu);
    } catch (const DegenerateSnapshotError&) {
      exhausted = true;
    }
    if (exhausted) {
      trace.terminated_reason = "trial set exhausted";
      break;
    }
    trace.records.push_back(std::move(rec));
  }
  return result;
}

GreedyResult run_greedy(const GreedyConfig& config, Variant variant) {
  return variant == Variant::IMC ? run_imc(config) : run_hmc(config, variant);
}

}  // namespace rbcv
