#pragma once

// CSV and JSON serialisation of traces, bases, online tables and bounds.
//
// Column sets are fixed:
//   trace.csv     variant,n,kind,mu,M,R,theta_mu,theta_sup,beta_mu,beta_sup,stream_id
//   profiles.csv  variant,n,mu,theta,beta
//   online.csv    variant,n,mu,estimate,ref_mean,e_n,M_MC,M_n,small_stream,residual_var,ref_var,lambda
//   bounds.csv    n,sigma_hat_sq,kappa,phi_kappa,delta_n,M_lower_bound,vacuous,M_heuristic,ratio
//   probe.csv     M,kappa,trials,frequency

#include "rbcv/control_variate.hpp"
#include "rbcv/greedy.hpp"
#include "rbcv/theory.hpp"

#include <json.hpp>

#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace rbcv {

/// Shortest round-trip decimal form; "inf", "-inf" and "nan" for non-finite values.
std::string format_number(double v);

extern const char* const kTraceHeader;
extern const char* const kProfilesHeader;
extern const char* const kOnlineHeader;
extern const char* const kBoundsHeader;
extern const char* const kProbeHeader;

/// One row per rejected attempt (kind=retry) and one per accepted iteration (kind=accept).
void write_trace_csv(std::ostream& os, const std::vector<GreedyTrace>& traces);
void write_profiles_csv(std::ostream& os, const std::vector<GreedyTrace>& traces,
                        const std::vector<double>& trial_params);

struct OnlineTableRow {
  Variant variant = Variant::HMC;
  std::size_t n = 0;
  std::uint64_t small_stream = 0;
  std::size_t m_small = 0;
  OnlineRow row;
};

void write_online_csv(std::ostream& os, const std::vector<OnlineTableRow>& rows);

struct BoundTableRow {
  theory::BoundRow bound;
  std::optional<std::size_t> m_heuristic;
};

void write_bounds_csv(std::ostream& os, const std::vector<BoundTableRow>& rows);
void write_probe_csv(std::ostream& os, const std::vector<theory::ProbePoint>& grid);

/// Everything needed to rebuild an online context without rerunning the greedy.
struct SavedBasis {
  Variant variant = Variant::HMC;
  std::string family;
  int fem_n_per_side = 16;
  double fem_ellipticity_floor = 1e-6;
  std::uint64_t seed = 0;
  std::uint64_t ref_stream = 0;
  std::size_t m_ref = 0;
  std::uint64_t trial_seed = 0;
  std::vector<double> snapshot_params;
  std::vector<double> ref_means;
  std::vector<double> thetas;
  Eigen::MatrixXd coeffs;
  /// Small batch (stream, size) for each basis size n = 1..N.
  std::vector<std::pair<std::uint64_t, std::size_t>> small_batches;
  std::string terminated_reason;
  bool truncated = false;
};

nlohmann::ordered_json to_json(const SavedBasis& basis);
SavedBasis saved_basis_from_json(const nlohmann::json& j);
SavedBasis load_saved_basis(const std::string& path);

}  // namespace rbcv
