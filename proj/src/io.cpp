#include "rbcv/io.hpp"

#include "rbcv/error.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>

namespace rbcv {

const char* const kTraceHeader = "variant,n,kind,mu,M,R,theta_mu,theta_sup,beta_mu,beta_sup,stream_id";
const char* const kProfilesHeader = "variant,n,mu,theta,beta";
const char* const kOnlineHeader =
    "variant,n,mu,estimate,ref_mean,e_n,M_MC,M_n,small_stream,residual_var,ref_var,lambda";
const char* const kBoundsHeader =
    "n,sigma_hat_sq,kappa,phi_kappa,delta_n,M_lower_bound,vacuous,M_heuristic,ratio";
const char* const kProbeHeader = "M,kappa,trials,frequency";

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  for (int p = 1; p <= 17; ++p) {
    std::snprintf(buf, sizeof buf, "%.*g", p, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

namespace {

std::string opt(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

}  // namespace

void write_trace_csv(std::ostream& os, const std::vector<GreedyTrace>& traces) {
  os << kTraceHeader << "\n";
  for (const auto& trace : traces) {
    const std::string v = to_string(trace.variant);
    for (const auto& rec : trace.records) {
      for (const auto& a : rec.retries) {
        os << v << ',' << rec.n << ",retry," << format_number(a.mu) << ',' << a.m << ','
           << format_number(a.ratio) << ',' << format_number(a.theta_mu) << ",,"
           << (a.degenerate_basis ? std::string() : format_number(a.beta_mu)) << ",," << a.stream_id
           << "\n";
      }
      os << v << ',' << rec.n << ",accept," << format_number(rec.mu) << ',' << rec.m << ','
         << opt(rec.ratio) << ',' << format_number(rec.theta_mu) << ','
         << format_number(rec.theta_sup) << ',' << opt(rec.beta_mu) << ',' << opt(rec.beta_sup)
         << ',' << rec.stream_id << "\n";
    }
  }
}

void write_profiles_csv(std::ostream& os, const std::vector<GreedyTrace>& traces,
                        const std::vector<double>& trial_params) {
  os << kProfilesHeader << "\n";
  for (const auto& trace : traces) {
    const std::string v = to_string(trace.variant);
    for (const auto& rec : trace.records) {
      for (std::size_t p = 0; p < trial_params.size() && p < rec.theta_profile.size(); ++p) {
        os << v << ',' << rec.n << ',' << format_number(trial_params[p]) << ','
           << format_number(rec.theta_profile[p]) << ',';
        if (p < rec.beta_profile.size()) os << format_number(rec.beta_profile[p]);
        os << "\n";
      }
    }
  }
}

void write_online_csv(std::ostream& os, const std::vector<OnlineTableRow>& rows) {
  os << kOnlineHeader << "\n";
  for (const auto& r : rows) {
    os << to_string(r.variant) << ',' << r.n << ',' << format_number(r.row.mu) << ','
       << format_number(r.row.estimate) << ',' << format_number(r.row.ref_mean) << ','
       << opt(r.row.rel_error) << ',' << format_number(r.row.m_mc) << ',' << r.m_small << ','
       << r.small_stream << ',' << format_number(r.row.residual_var) << ','
       << format_number(r.row.ref_var) << ',';
    for (Eigen::Index i = 0; i < r.row.lambda.size(); ++i)
      os << (i ? ";" : "") << format_number(r.row.lambda[i]);
    os << "\n";
  }
}

void write_bounds_csv(std::ostream& os, const std::vector<BoundTableRow>& rows) {
  os << kBoundsHeader << "\n";
  for (const auto& r : rows) {
    const auto& b = r.bound;
    os << b.n << ',' << format_number(b.sigma_hat_sq) << ',' << format_number(b.kappa) << ','
       << format_number(b.phi_of_kappa) << ',' << format_number(b.delta_n) << ','
       << b.m_lower_bound << ',' << (b.vacuous ? "true" : "false") << ',';
    if (r.m_heuristic) {
      os << *r.m_heuristic << ','
         << format_number(static_cast<double>(b.m_lower_bound) / static_cast<double>(*r.m_heuristic));
    } else {
      os << ',';
    }
    os << "\n";
  }
}

void write_probe_csv(std::ostream& os, const std::vector<theory::ProbePoint>& grid) {
  os << kProbeHeader << "\n";
  for (const auto& p : grid)
    os << p.m << ',' << format_number(p.kappa) << ',' << p.trials << ',' << format_number(p.frequency)
       << "\n";
}

nlohmann::ordered_json to_json(const SavedBasis& b) {
  nlohmann::ordered_json j;
  j["variant"] = to_string(b.variant);
  j["family"] = b.family;
  j["fem_n_per_side"] = b.fem_n_per_side;
  j["fem_ellipticity_floor"] = b.fem_ellipticity_floor;
  j["seed"] = b.seed;
  j["ref_stream"] = b.ref_stream;
  j["m_ref"] = b.m_ref;
  j["trial_seed"] = b.trial_seed;
  j["terminated_reason"] = b.terminated_reason;
  j["truncated"] = b.truncated;
  j["snapshot_params"] = b.snapshot_params;
  j["ref_means"] = b.ref_means;
  j["thetas"] = b.thetas;
  auto coeffs = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < b.coeffs.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(i + 1));
    for (Eigen::Index k = 0; k <= i; ++k) row[static_cast<std::size_t>(k)] = b.coeffs(i, k);
    coeffs.push_back(row);
  }
  j["coeffs"] = coeffs;
  auto small = nlohmann::ordered_json::array();
  for (std::size_t n = 0; n < b.small_batches.size(); ++n)
    small.push_back({{"n", n + 1}, {"stream", b.small_batches[n].first}, {"m", b.small_batches[n].second}});
  j["small_batches"] = small;
  return j;
}

SavedBasis saved_basis_from_json(const nlohmann::json& j) {
  SavedBasis b;
  try {
    b.variant = parse_variant(j.at("variant").get<std::string>());
    b.family = j.at("family").get<std::string>();
    b.fem_n_per_side = j.at("fem_n_per_side").get<int>();
    b.fem_ellipticity_floor = j.at("fem_ellipticity_floor").get<double>();
    b.seed = j.at("seed").get<std::uint64_t>();
    b.ref_stream = j.at("ref_stream").get<std::uint64_t>();
    b.m_ref = j.at("m_ref").get<std::size_t>();
    b.trial_seed = j.at("trial_seed").get<std::uint64_t>();
    b.terminated_reason = j.value("terminated_reason", "");
    b.truncated = j.value("truncated", false);
    b.snapshot_params = j.at("snapshot_params").get<std::vector<double>>();
    b.ref_means = j.at("ref_means").get<std::vector<double>>();
    b.thetas = j.at("thetas").get<std::vector<double>>();
    const auto n = static_cast<Eigen::Index>(b.snapshot_params.size());
    b.coeffs = Eigen::MatrixXd::Zero(n, n);
    const auto& rows = j.at("coeffs");
    if (static_cast<Eigen::Index>(rows.size()) != n) throw ConfigError("coeffs has the wrong number of rows");
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto row = rows.at(static_cast<std::size_t>(i)).get<std::vector<double>>();
      if (static_cast<Eigen::Index>(row.size()) != i + 1) throw ConfigError("coeffs row has the wrong length");
      for (Eigen::Index k = 0; k <= i; ++k) b.coeffs(i, k) = row[static_cast<std::size_t>(k)];
    }
    for (const auto& s : j.at("small_batches"))
      b.small_batches.emplace_back(s.at("stream").get<std::uint64_t>(), s.at("m").get<std::size_t>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("basis file: ") + e.what());
  }
  if (b.ref_means.size() != b.snapshot_params.size() || b.small_batches.size() != b.snapshot_params.size())
    throw ConfigError("basis file: snapshot, mean and small-batch lists differ in length");
  return b;
}

SavedBasis load_saved_basis(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open basis file");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return saved_basis_from_json(j);
}

}  // namespace rbcv
