#include "rbcv/experiment.hpp"

#include "rbcv/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace rbcv {

namespace fs = std::filesystem;

VariantRun run_variant(const ExperimentConfig& config, Variant variant) {
  const GreedyConfig g = config.greedy_config();
  VariantRun run;
  run.variant = variant;
  run.trial_params = g.trial.parameters;
  run.result = run_greedy(g, variant);
  return run;
}

SavedBasis saved_basis(const ExperimentConfig& config, const VariantRun& run) {
  const auto& basis = run.result.basis;
  const auto& trace = run.result.trace;
  SavedBasis s;
  s.variant = run.variant;
  s.family = config.family;
  s.fem_n_per_side = config.fem_n_per_side;
  s.fem_ellipticity_floor = config.fem_ellipticity_floor;
  s.seed = trace.seed;
  s.ref_stream = trace.ref_stream;
  s.m_ref = trace.m_ref;
  s.trial_seed = trace.trial_seed;
  s.snapshot_params = basis.snapshot_params;
  s.ref_means = basis.ref_means;
  s.thetas = basis.thetas;
  s.coeffs = basis.coeffs;
  s.terminated_reason = trace.terminated_reason;
  s.truncated = trace.truncated;
  for (const auto& rec : trace.records) {
    if (run.variant == Variant::IMC)
      s.small_batches.emplace_back(kImcSmallStream, config.online_m_small);
    else
      s.small_batches.emplace_back(rec.stream_id, rec.m);
  }
  return s;
}

namespace {

FamilySpec saved_family(const SavedBasis& basis) {
  return make_family(basis.family, basis.fem_n_per_side, basis.fem_ellipticity_floor);
}

}  // namespace

OnlineContext online_context(const SavedBasis& basis, std::size_t n) {
  if (n < 1 || n > basis.snapshot_params.size())
    throw DomainError("online: basis size " + std::to_string(n) + " not available (basis has " +
                      std::to_string(basis.snapshot_params.size()) + ")");
  const FamilySpec family = saved_family(basis);
  const auto [stream, m] = basis.small_batches[n - 1];
  return OnlineContext::build(family, std::span<const double>(basis.snapshot_params.data(), n),
                              std::span<const double>(basis.ref_means.data(), n),
                              draw_family_batch(family, basis.m_ref, basis.seed, basis.ref_stream),
                              draw_family_batch(family, m, basis.seed, stream));
}

std::vector<OnlineTableRow> online_table(const SavedBasis& basis, std::span<const double> mus,
                                         std::span<const std::size_t> levels,
                                         std::vector<std::string>* warnings) {
  std::vector<OnlineTableRow> out;
  const std::size_t big_n = basis.snapshot_params.size();
  if (big_n == 0) {
    if (warnings) warnings->push_back(to_string(basis.variant) + ": empty basis, no online rows");
    return out;
  }
  std::vector<std::size_t> use;
  for (std::size_t n : levels) {
    if (n <= big_n) {
      use.push_back(n);
    } else if (warnings) {
      warnings->push_back(to_string(basis.variant) + ": online level " + std::to_string(n) +
                          " exceeds basis size " + std::to_string(big_n));
    }
  }
  if (levels.empty()) use.push_back(big_n);

  const FamilySpec family = saved_family(basis);
  const SampleBatch ref = draw_family_batch(family, basis.m_ref, basis.seed, basis.ref_stream);
  std::map<double, std::vector<double>> ref_rows;
  for (double mu : mus) ref_rows.emplace(mu, eval_family(family, mu, ref));

  for (std::size_t n : use) {
    const auto [stream, m] = basis.small_batches[n - 1];
    const OnlineContext ctx = OnlineContext::build(
        family, std::span<const double>(basis.snapshot_params.data(), n),
        std::span<const double>(basis.ref_means.data(), n), ref,
        draw_family_batch(family, m, basis.seed, stream));
    for (double mu : mus) {
      OnlineTableRow row;
      row.variant = basis.variant;
      row.n = n;
      row.small_stream = stream;
      row.m_small = m;
      row.row = online_query(ctx, mu, ref_rows.at(mu));
      if (!row.row.rel_error && warnings)
        warnings->push_back(to_string(basis.variant) + ": e_n undefined at mu=" +
                            format_number(mu) + " (zero reference mean)");
      out.push_back(std::move(row));
    }
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  ExperimentResult result;
  result.config = config;
  const VariantRun* imc = nullptr;
  const VariantRun* hmc = nullptr;
  result.runs.reserve(config.variants.size());
  for (Variant v : config.variants) {
    result.runs.push_back(run_variant(config, v));
    const auto& trace = result.runs.back().result.trace;
    if (trace.truncated)
      result.warnings.push_back(to_string(v) + ": truncated (" + trace.terminated_reason + ")");
  }
  for (const auto& run : result.runs) {
    if (run.variant == Variant::IMC) imc = &run;
    if (run.variant == Variant::HMC) hmc = &run;
    const SavedBasis saved = saved_basis(config, run);
    const std::vector<double>& mus = config.online_mu.empty() ? run.trial_params : config.online_mu;
    auto rows = online_table(saved, mus, config.online_levels, &result.warnings);
    result.online.insert(result.online.end(), std::make_move_iterator(rows.begin()),
                         std::make_move_iterator(rows.end()));
  }
  if (config.theory) result.theory = validate_theory(config, imc, hmc);
  return result;
}

TheoryOutcome validate_theory(const ExperimentConfig& config, const VariantRun* imc,
                              const VariantRun* hmc) {
  const FamilySpec family = config.family_spec();
  if (family.input_dim != 1)
    throw ConfigError("validate-theory supports the one-dimensional families tc1 and tc2, not " +
                      config.family);
  std::optional<VariantRun> own_imc;
  std::optional<VariantRun> own_hmc;
  if (!imc) imc = &own_imc.emplace(run_variant(config, Variant::IMC));
  if (!hmc) hmc = &own_hmc.emplace(run_variant(config, Variant::HMC));

  TheoryOutcome out;
  out.constants = theory::estimate_family_constants(family, imc->trial_params, config.theory_grid_points);
  const auto norms = theory::basis_function_norms(family, imc->result.basis, config.theory_grid_points);
  const Marginal& law = family.distribution.components[0];
  out.probe = theory::concentration_probe(law, config.probe_m, config.probe_kappa, config.probe_trials,
                                          config.probe_seed, config.alpha);

  theory::TheoryParams& p = out.params;
  p.alpha = config.alpha;
  p.gamma = config.gamma;
  p.delta = config.theory_delta;
  p.K2 = out.constants.K2;
  p.Kinf = out.constants.Kinf;
  p.KL = out.constants.KL;
  p.d = 1;
  if (out.probe.fit.valid && out.probe.fit.c > 0.0 && out.probe.fit.C > 0.0) {
    p.C = out.probe.fit.C;
    p.c = out.probe.fit.c;
    p.fitted = true;
  } else {
    out.notes.push_back("probe fit unusable (" + std::to_string(out.probe.fit.points) +
                        " nonzero points); C = c = 1 are illustrative");
  }

  std::vector<double> sigma;
  for (const auto& rec : imc->result.trace.records) {
    const double s = rec.theta_sup * rec.theta_sup;
    if (!(s > 0.0)) break;
    sigma.push_back(s);
  }
  const theory::BoundReport report = theory::bound_report(p, sigma, norms);
  const auto& hrec = hmc->result.trace.records;
  for (const auto& row : report.rows) {
    BoundTableRow r;
    r.bound = row;
    if (row.n <= hrec.size()) r.m_heuristic = hrec[row.n - 1].m;
    out.rows.push_back(r);
  }
  return out;
}

void check_comparable(const std::vector<GreedyTrace>& traces) {
  for (std::size_t i = 1; i < traces.size(); ++i) {
    const auto& a = traces.front();
    const auto& b = traces[i];
    if (a.trial_seed != b.trial_seed)
      throw ConfigError("compare: trial seeds differ (" + std::to_string(a.trial_seed) + " vs " +
                        std::to_string(b.trial_seed) + "); variants must share the trial set");
    if (a.seed != b.seed || a.m_ref != b.m_ref || a.ref_stream != b.ref_stream)
      throw ConfigError("compare: reference batches differ; variants must share seed and m_ref");
    if (a.records.empty() || b.records.empty()) continue;
    if (a.records.front().theta_profile.size() != b.records.front().theta_profile.size())
      throw ConfigError("compare: trial set sizes differ");
  }
}

void write_compare_csv(std::ostream& os, const std::vector<GreedyTrace>& traces) {
  check_comparable(traces);
  os << "n";
  std::size_t rows = 0;
  for (const auto& t : traces) {
    const std::string v = to_string(t.variant);
    os << ",theta_mu_" << v << ",theta_sup_" << v;
    if (t.variant != Variant::IMC) os << ",beta_mu_" << v << ",beta_sup_" << v << ",M_" << v;
    rows = std::max(rows, t.records.size());
  }
  os << "\n";
  for (std::size_t n = 1; n <= rows; ++n) {
    os << n;
    for (const auto& t : traces) {
      const bool has = n <= t.records.size();
      const IterationRecord* r = has ? &t.records[n - 1] : nullptr;
      os << ',' << (r ? format_number(r->theta_mu) : "") << ',' << (r ? format_number(r->theta_sup) : "");
      if (t.variant != Variant::IMC) {
        os << ',' << (r && r->beta_mu ? format_number(*r->beta_mu) : "") << ','
           << (r && r->beta_sup ? format_number(*r->beta_sup) : "") << ','
           << (r ? std::to_string(r->m) : "");
      }
    }
    os << "\n";
  }
}

namespace {

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError(path.string() + ": cannot open for writing");
  out << text;
  if (!out) throw ConfigError(path.string() + ": write failed");
}

template <class F>
std::string to_text(F&& f) {
  std::ostringstream os;
  f(os);
  return os.str();
}

nlohmann::ordered_json theory_json(const TheoryOutcome& t) {
  nlohmann::ordered_json j;
  j["C"] = t.params.C;
  j["c"] = t.params.c;
  j["fitted"] = t.params.fitted;
  j["r_squared"] = t.probe.fit.r_squared;
  j["probe_points_used"] = t.probe.fit.points;
  j["K2"] = t.constants.K2;
  j["Kinf"] = t.constants.Kinf;
  j["KL"] = t.constants.KL;
  j["constants_provenance"] = t.constants.provenance;
  j["gamma"] = t.params.gamma;
  j["delta"] = t.params.delta;
  j["alpha"] = t.params.alpha;
  j["notes"] = t.notes;
  return j;
}

}  // namespace

std::vector<std::string> write_theory(const TheoryOutcome& outcome, const ExperimentConfig&,
                                      const std::string& out_dir) {
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  write_file(dir / "bounds.csv", to_text([&](std::ostream& os) { write_bounds_csv(os, outcome.rows); }));
  write_file(dir / "probe.csv", to_text([&](std::ostream& os) { write_probe_csv(os, outcome.probe.grid); }));
  write_file(dir / "theory.json", theory_json(outcome).dump(2) + "\n");
  return {"bounds.csv", "probe.csv", "theory.json"};
}

std::vector<std::string> write_experiment(const ExperimentResult& result, const std::string& out_dir,
                                          const std::string& command) {
  const ExperimentConfig& config = result.config;
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  std::vector<std::string> files;

  std::vector<GreedyTrace> traces;
  for (const auto& run : result.runs) traces.push_back(run.result.trace);
  const std::vector<double> trial = result.runs.empty() ? std::vector<double>{} : result.runs.front().trial_params;

  write_file(dir / "trace.csv", to_text([&](std::ostream& os) { write_trace_csv(os, traces); }));
  files.emplace_back("trace.csv");
  write_file(dir / "profiles.csv", to_text([&](std::ostream& os) { write_profiles_csv(os, traces, trial); }));
  files.emplace_back("profiles.csv");
  write_file(dir / "online.csv", to_text([&](std::ostream& os) { write_online_csv(os, result.online); }));
  files.emplace_back("online.csv");
  for (const auto& run : result.runs) {
    const std::string name = "basis_" + to_string(run.variant) + ".json";
    write_file(dir / name, to_json(saved_basis(config, run)).dump(2) + "\n");
    files.push_back(name);
  }
  if (command == "compare" || traces.size() >= 2) {
    write_file(dir / "compare.csv", to_text([&](std::ostream& os) { write_compare_csv(os, traces); }));
    files.emplace_back("compare.csv");
  }
  if (result.theory) {
    for (auto& f : write_theory(*result.theory, config, out_dir)) files.push_back(f);
  }
  const std::string resolved = to_config_text(config);
  write_file(dir / "config.resolved", resolved);
  files.emplace_back("config.resolved");

  nlohmann::ordered_json m;
  m["tool"] = "rbcv";
  m["format_version"] = 1;
  m["command"] = command;
  m["replay"] = "rbcv " + command + " --config config.resolved --out <dir>";
  m["config"] = resolved;
  m["seed"] = config.seed;
  m["trial"] = {{"seed", config.trial_seed}, {"stream", 0}, {"size", config.trial_size}};
  m["reference_batch"] = {{"seed", config.seed}, {"stream", kRefStream}, {"m", config.m_ref}};
  auto runs = nlohmann::ordered_json::array();
  for (const auto& run : result.runs) {
    const auto& t = run.result.trace;
    nlohmann::ordered_json r;
    r["variant"] = to_string(run.variant);
    r["basis_size"] = t.records.size();
    r["terminated_reason"] = t.terminated_reason;
    r["truncated"] = t.truncated;
    r["total_retries"] = t.total_retries();
    auto accepted = nlohmann::ordered_json::array();
    auto retried = nlohmann::ordered_json::array();
    for (const auto& rec : t.records) {
      if (run.variant != Variant::IMC) accepted.push_back({{"n", rec.n}, {"stream", rec.stream_id}, {"m", rec.m}});
      for (const auto& a : rec.retries) retried.push_back({{"n", rec.n}, {"stream", a.stream_id}, {"m", a.m}});
    }
    r["accepted_batches"] = accepted;
    r["rejected_batches"] = retried;
    if (run.variant == Variant::IMC)
      r["online_small_batch"] = {{"seed", config.seed}, {"stream", kImcSmallStream}, {"m", config.online_m_small}};
    runs.push_back(r);
  }
  m["runs"] = runs;
  if (result.theory) {
    const std::size_t points = config.probe_m.size() * config.probe_kappa.size();
    m["probe"] = {{"seed", config.probe_seed},
                  {"first_stream", 0},
                  {"last_stream", points * config.probe_trials - 1}};
  }
  m["warnings"] = result.warnings;
  files.emplace_back("manifest.json");
  m["files"] = files;
  write_file(dir / "manifest.json", m.dump(2) + "\n");
  return files;
}

}  // namespace rbcv
