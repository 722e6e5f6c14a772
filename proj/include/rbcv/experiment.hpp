#pragma once

// Orchestration behind the command-line tool: greedy runs per variant, online
// tables, theory reports and the files written for each.

#include "rbcv/config.hpp"
#include "rbcv/control_variate.hpp"
#include "rbcv/greedy.hpp"
#include "rbcv/io.hpp"
#include "rbcv/theory.hpp"

#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace rbcv {

/// IMC draws nothing but the reference batch; its online small batch uses this stream.
inline constexpr std::uint64_t kImcSmallStream = 1;

struct VariantRun {
  Variant variant = Variant::HMC;
  GreedyResult result;
  std::vector<double> trial_params;
};

struct TheoryOutcome {
  theory::FamilyConstants constants;
  theory::ProbeResult probe;
  theory::TheoryParams params;
  std::vector<BoundTableRow> rows;
  std::vector<std::string> notes;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<VariantRun> runs;
  std::vector<OnlineTableRow> online;
  std::optional<TheoryOutcome> theory;
  std::vector<std::string> warnings;
};

VariantRun run_variant(const ExperimentConfig& config, Variant variant);

SavedBasis saved_basis(const ExperimentConfig& config, const VariantRun& run);

/// Online context for the first n snapshots of a saved basis.
OnlineContext online_context(const SavedBasis& basis, std::size_t n);

/// Online rows for each configured basis size and query parameter.
std::vector<OnlineTableRow> online_table(const SavedBasis& basis, std::span<const double> mus,
                                         std::span<const std::size_t> levels,
                                         std::vector<std::string>* warnings = nullptr);

/// Runs every configured variant, the online table and (if enabled) the theory report.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Bound table from an IMC run (sigma_hat values and basis norms), the
/// concentration probe on the input law, and the HMC-accepted M_n for comparison.
TheoryOutcome validate_theory(const ExperimentConfig& config, const VariantRun* imc = nullptr,
                              const VariantRun* hmc = nullptr);

/// Throws ConfigError unless all traces share the trial set and reference batch.
void check_comparable(const std::vector<GreedyTrace>& traces);

/// Per-n table of theta/beta columns across variants (no beta or M columns for IMC).
void write_compare_csv(std::ostream& os, const std::vector<GreedyTrace>& traces);

/// Writes trace.csv, profiles.csv, online.csv, basis_<variant>.json,
/// [compare.csv], [bounds.csv, probe.csv, theory.json], config.resolved and
/// manifest.json into out_dir. Returns the file names in write order.
std::vector<std::string> write_experiment(const ExperimentResult& result, const std::string& out_dir,
                                          const std::string& command);

std::vector<std::string> write_theory(const TheoryOutcome& outcome, const ExperimentConfig& config,
                                      const std::string& out_dir);

}  // namespace rbcv
