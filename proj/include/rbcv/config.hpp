#pragma once

// Experiment configuration in a flat `key = value` text format.
//
//   # comment
//   family   = tc1
//   variants = hmc, shmc, imc
//   gamma    = 0.9
//
// Keys are listed in kConfigKeys with their defaults; unknown keys, malformed
// values and constraint violations raise ConfigError("<file>:<line>: ...").

#include "rbcv/greedy.hpp"

#include <cstdint>
#include <istream>
#include <string>
#include <vector>

namespace rbcv {

struct ExperimentConfig {
  std::string family = "tc1";
  std::vector<Variant> variants{Variant::HMC};
  double gamma = 0.9;
  std::size_t m1 = 10;
  std::size_t m_ref = 100000;
  double epsilon = 1e-3;
  std::size_t max_iters = 100;
  std::size_t retry_cap = 200;
  bool statistical_stop = true;
  double alpha = 2.0;
  std::size_t trial_size = 100;
  std::uint64_t trial_seed = 1;
  std::uint64_t seed = 0;
  int fem_n_per_side = 16;
  double fem_ellipticity_floor = 1e-6;

  std::size_t online_m_small = 1000;     ///< IMC small batch size
  std::vector<double> online_mu;         ///< empty: the trial set
  std::vector<std::size_t> online_levels;  ///< basis sizes to report; empty: final only

  bool theory = false;
  double theory_delta = 0.1;
  std::vector<std::size_t> probe_m{250, 500, 1000, 2000};
  std::vector<double> probe_kappa{0.05, 0.1, 0.2, 0.3};
  std::size_t probe_trials = 200;
  std::uint64_t probe_seed = 7;
  std::size_t theory_grid_points = 4001;

  std::string out_dir = "out";
  bool desk = true;

  GreedyConfig greedy_config() const;
  FamilySpec family_spec() const;
};

struct ConfigKey {
  const char* name;
  const char* type;
  const char* default_value;
  const char* meaning;
};

extern const std::vector<ConfigKey> kConfigKeys;

ExperimentConfig parse_config(std::istream& in, const std::string& source_name);
ExperimentConfig load_config(const std::string& path);

/// Resolved configuration text; parsing it gives back the same config.
std::string to_config_text(const ExperimentConfig& config);

/// Built-in presets "<tc1|tc2|heat2d>-<desk|paper>".
std::vector<std::string> preset_names();
std::string preset_text(const std::string& name);
ExperimentConfig load_preset(const std::string& name);

}  // namespace rbcv
