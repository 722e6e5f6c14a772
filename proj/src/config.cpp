#include "rbcv/config.hpp"

#include "rbcv/error.hpp"
#include "rbcv/presets.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace rbcv {

const std::vector<ConfigKey> kConfigKeys = {
    {"family", "string", "tc1", "tc1 | tc2 | heat2d"},
    {"variants", "list", "hmc", "comma-separated subset of imc, hmc, shmc"},
    {"gamma", "real", "0.9", "acceptance parameter in (0,1)"},
    {"m1", "count", "10", "initial sample count M_1"},
    {"m_ref", "count", "100000", "reference batch size"},
    {"epsilon", "real", "0.001", "IMC stopping tolerance"},
    {"max_iters", "count", "100", "iteration cap"},
    {"retry_cap", "count", "200", "rejected attempts allowed per iteration"},
    {"statistical_stop", "bool", "true", "false runs (S)HMC for exactly max_iters iterations"},
    {"alpha", "real", "2", "tail exponent of phi, > 1"},
    {"trial_size", "count", "100", "number of trial parameters"},
    {"trial_seed", "u64", "1", "seed of the trial set"},
    {"seed", "u64", "0", "master seed of every sample batch"},
    {"fem.n_per_side", "count", "16", "heat2d mesh cells per side"},
    {"fem.ellipticity_floor", "real", "1e-06", "heat2d ellipticity floor"},
    {"online.m_small", "count", "1000", "small batch size for IMC online queries"},
    {"online.mu", "list", "trial", "query parameters, or 'trial' for the trial set"},
    {"online.levels", "list", "final", "basis sizes to report, or 'final'"},
    {"theory.enabled", "bool", "false", "write bounds.csv and probe.csv on run"},
    {"theory.delta", "real", "0.1", "overall failure probability"},
    {"theory.probe_m", "list", "250,500,1000,2000", "probe sample sizes"},
    {"theory.probe_kappa", "list", "0.05,0.1,0.2,0.3", "probe thresholds"},
    {"theory.probe_trials", "count", "200", "batches per probe point"},
    {"theory.probe_seed", "u64", "7", "seed of the probe batches"},
    {"theory.grid_points", "count", "4001", "grid for the regularity constants"},
    {"out", "string", "out", "output directory"},
    {"desk", "bool", "true", "desk-scale preset marker"},
};

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

class Located {
 public:
  explicit Located(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(int line, const std::string& msg) const {
    if (line > 0) throw ConfigError(source_ + ":" + std::to_string(line) + ": " + msg);
    throw ConfigError(source_ + ": " + msg);
  }

  double real(int line, const std::string& key, const std::string& v) const {
    double out = 0.0;
    const auto* end = v.data() + v.size();
    const auto res = std::from_chars(v.data(), end, out);
    if (res.ec != std::errc() || res.ptr != end || !std::isfinite(out))
      fail(line, key + " must be a finite real number, got '" + v + "'");
    return out;
  }

  std::uint64_t u64(int line, const std::string& key, const std::string& v) const {
    std::uint64_t out = 0;
    const auto* end = v.data() + v.size();
    const auto res = std::from_chars(v.data(), end, out);
    if (res.ec != std::errc() || res.ptr != end)
      fail(line, key + " must be a nonnegative integer, got '" + v + "'");
    return out;
  }

  bool boolean(int line, const std::string& key, const std::string& v) const {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    fail(line, key + " must be true or false, got '" + v + "'");
  }

 private:
  std::string source_;
};

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  // Shortest form that still round-trips.
  for (int p = 1; p <= 17; ++p) {
    char shorter[64];
    std::snprintf(shorter, sizeof shorter, "%.*g", p, v);
    if (std::strtod(shorter, nullptr) == v) return shorter;
  }
  return buf;
}

template <class T, class F>
std::string join(const std::vector<T>& v, F f) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += f(v[i]);
  }
  return out;
}

}  // namespace

GreedyConfig ExperimentConfig::greedy_config() const {
  GreedyConfig g;
  g.family = family_spec();
  g.trial = make_trial_set(g.family.parameter_domain, trial_size, trial_seed);
  g.gamma = gamma;
  g.m1 = m1;
  g.m_ref = m_ref;
  g.epsilon = epsilon;
  g.max_iters = max_iters;
  g.retry_cap = retry_cap;
  g.seed = seed;
  g.alpha = alpha;
  g.statistical_stop = statistical_stop;
  return g;
}

FamilySpec ExperimentConfig::family_spec() const {
  return make_family(family, fem_n_per_side, fem_ellipticity_floor);
}

ExperimentConfig parse_config(std::istream& in, const std::string& source_name) {
  const Located loc(source_name);
  ExperimentConfig c;
  std::map<std::string, int> seen;
  std::string raw;
  int line = 0;

  const std::map<std::string, std::function<void(int, const std::string&, const std::string&)>>
      setters = {
          {"family", [&](int, const std::string&, const std::string& v) { c.family = v; }},
          {"variants",
           [&](int l, const std::string& k, const std::string& v) {
             c.variants.clear();
             for (const auto& item : split_list(v)) {
               Variant var;
               try {
                 var = parse_variant(item);
               } catch (const ConfigError& e) {
                 loc.fail(l, k + ": " + e.what());
               }
               if (std::find(c.variants.begin(), c.variants.end(), var) != c.variants.end())
                 loc.fail(l, k + ": variant '" + item + "' listed twice");
               c.variants.push_back(var);
             }
           }},
          {"gamma", [&](int l, const std::string& k, const std::string& v) { c.gamma = loc.real(l, k, v); }},
          {"m1", [&](int l, const std::string& k, const std::string& v) { c.m1 = loc.u64(l, k, v); }},
          {"m_ref", [&](int l, const std::string& k, const std::string& v) { c.m_ref = loc.u64(l, k, v); }},
          {"epsilon", [&](int l, const std::string& k, const std::string& v) { c.epsilon = loc.real(l, k, v); }},
          {"max_iters", [&](int l, const std::string& k, const std::string& v) { c.max_iters = loc.u64(l, k, v); }},
          {"retry_cap", [&](int l, const std::string& k, const std::string& v) { c.retry_cap = loc.u64(l, k, v); }},
          {"statistical_stop",
           [&](int l, const std::string& k, const std::string& v) { c.statistical_stop = loc.boolean(l, k, v); }},
          {"alpha", [&](int l, const std::string& k, const std::string& v) { c.alpha = loc.real(l, k, v); }},
          {"trial_size", [&](int l, const std::string& k, const std::string& v) { c.trial_size = loc.u64(l, k, v); }},
          {"trial_seed", [&](int l, const std::string& k, const std::string& v) { c.trial_seed = loc.u64(l, k, v); }},
          {"seed", [&](int l, const std::string& k, const std::string& v) { c.seed = loc.u64(l, k, v); }},
          {"fem.n_per_side",
           [&](int l, const std::string& k, const std::string& v) {
             const auto n = loc.u64(l, k, v);
             if (n < 2 || n > 4096) loc.fail(l, k + " must lie in [2, 4096]");
             c.fem_n_per_side = static_cast<int>(n);
           }},
          {"fem.ellipticity_floor",
           [&](int l, const std::string& k, const std::string& v) { c.fem_ellipticity_floor = loc.real(l, k, v); }},
          {"online.m_small", [&](int l, const std::string& k, const std::string& v) { c.online_m_small = loc.u64(l, k, v); }},
          {"online.mu",
           [&](int l, const std::string& k, const std::string& v) {
             c.online_mu.clear();
             if (v == "trial") return;
             for (const auto& item : split_list(v)) c.online_mu.push_back(loc.real(l, k, item));
           }},
          {"online.levels",
           [&](int l, const std::string& k, const std::string& v) {
             c.online_levels.clear();
             if (v == "final") return;
             for (const auto& item : split_list(v)) c.online_levels.push_back(loc.u64(l, k, item));
           }},
          {"theory.enabled", [&](int l, const std::string& k, const std::string& v) { c.theory = loc.boolean(l, k, v); }},
          {"theory.delta", [&](int l, const std::string& k, const std::string& v) { c.theory_delta = loc.real(l, k, v); }},
          {"theory.probe_m",
           [&](int l, const std::string& k, const std::string& v) {
             c.probe_m.clear();
             for (const auto& item : split_list(v)) c.probe_m.push_back(loc.u64(l, k, item));
           }},
          {"theory.probe_kappa",
           [&](int l, const std::string& k, const std::string& v) {
             c.probe_kappa.clear();
             for (const auto& item : split_list(v)) c.probe_kappa.push_back(loc.real(l, k, item));
           }},
          {"theory.probe_trials", [&](int l, const std::string& k, const std::string& v) { c.probe_trials = loc.u64(l, k, v); }},
          {"theory.probe_seed", [&](int l, const std::string& k, const std::string& v) { c.probe_seed = loc.u64(l, k, v); }},
          {"theory.grid_points", [&](int l, const std::string& k, const std::string& v) { c.theory_grid_points = loc.u64(l, k, v); }},
          {"out", [&](int, const std::string&, const std::string& v) { c.out_dir = v; }},
          {"desk", [&](int l, const std::string& k, const std::string& v) { c.desk = loc.boolean(l, k, v); }},
      };

  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string text = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) loc.fail(line, "expected 'key = value', got '" + text + "'");
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end()) loc.fail(line, "unknown key '" + key + "'");
    if (seen.count(key)) loc.fail(line, "duplicate key '" + key + "' (first set on line " + std::to_string(seen[key]) + ")");
    if (value.empty()) loc.fail(line, key + " has an empty value");
    seen[key] = line;
    it->second(line, key, value);
  }

  const auto at = [&](const char* key) {
    const auto it = seen.find(key);
    return it == seen.end() ? 0 : it->second;
  };
  if (c.family != "tc1" && c.family != "tc2" && c.family != "heat2d")
    loc.fail(at("family"), "family must be tc1, tc2 or heat2d, got '" + c.family + "'");
  if (c.variants.empty()) loc.fail(at("variants"), "variants must name at least one of imc, hmc, shmc");
  if (!(c.gamma > 0.0 && c.gamma < 1.0)) loc.fail(at("gamma"), "gamma must be in (0,1)");
  if (c.m1 < 1) loc.fail(at("m1"), "m1 must be >= 1");
  if (c.m_ref < 2) loc.fail(at("m_ref"), "m_ref must be >= 2");
  if (!(c.epsilon > 0.0)) loc.fail(at("epsilon"), "epsilon must be > 0");
  if (c.max_iters < 1) loc.fail(at("max_iters"), "max_iters must be >= 1");
  if (c.retry_cap < 1) loc.fail(at("retry_cap"), "retry_cap must be >= 1");
  if (!(c.alpha > 1.0)) loc.fail(at("alpha"), "alpha must be > 1");
  if (c.trial_size < 1) loc.fail(at("trial_size"), "trial_size must be >= 1");
  if (!(c.fem_ellipticity_floor > 0.0)) loc.fail(at("fem.ellipticity_floor"), "fem.ellipticity_floor must be > 0");
  if (c.online_m_small < 2) loc.fail(at("online.m_small"), "online.m_small must be >= 2");
  for (std::size_t n : c.online_levels)
    if (n < 1) loc.fail(at("online.levels"), "online.levels entries must be >= 1");
  if (!(c.theory_delta > 0.0 && c.theory_delta < 1.0)) loc.fail(at("theory.delta"), "theory.delta must be in (0,1)");
  if (c.probe_m.empty()) loc.fail(at("theory.probe_m"), "theory.probe_m must be nonempty");
  for (std::size_t m : c.probe_m)
    if (m < 1) loc.fail(at("theory.probe_m"), "theory.probe_m entries must be >= 1");
  if (c.probe_kappa.empty()) loc.fail(at("theory.probe_kappa"), "theory.probe_kappa must be nonempty");
  for (double k : c.probe_kappa)
    if (!(k > 0.0)) loc.fail(at("theory.probe_kappa"), "theory.probe_kappa entries must be > 0");
  if (c.probe_trials < 100) loc.fail(at("theory.probe_trials"), "theory.probe_trials must be >= 100");
  if (c.theory_grid_points < 3) loc.fail(at("theory.grid_points"), "theory.grid_points must be >= 3");
  if (c.out_dir.empty()) loc.fail(at("out"), "out must be a nonempty path");

  const FamilySpec fam = make_family(c.family, 2, c.fem_ellipticity_floor);
  for (double mu : c.online_mu)
    if (!fam.eval_interval.contains(mu))
      loc.fail(at("online.mu"), "online.mu value " + format_real(mu) + " outside the evaluation interval of " + c.family);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  return parse_config(in, path);
}

std::string to_config_text(const ExperimentConfig& c) {
  std::ostringstream os;
  const auto u = [](std::size_t v) { return std::to_string(v); };
  const auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  os << "family = " << c.family << "\n";
  os << "variants = " << join(c.variants, [](Variant v) { return to_string(v); }) << "\n";
  os << "gamma = " << format_real(c.gamma) << "\n";
  os << "m1 = " << c.m1 << "\n";
  os << "m_ref = " << c.m_ref << "\n";
  os << "epsilon = " << format_real(c.epsilon) << "\n";
  os << "max_iters = " << c.max_iters << "\n";
  os << "retry_cap = " << c.retry_cap << "\n";
  os << "statistical_stop = " << b(c.statistical_stop) << "\n";
  os << "alpha = " << format_real(c.alpha) << "\n";
  os << "trial_size = " << c.trial_size << "\n";
  os << "trial_seed = " << c.trial_seed << "\n";
  os << "seed = " << c.seed << "\n";
  os << "fem.n_per_side = " << c.fem_n_per_side << "\n";
  os << "fem.ellipticity_floor = " << format_real(c.fem_ellipticity_floor) << "\n";
  os << "online.m_small = " << c.online_m_small << "\n";
  os << "online.mu = " << (c.online_mu.empty() ? std::string("trial") : join(c.online_mu, format_real)) << "\n";
  os << "online.levels = " << (c.online_levels.empty() ? std::string("final") : join(c.online_levels, u)) << "\n";
  os << "theory.enabled = " << b(c.theory) << "\n";
  os << "theory.delta = " << format_real(c.theory_delta) << "\n";
  os << "theory.probe_m = " << join(c.probe_m, u) << "\n";
  os << "theory.probe_kappa = " << join(c.probe_kappa, format_real) << "\n";
  os << "theory.probe_trials = " << c.probe_trials << "\n";
  os << "theory.probe_seed = " << c.probe_seed << "\n";
  os << "theory.grid_points = " << c.theory_grid_points << "\n";
  os << "out = " << c.out_dir << "\n";
  os << "desk = " << b(c.desk) << "\n";
  return os.str();
}

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const auto& p : kPresets) out.emplace_back(p.name);
  return out;
}

std::string preset_text(const std::string& name) {
  for (const auto& p : kPresets)
    if (name == p.name) return p.text;
  std::string known;
  for (const auto& p : kPresets) known += (known.empty() ? "" : ", ") + std::string(p.name);
  throw ConfigError("unknown preset '" + name + "' (known: " + known + ")");
}

ExperimentConfig load_preset(const std::string& name) {
  std::istringstream in(preset_text(name));
  return parse_config(in, "preset:" + name);
}

}  // namespace rbcv
