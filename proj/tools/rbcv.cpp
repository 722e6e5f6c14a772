// rbcv: command-line front end.
//
//   rbcv run             --config <path> | --preset <name>  [--seed S] [--out DIR]
//   rbcv compare         --config <path>... | --preset <name>  [--seed S] [--out DIR]
//   rbcv online          --basis <basis.json> [--mu a,b,..] [--level n,..] [--out DIR]
//   rbcv validate-theory --config <path> | --preset <name>  [--seed S] [--out DIR]
//   rbcv mesh-dump       [--config <path> | --preset <name> | --n-per-side N] [--out DIR]

#include "rbcv/config.hpp"
#include "rbcv/error.hpp"
#include "rbcv/experiment.hpp"
#include "rbcv/fem2d.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace rbcv;

namespace {

struct Common {
  std::vector<std::string> configs;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* app, Common& c, bool many_configs = false) {
  if (many_configs)
    app->add_option("--config", c.configs, "Experiment config file(s) or manifest.json");
  else
    app->add_option("--config", c.configs, "Experiment config file or manifest.json")->expected(1);
  app->add_option("--preset", c.preset, "Built-in preset <tc1|tc2|heat2d>-<desk|paper>");
  app->add_option("--seed", c.seed, "Override the master seed");
  app->add_option("--out", c.out, "Output directory (overrides the config)");
}

ExperimentConfig load_any(const std::string& path) {
  if (fs::path(path).extension() == ".json") {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open manifest");
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path + ": " + e.what());
    }
    if (!j.contains("config") || !j["config"].is_string())
      throw ConfigError(path + ": manifest has no config entry");
    std::istringstream cfg(j["config"].get<std::string>());
    return parse_config(cfg, path + "#config");
  }
  return load_config(path);
}

std::vector<ExperimentConfig> resolve(const Common& c) {
  if (c.configs.empty() == c.preset.empty())
    throw ConfigError("give exactly one of --config or --preset");
  std::vector<ExperimentConfig> out;
  if (!c.preset.empty()) out.push_back(load_preset(c.preset));
  for (const auto& p : c.configs) out.push_back(load_any(p));
  for (auto& cfg : out) {
    if (c.seed) cfg.seed = *c.seed;
    if (!c.out.empty()) cfg.out_dir = c.out;
  }
  return out;
}

void report_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

void report_files(const std::string& dir, const std::vector<std::string>& files) {
  for (const auto& f : files) std::cout << (fs::path(dir) / f).string() << "\n";
}

int cmd_run(const Common& c) {
  const auto cfg = resolve(c).front();
  if (!cfg.desk) std::cerr << "note: paper-scale configuration, expect a long run\n";
  const ExperimentResult result = run_experiment(cfg);
  report_warnings(result.warnings);
  report_files(cfg.out_dir, write_experiment(result, cfg.out_dir, "run"));
  return 0;
}

int cmd_compare(const Common& c) {
  const auto cfgs = resolve(c);
  if (cfgs.size() == 1) {
    if (cfgs.front().variants.size() < 2)
      throw ConfigError("compare: config must request at least two variants");
    const ExperimentResult result = run_experiment(cfgs.front());
    report_warnings(result.warnings);
    report_files(cfgs.front().out_dir, write_experiment(result, cfgs.front().out_dir, "compare"));
    return 0;
  }
  std::vector<GreedyTrace> traces;
  std::vector<double> trial;
  std::vector<std::string> warnings;
  for (const auto& cfg : cfgs) {
    for (Variant v : cfg.variants) {
      VariantRun run = run_variant(cfg, v);
      if (run.result.trace.truncated)
        warnings.push_back(to_string(v) + ": truncated (" + run.result.trace.terminated_reason + ")");
      traces.push_back(run.result.trace);
      trial = run.trial_params;
    }
  }
  check_comparable(traces);
  const std::string dir = cfgs.front().out_dir;
  fs::create_directories(dir);
  std::ofstream cmp(fs::path(dir) / "compare.csv");
  write_compare_csv(cmp, traces);
  std::ofstream tr(fs::path(dir) / "trace.csv");
  write_trace_csv(tr, traces);
  report_warnings(warnings);
  report_files(dir, {"compare.csv", "trace.csv"});
  return 0;
}

int cmd_online(const std::string& basis_path, const std::vector<double>& mus_in,
               const std::vector<std::size_t>& levels, std::string out) {
  const SavedBasis basis = load_saved_basis(basis_path);
  std::vector<double> mus = mus_in;
  const FamilySpec family = make_family(basis.family, 2, basis.fem_ellipticity_floor);
  if (mus.empty()) {
    for (int i = 0; i <= 10; ++i)
      mus.push_back(family.parameter_domain.lo +
                    (family.parameter_domain.hi - family.parameter_domain.lo) * i / 10.0);
  }
  for (double mu : mus)
    if (!family.eval_interval.contains(mu))
      throw ConfigError("--mu " + format_number(mu) + " outside the evaluation interval of " + basis.family);
  std::vector<std::string> warnings;
  const auto rows = online_table(basis, mus, levels, &warnings);
  report_warnings(warnings);
  if (out.empty()) out = fs::path(basis_path).parent_path().string();
  if (out.empty()) out = ".";
  fs::create_directories(out);
  const std::string name = "online_" + to_string(basis.variant) + ".csv";
  std::ofstream os(fs::path(out) / name);
  write_online_csv(os, rows);
  report_files(out, {name});
  return 0;
}

int cmd_validate_theory(const Common& c) {
  const auto cfg = resolve(c).front();
  const TheoryOutcome t = validate_theory(cfg);
  report_warnings(t.notes);
  auto files = write_theory(t, cfg, cfg.out_dir);
  std::ofstream(fs::path(cfg.out_dir) / "config.resolved") << to_config_text(cfg);
  files.emplace_back("config.resolved");
  report_files(cfg.out_dir, files);
  return 0;
}

int cmd_mesh_dump(const Common& c, std::optional<int> n_per_side) {
  int n = 16;
  std::string out = c.out.empty() ? "out/mesh" : c.out;
  if (!c.configs.empty() || !c.preset.empty()) {
    const auto cfg = resolve(c).front();
    n = cfg.fem_n_per_side;
    if (c.out.empty()) out = cfg.out_dir;
  }
  if (n_per_side) n = *n_per_side;
  const fem::TriMesh mesh = fem::build_mesh(n);
  fs::create_directories(out);
  std::ofstream v(fs::path(out) / "mesh_vertices.csv");
  std::ofstream t(fs::path(out) / "mesh_triangles.csv");
  fem::write_mesh_csv(mesh, v, t);
  const fem::Point q = mesh.centroid(mesh.qoi_triangle);
  std::cerr << "n_per_side=" << n << " vertices=" << mesh.vertices.size()
            << " triangles=" << mesh.triangles.size() << " qoi_triangle=" << mesh.qoi_triangle
            << " centroid=(" << q.x << "," << q.y << ")\n";
  report_files(out, {"mesh_vertices.csv", "mesh_triangles.csv"});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte-Carlo greedy control variates"};
  app.require_subcommand(1);

  Common run_c, cmp_c, th_c, mesh_c;
  auto* run = app.add_subcommand("run", "Run the configured greedy variants and online phase");
  add_common(run, run_c);
  auto* cmp = app.add_subcommand("compare", "Per-n theta/beta table across variants");
  add_common(cmp, cmp_c, true);

  auto* online = app.add_subcommand("online", "Online estimates from a saved basis");
  std::string basis_path;
  std::vector<double> mus;
  std::vector<std::size_t> levels;
  std::string online_out;
  online->add_option("--basis", basis_path, "basis_<variant>.json from a run")->required();
  online->add_option("--mu", mus, "Query parameters")->delimiter(',');
  online->add_option("--level", levels, "Basis sizes to use (default: all snapshots)")->delimiter(',');
  online->add_option("--out", online_out, "Output directory (default: next to the basis)");

  auto* theory = app.add_subcommand("validate-theory", "Sample-count bounds and concentration probe");
  add_common(theory, th_c);

  auto* mesh = app.add_subcommand("mesh-dump", "Write the heat2d mesh as CSV");
  add_common(mesh, mesh_c);
  std::optional<int> n_per_side;
  mesh->add_option("--n-per-side", n_per_side, "Cells per side")->check(CLI::Range(2, 4096));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*run) return cmd_run(run_c);
    if (*cmp) return cmd_compare(cmp_c);
    if (*online) return cmd_online(basis_path, mus, levels, online_out);
    if (*theory) return cmd_validate_theory(th_c);
    if (*mesh) return cmd_mesh_dump(mesh_c, n_per_side);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
