// Python bindings: presets, config resolution, experiment runs and a few kernels.
#include "rbcv/config.hpp"
#include "rbcv/error.hpp"
#include "rbcv/experiment.hpp"
#include "rbcv/families.hpp"
#include "rbcv/fem2d.hpp"
#include "rbcv/theory.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <sstream>

namespace py = pybind11;
using namespace rbcv;

namespace {

ExperimentConfig config_from(const std::string& text, const std::string& name) {
  std::istringstream in(text);
  return parse_config(in, name);
}

py::dict trace_dict(const VariantRun& run) {
  const GreedyTrace& t = run.result.trace;
  py::list records;
  for (const auto& r : t.records) {
    py::dict d;
    d["n"] = r.n;
    d["mu"] = r.mu;
    d["M"] = r.m;
    d["theta_mu"] = r.theta_mu;
    d["theta_sup"] = r.theta_sup;
    d["beta_mu"] = r.beta_mu ? py::cast(*r.beta_mu) : py::none();
    d["ratio"] = r.ratio ? py::cast(*r.ratio) : py::none();
    d["retries"] = r.retries.size();
    records.append(d);
  }
  py::dict out;
  out["variant"] = to_string(run.variant);
  out["records"] = records;
  out["terminated_reason"] = t.terminated_reason;
  out["truncated"] = t.truncated;
  out["snapshot_params"] = run.result.basis.snapshot_params;
  return out;
}

py::dict run_config(const ExperimentConfig& cfg) {
  ExperimentResult r;
  {
    py::gil_scoped_release release;
    r = run_experiment(cfg);
  }
  py::list runs;
  for (const auto& v : r.runs) runs.append(trace_dict(v));
  py::list online;
  for (const auto& row : r.online) {
    py::dict d;
    d["variant"] = to_string(row.variant);
    d["n"] = row.n;
    d["mu"] = row.row.mu;
    d["estimate"] = row.row.estimate;
    d["ref_mean"] = row.row.ref_mean;
    d["e_n"] = row.row.rel_error ? py::cast(*row.row.rel_error) : py::none();
    d["M_MC"] = row.row.m_mc;
    online.append(d);
  }
  py::dict out;
  out["config"] = to_config_text(r.config);
  out["runs"] = runs;
  out["online"] = online;
  out["warnings"] = r.warnings;
  return out;
}

}  // namespace

PYBIND11_MODULE(rbcv, m) {
  m.doc() = "Greedy reduced-basis control variates for Monte Carlo estimation";

  static py::exception<Error> base(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError&) {
      throw;
    } catch (const DomainError&) {
      throw;
    } catch (const Error& e) {
      base(e.what());
    }
  });

  m.def("presets", &preset_names, "Names of the built-in presets.");
  m.def("preset_text", &preset_text, py::arg("name"));
  m.def(
      "resolve_config", [](const std::string& text) { return to_config_text(config_from(text, "<string>")); },
      py::arg("text"), "Parse a config and return its fully resolved text.");
  m.def(
      "run", [](const std::string& text) { return run_config(config_from(text, "<string>")); }, py::arg("config_text"),
      "Run every configured variant and the online table.");
  m.def(
      "run_preset",
      [](const std::string& name, std::optional<std::uint64_t> seed) {
        ExperimentConfig c = load_preset(name);
        if (seed) c.seed = *seed;
        return run_config(c);
      },
      py::arg("name"), py::arg("seed") = py::none());

  m.def("testcase1_f", py::vectorize(testcase1_f), py::arg("x"));
  m.def("testcase2_f", py::vectorize(testcase2_f), py::arg("mu"), py::arg("x"));
  m.def("phi", &theory::phi, py::arg("kappa"), py::arg("d") = 1, py::arg("alpha") = 2.0);
  m.def(
      "wasserstein1_uniform",
      [](std::vector<double> x, double lo, double hi) {
        std::sort(x.begin(), x.end());
        return theory::wasserstein1_1d(x, Marginal::uniform(lo, hi));
      },
      py::arg("samples"), py::arg("lo") = 0.0, py::arg("hi") = 1.0);
  m.def(
      "heat2d_qoi",
      [](int n_per_side, double mu, double z1, double z2) {
        return fem::FemContext(n_per_side).quantity_of_interest(mu, {z1, z2});
      },
      py::arg("n_per_side"), py::arg("mu"), py::arg("z1"), py::arg("z2"));
}
