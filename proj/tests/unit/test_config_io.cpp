#include <doctest.h>

#include "rbcv/config.hpp"
#include "rbcv/error.hpp"
#include "rbcv/experiment.hpp"
#include "rbcv/io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace rbcv;

namespace {

ExperimentConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in, "t.cfg");
}

std::string config_error(const std::string& text) {
  try {
    parse(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

std::string golden(const std::string& name) { return std::string(RBCV_SOURCE_DIR) + "/tests/golden/" + name; }

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::vector<GreedyTrace> traces_of(const ExperimentResult& r) {
  std::vector<GreedyTrace> out;
  for (const auto& run : r.runs) out.push_back(run.result.trace);
  return out;
}

std::string trace_text(const ExperimentResult& r) {
  std::ostringstream os;
  write_trace_csv(os, traces_of(r));
  return os.str();
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("parse_config examples") {
  const ExperimentConfig c = parse("# comment\nfamily = tc2\n\nvariants = imc, shmc\ngamma = 0.75\nm_ref = 5000\n");
  CHECK(c.family == "tc2");
  REQUIRE(c.variants.size() == 2);
  CHECK(c.variants[0] == Variant::IMC);
  CHECK(c.variants[1] == Variant::SHMC);
  CHECK(c.gamma == 0.75);
  CHECK(c.m_ref == 5000);
  CHECK(c.m1 == 10);
  CHECK(c.online_mu.empty());

  CHECK(config_error("family = tc1\nvariants = hmc\ngamma = 1.2\n") == "t.cfg:3: gamma must be in (0,1)");
  CHECK(config_error("family = tc1\nsmoothing = 3\n").find("t.cfg:2: unknown key 'smoothing'") == 0);
  CHECK(config_error("gamma = 0.5\ngamma = 0.6\n").find("t.cfg:2: duplicate key 'gamma'") == 0);
  CHECK(config_error("m_ref = lots\n").find("t.cfg:1: m_ref") == 0);
  CHECK(config_error("statistical_stop = maybe\n").find("t.cfg:1:") == 0);
  CHECK(config_error("variants = hmc, hmc\n").find("t.cfg:1:") == 0);
  CHECK(config_error("family = tc1\nonline.mu = 4.5\n").find("t.cfg:2: online.mu") == 0);
  CHECK(config_error("just text\n").find("t.cfg:1: expected") == 0);
  CHECK_THROWS_AS(load_config(golden("missing.cfg")), ConfigError);
}

TEST_CASE("bad_gamma golden names the file, line and field") {
  try {
    load_config(golden("bad_gamma.cfg"));
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("bad_gamma.cfg:3: gamma") != std::string::npos);
  }
}

TEST_CASE("resolved config text round-trips") {
  ExperimentConfig c = parse("family = heat2d\nvariants = shmc, imc\ngamma = 0.3\nonline.mu = 1, 2.5\nonline.levels = 1,3\n"
                             "fem.n_per_side = 12\ntheory.probe_kappa = 0.125, 0.5\nseed = 18446744073709551615\n");
  const std::string text = to_config_text(c);
  const ExperimentConfig back = parse(text);
  CHECK(to_config_text(back) == text);
  CHECK(back.seed == 18446744073709551615ull);
  CHECK(back.online_mu == std::vector<double>{1.0, 2.5});
  CHECK(back.fem_n_per_side == 12);
  CHECK(to_config_text(parse("")) == to_config_text(ExperimentConfig{}));
}

TEST_CASE("every preset parses and round-trips") {
  const auto names = preset_names();
  CHECK(names.size() == 6);
  for (const auto& name : names) {
    const ExperimentConfig c = load_preset(name);
    CHECK(to_config_text(parse(to_config_text(c))) == to_config_text(c));
    CHECK(c.family == name.substr(0, name.find('-')));
    CHECK(c.desk == (name.find("desk") != std::string::npos));
  }
  CHECK_THROWS_AS(load_preset("tc3-desk"), ConfigError);
}

TEST_CASE("csv headers") {
  CHECK(std::string(kTraceHeader) == "variant,n,kind,mu,M,R,theta_mu,theta_sup,beta_mu,beta_sup,stream_id");
  CHECK(std::string(kProfilesHeader) == "variant,n,mu,theta,beta");
  CHECK(std::string(kOnlineHeader) ==
        "variant,n,mu,estimate,ref_mean,e_n,M_MC,M_n,small_stream,residual_var,ref_var,lambda");
  CHECK(std::string(kBoundsHeader) == "n,sigma_hat_sq,kappa,phi_kappa,delta_n,M_lower_bound,vacuous,M_heuristic,ratio");
  CHECK(std::string(kProbeHeader) == "M,kappa,trials,frequency");
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(1.0 / 0.0) == "inf");
  CHECK(std::stod(format_number(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("small tc1 experiment") {
  const ExperimentConfig c = load_config(golden("tc1_small.cfg"));
  const ExperimentResult r = run_experiment(c);
  REQUIRE(r.runs.size() == 3);

  SUBCASE("trace matches the golden file") {
    CHECK(trace_text(r) == slurp(golden("tc1_small_trace.csv")));
  }
  SUBCASE("one trace row per acceptance and per retry") {
    std::size_t expected = 1;
    for (const auto& run : r.runs) expected += run.result.trace.records.size() + run.result.trace.total_retries();
    CHECK(count_lines(trace_text(r)) == expected);
    for (const auto& run : r.runs) CHECK(run.result.trace.records.size() == 6);
  }
  SUBCASE("rerun is identical") {
    CHECK(trace_text(run_experiment(c)) == trace_text(r));
  }
  SUBCASE("online table covers every level, variant and trial parameter") {
    CHECK(r.online.size() == 3 * 2 * 20);
    std::ostringstream os;
    write_online_csv(os, r.online);
    CHECK(count_lines(os.str()) == r.online.size() + 1);
  }
  SUBCASE("compare refuses mismatched trial sets") {
    auto traces = traces_of(r);
    CHECK_NOTHROW(check_comparable(traces));
    traces[1].trial_seed += 1;
    CHECK_THROWS_AS(check_comparable(traces), ConfigError);
    traces = traces_of(r);
    traces[2].m_ref = 10;
    CHECK_THROWS_AS(check_comparable(traces), ConfigError);
  }
  SUBCASE("IMC has only theta columns in the comparison") {
    std::ostringstream os;
    write_compare_csv(os, traces_of(r));
    const std::string header = os.str().substr(0, os.str().find('\n'));
    CHECK(header ==
          "n,theta_mu_hmc,theta_sup_hmc,beta_mu_hmc,beta_sup_hmc,M_hmc,theta_mu_shmc,theta_sup_shmc,beta_mu_shmc,"
          "beta_sup_shmc,M_shmc,theta_mu_imc,theta_sup_imc");
    CHECK(count_lines(os.str()) == 7);
  }
  SUBCASE("saved basis json round-trips") {
    for (const auto& run : r.runs) {
      const SavedBasis b = saved_basis(c, run);
      const std::string dumped = to_json(b).dump();
      const SavedBasis back = saved_basis_from_json(nlohmann::json::parse(dumped));
      CHECK(to_json(back).dump() == dumped);
      CHECK(back.snapshot_params == b.snapshot_params);
      CHECK(back.ref_means == b.ref_means);
      CHECK(back.coeffs == b.coeffs);
      CHECK(back.small_batches == b.small_batches);
      const OnlineContext a = online_context(b, 3);
      const OnlineContext z = online_context(back, 3);
      CHECK(online_query(a, 1.25).estimate == online_query(z, 1.25).estimate);
    }
    CHECK_THROWS(saved_basis_from_json(nlohmann::json::parse("{\"variant\": \"hmc\"}")));
  }
}
