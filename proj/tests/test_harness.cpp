#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "nse/error.hpp"
#include "nse/exact_combinatorics.hpp"
#include "nse/harness.hpp"
#include "nse/parallel.hpp"

using namespace nse;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("nse_harness_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("sha256 known answer") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("config parse and format round trip") {
  std::istringstream in(
      "# comment\nscenario = GEVSweep\nn = 500\nreplications = 20\nseed = 7\noutput_dir = out/gev\n[params]\nxi = "
      "-2,0,0.5\n");
  const auto c = parse_config(in);
  CHECK(c.scenario == ScenarioType::GEVSweep);
  CHECK(c.n == 500);
  CHECK(c.replications == 20);
  CHECK(c.seed == 7);
  CHECK(c.params.at("xi") == "-2,0,0.5");
  std::istringstream again(format_config(c));
  const auto d = parse_config(again);
  CHECK(format_config(d) == format_config(c));
  CHECK_NOTHROW(validate(c));
}

TEST_CASE("config validation") {
  std::istringstream unknown_key("scenario = POT\ncolour = red\n");
  CHECK_THROWS_AS(parse_config(unknown_key), ConfigError);
  std::istringstream no_scenario("n = 3\n");
  CHECK_THROWS_AS(parse_config(no_scenario), ConfigError);
  std::istringstream bad_scenario("scenario = Table3\n");
  CHECK_THROWS_AS(parse_config(bad_scenario), ConfigError);

  ExperimentConfig c;
  c.scenario = ScenarioType::GEVSweep;
  c.n = 500;
  c.replications = 0;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c.replications = 2;
  c.params["alpha"] = "0.5";
  CHECK_THROWS_AS(validate(c), ConfigError);
  c.params = {{"xi", "a,b"}};
  CHECK_THROWS_AS(validate(c), ConfigError);
  c.params = {{"methods", "mle,bayes"}};
  CHECK_THROWS_AS(validate(c), ConfigError);
  c.scenario = ScenarioType::Table1_2;
  c.params = {{"errors", "exp,cauchy"}};
  CHECK_THROWS(validate(c));
  c.params = {{"null_reps", "100"}};
  CHECK_THROWS_AS(validate(c), ConfigError);
}

TEST_CASE("presets scale replications with a floor of 10") {
  CHECK(preset("table1", 0.2, 1, "x").replications == 20);
  CHECK(preset("table1", 0.2, 1, "x").n == 300);
  CHECK(preset("fig-gev", 0.2, 1, "x").replications == 20);
  CHECK(preset("fig-stable", 0.1, 1, "x").replications == 100);
  CHECK(preset("table1", 0.01, 1, "x").replications == 10);
  try {
    (void)preset("table9", 0.2, 1, "x");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("fig-gev") != std::string::npos);
  }
}

TEST_CASE("limit grid run") {
  ExperimentConfig c;
  c.scenario = ScenarioType::LimitDistGrid;
  c.replications = 1;
  c.params = {{"points", "5"}, {"t_min", "0.5"}, {"t_max", "2.5"}};
  c.output_dir = scratch("grid");
  const auto m = run(c);
  CHECK(m.all_checks_passed());
  const auto text = slurp(c.output_dir / "grid.csv");
  CHECK(text.find("\n2,1,0.375\n") != std::string::npos);
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::size_t ell;
    double t, v;
    char comma;
    std::istringstream ls(line);
    ls >> ell >> comma >> t >> comma >> v;
    CHECK(v == doctest::Approx(limit_left_cdf(ell, t)).epsilon(1e-11));
  }
  CHECK(fs::exists(c.output_dir / "manifest.json"));
  CHECK(m.outputs.size() == 1);
  CHECK(m.outputs[0].sha256 == sha256_file(c.output_dir / "grid.csv"));
  fs::remove_all(c.output_dir);
}

TEST_CASE("mrq asymptotics run with seeds on every row") {
  ExperimentConfig c;
  c.scenario = ScenarioType::MRQAsymptotics;
  c.n = 200;
  c.replications = 3000;
  c.seed = 3;
  c.output_dir = scratch("mrq");
  const auto m = run(c);
  CHECK(m.all_checks_passed());
  CHECK(m.replication_seeds.size() == 3000);
  const auto rows = slurp(c.output_dir / "quotients.csv");
  CHECK(rows.rfind("rep,seed,stream,q1,q2\n", 0) == 0);
  CHECK(rows.find("\n5,3," + std::to_string(stream_for(5, 0)) + ",") != std::string::npos);
  fs::remove_all(c.output_dir);
}

TEST_CASE("byte-identical outputs across worker counts") {
  ExperimentConfig c;
  c.scenario = ScenarioType::GEVSweep;
  c.n = 200;
  c.replications = 3;
  c.seed = 11;
  c.params = {{"xi", "-1,0.3"}, {"n_reference", "2"}, {"restarts", "2"}};
  std::vector<std::vector<OutputFile>> outs;
  for (std::size_t w : {1u, 3u}) {
    set_worker_count(w);
    c.output_dir = scratch("det" + std::to_string(w));
    const auto m = run(c);
    outs.push_back(m.outputs);
    fs::remove_all(c.output_dir);
  }
  set_worker_count(0);
  REQUIRE(outs[0].size() == outs[1].size());
  for (std::size_t i = 0; i < outs[0].size(); ++i) CHECK(outs[0][i].sha256 == outs[1][i].sha256);
}

TEST_CASE("a failing run leaves no outputs and names the replication") {
  ExperimentConfig c;
  c.scenario = ScenarioType::POT;
  c.n = 100;  // 5 exceedances at q = 0.95, below the minimum
  c.replications = 2;
  c.output_dir = scratch("fail");
  try {
    (void)run(c);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("replication 0") != std::string::npos);
  }
  CHECK((!fs::exists(c.output_dir) || fs::is_empty(c.output_dir)));
  fs::remove_all(c.output_dir);
}

TEST_CASE("manifest json") {
  ExperimentConfig c;
  c.scenario = ScenarioType::LimitDistGrid;
  c.replications = 1;
  c.params = {{"points", "3"}};
  c.output_dir = scratch("manifest");
  const auto m = run(c);
  const auto j = nlohmann::json::parse(slurp(c.output_dir / "manifest.json"));
  CHECK(j["version"] == std::string(kVersion));
  CHECK(j["csv_schema_version"] == kCsvSchemaVersion);
  CHECK(j["config"]["scenario"] == "LimitDistGrid");
  CHECK(j["config"]["effective_params"]["points"] == "3");
  CHECK(j["outputs"][0]["sha256"] == m.outputs[0].sha256);
  fs::remove_all(c.output_dir);
}
