#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "helpers.hpp"
#include "odebn/error.hpp"
#include "odebn/pipeline.hpp"

using namespace odebn;
namespace fs = std::filesystem;

namespace {

nlohmann::json small_lv_config(const std::string& out_dir) {
  nlohmann::json j = nlohmann::json::parse(R"({
    "grid": {"t_start": 0.0, "t_end": 0.5, "dt": 0.01},
    "filter": {"n_particles": 300, "resample_threshold": 0.5, "seed": 42},
    "truth": {"source": "generate_rk4"},
    "true_params": {"a": 2.0, "b": 1.0, "c": 4.0, "d": 1.0},
    "evidence": {
      "source": "sample",
      "schedule": {"kind": "uniform_random", "n": 5, "seed": 3,
                   "variables": ["X"]},
      "noise_sd": 0.0
    }
  })");
  j["model_path"] = testutil::model_path("lotka.ode");
  j["output_dir"] = out_dir;
  return j;
}

RunConfig write_and_load(const std::string& dir, const nlohmann::json& j) {
  std::string path = dir + "/run.json";
  testutil::spit(path, j.dump(2));
  return load_run_config(path);
}

int run_cli(const std::string& args) {
  std::string cmd = std::string(ODEBN_CLI_PATH) + " " + args;
  int status = std::system(cmd.c_str());
  if (status < 0) return -1;
  return (status >> 8) & 0xff;
}

}  // namespace

TEST_CASE("simulate writes a fine reference trajectory") {
  std::string dir = testutil::work_dir("pipe_sim");
  RunConfig cfg = write_and_load(dir, small_lv_config(dir + "/out"));
  SimulateOutcome out = cmd_simulate(cfg);
  CHECK(out.truth_path == dir + "/out/truth.csv");
  REQUIRE(fs::exists(out.truth_path));
  Trajectory t = read_trajectory_csv(out.truth_path);
  // ten times finer than the filter grid: 0.001 steps over [0, 0.5]
  CHECK(t.n_rows() == 501);
  CHECK(t.variable_names == std::vector<std::string>{"X", "Y"});
  CHECK(t.at(0, 0) == 5.0);
  CHECK(t.at(0, 1) == 3.0);
}

TEST_CASE("filter writes result, metrics, and sampled evidence") {
  std::string dir = testutil::work_dir("pipe_filter");
  RunConfig cfg = write_and_load(dir, small_lv_config(dir + "/out"));
  FilterOutcome out = cmd_filter(cfg);

  REQUIRE(fs::exists(out.result_path));
  REQUIRE(fs::exists(out.metrics_path));
  REQUIRE(fs::exists(out.evidence_path));

  Trajectory result = read_trajectory_csv(out.result_path);
  CHECK(result.variable_names ==
        std::vector<std::string>{"X_mean", "X_sd", "Y_mean", "Y_sd",
                                 "a_mean", "a_sd", "b_mean", "b_sd",
                                 "c_mean", "c_sd", "d_mean", "d_sd", "ess"});
  CHECK(result.n_rows() == 51);

  EvidenceStream ev = read_evidence_csv(out.evidence_path);
  CHECK(ev.points.size() == 5);

  std::vector<MetricReport> metrics = read_metrics_json(out.metrics_path);
  REQUIRE(metrics.size() == 2);
  CHECK(metrics[0].variable == "X");
  CHECK(metrics[1].variable == "Y");
  CHECK(metrics[0].rmse >= 0.0);
  CHECK(metrics[0].n_points == 51);
}

TEST_CASE("identical configs give byte identical outputs") {
  std::string dir = testutil::work_dir("pipe_repeat");
  RunConfig cfg1 = write_and_load(dir, small_lv_config(dir + "/out1"));
  cmd_filter(cfg1);
  std::string dir2 = dir;  // same config content, different output dir
  RunConfig cfg2 = write_and_load(dir2, small_lv_config(dir + "/out2"));
  cmd_filter(cfg2);
  CHECK(testutil::slurp(dir + "/out1/result.csv") ==
        testutil::slurp(dir + "/out2/result.csv"));
  CHECK(testutil::slurp(dir + "/out1/evidence.csv") ==
        testutil::slurp(dir + "/out2/evidence.csv"));
  CHECK(testutil::slurp(dir + "/out1/metrics.json") ==
        testutil::slurp(dir + "/out2/metrics.json"));
}

TEST_CASE("evidence outside the grid span fails validation") {
  std::string dir = testutil::work_dir("pipe_outside");
  nlohmann::json j = small_lv_config(dir + "/out");
  j["evidence"]["schedule"] = {{"kind", "explicit"},
                               {"times", {0.1, 3.0}},
                               {"variables", {"X"}}};
  RunConfig cfg = write_and_load(dir, j);
  try {
    cmd_filter(cfg);
    FAIL("expected a validation error");
  } catch (const Error& err) {
    CHECK(err.kind() == ErrorKind::Validation);
    CHECK(err.exit_code() == 2);
  }
}

TEST_CASE("file sourced truth must cover the model variables") {
  std::string dir = testutil::work_dir("pipe_truthfile");
  nlohmann::json j = small_lv_config(dir + "/out");
  j["truth"] = {{"source", "file"}, {"path", "truth.csv"}};
  testutil::spit(dir + "/truth.csv", "t,X\n0,5\n0.5,4\n");
  RunConfig cfg = write_and_load(dir, j);
  try {
    cmd_filter(cfg);
    FAIL("expected a validation error");
  } catch (const Error& err) {
    CHECK(std::string(err.what()).find("'Y'") != std::string::npos);
  }

  testutil::spit(dir + "/truth.csv", "t,X,Y\n0,5,3\n0.25,4,2.5\n0.5,4,2\n");
  cfg = write_and_load(dir, j);
  FilterOutcome out = cmd_filter(cfg);
  CHECK(out.truth.n_rows() == 3);
}

TEST_CASE("plot renders a variable with and without evidence") {
  std::string dir = testutil::work_dir("pipe_plot");
  RunConfig cfg = write_and_load(dir, small_lv_config(dir + "/out"));
  cmd_simulate(cfg);
  FilterOutcome out = cmd_filter(cfg);

  std::string svg_path = dir + "/x.svg";
  cmd_plot(out.result_path, dir + "/out/truth.csv", out.evidence_path, "X",
           svg_path);
  std::string svg = testutil::slurp(svg_path);
  CHECK(svg.find("<svg") == 0);
  CHECK(svg.find(">X<") != std::string::npos);
  CHECK(svg.find("<circle") != std::string::npos);

  std::string svg2_path = dir + "/y.svg";
  cmd_plot(out.result_path, dir + "/out/truth.csv", "", "Y", svg2_path);
  std::string svg2 = testutil::slurp(svg2_path);
  CHECK(svg2.find(">Y<") != std::string::npos);
  CHECK(svg2.find("<circle") == std::string::npos);

  try {
    cmd_plot(out.result_path, dir + "/out/truth.csv", "", "Z",
             dir + "/z.svg");
    FAIL("expected a validation error");
  } catch (const Error& err) {
    CHECK(std::string(err.what()).find("'Z'") != std::string::npos);
  }
}

TEST_CASE("validate prints the network structure") {
  std::ostringstream os;
  cmd_validate(testutil::model_path("lotka.ode"), os);
  std::string text = os.str();
  CHECK(text.find("model 'lotka_volterra': ok") != std::string::npos);
  CHECK(text.find("variables: 2, parameters: 4") != std::string::npos);
  CHECK(text.find("variable X <- {X, Y, a, b}") != std::string::npos);
  CHECK(text.find("variable Y <- {X, Y, c, d}") != std::string::npos);
  CHECK(text.find("parameter a <- {a}") != std::string::npos);
  CHECK(text.find("observation of X (noise_sd 0.06)") != std::string::npos);
}

TEST_CASE("missing input series paths are reported") {
  std::string dir = testutil::work_dir("pipe_inputs");
  nlohmann::json j = small_lv_config(dir + "/out");
  j["model_path"] = testutil::model_path("pif45.ode");
  j["true_params"] = {{"s", 1.0}, {"K_d", 0.56}, {"h", 2.0}, {"d", 0.5}};
  j["evidence"]["schedule"]["variables"] = {"PIF"};
  RunConfig cfg = write_and_load(dir, j);
  try {
    cmd_filter(cfg);
    FAIL("expected a validation error");
  } catch (const Error& err) {
    CHECK(std::string(err.what()).find("inputs") != std::string::npos);
  }
}

TEST_CASE("true params must pin every model parameter") {
  std::string dir = testutil::work_dir("pipe_params");
  nlohmann::json j = small_lv_config(dir + "/out");
  j["true_params"] = {{"a", 2.0}, {"b", 1.0}, {"c", 4.0}};
  RunConfig cfg = write_and_load(dir, j);
  try {
    cmd_filter(cfg);
    FAIL("expected a validation error");
  } catch (const Error& err) {
    CHECK(std::string(err.what()).find("'d'") != std::string::npos);
  }
  j["true_params"]["d"] = 1.0;
  j["true_params"]["zeta"] = 1.0;
  cfg = write_and_load(dir, j);
  try {
    cmd_filter(cfg);
    FAIL("expected a validation error");
  } catch (const Error& err) {
    CHECK(std::string(err.what()).find("'zeta'") != std::string::npos);
  }
}

TEST_CASE("cli exit codes distinguish the failure families") {
  std::string dir = testutil::work_dir("pipe_cli");
  std::string null = " > /dev/null 2>&1";

  CHECK(run_cli("validate " + testutil::model_path("lotka.ode") + null) == 0);
  CHECK(run_cli("--help" + null) == 0);

  // io failure: missing file
  CHECK(run_cli("validate " + dir + "/nope.ode" + null) == 4);

  // validation failure: malformed model
  testutil::spit(dir + "/bad.ode", "var X = 1\n");
  CHECK(run_cli("validate " + dir + "/bad.ode" + null) == 2);

  // usage errors
  CHECK(run_cli(null) == 2);
  CHECK(run_cli("frobnicate" + null) == 2);
  CHECK(run_cli("plot --result only" + null) == 2);

  // numeric failure: the reference integration diverges
  nlohmann::json j = small_lv_config(dir + "/out");
  testutil::spit(dir + "/blowup.ode", "var X = 1\neq dX/dt = X*X\n");
  j["model_path"] = dir + "/blowup.ode";
  j["grid"] = {{"t_start", 0.0}, {"t_end", 10.0}, {"dt", 0.5}};
  j["true_params"] = nlohmann::json::object();
  testutil::spit(dir + "/blow.json", j.dump());
  CHECK(run_cli("simulate --config " + dir + "/blow.json" + null) == 3);

  // a clean end to end run through the binary
  nlohmann::json ok = small_lv_config(dir + "/cli_out");
  testutil::spit(dir + "/ok.json", ok.dump());
  CHECK(run_cli("filter --config " + dir + "/ok.json" + null) == 0);
  CHECK(fs::exists(dir + "/cli_out/result.csv"));
  CHECK(run_cli("simulate --config " + dir + "/ok.json" + null) == 0);
  CHECK(run_cli("plot --result " + dir + "/cli_out/result.csv" +
                " --truth " + dir + "/cli_out/truth.csv" +
                " --evidence " + dir + "/cli_out/evidence.csv" +
                " --var X --out " + dir + "/cli_out/x.svg" + null) == 0);
  CHECK(fs::exists(dir + "/cli_out/x.svg"));
}
