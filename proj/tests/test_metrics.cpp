#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "helpers.hpp"
#include "odebn/error.hpp"
#include "odebn/metrics.hpp"
#include "odebn/random.hpp"
#include "odebn/trajectory.hpp"

using namespace odebn;

TEST_CASE("identical series give zero error") {
  MetricReport r = compute_metrics("X", {1.0, 2.0, 3.0}, {1.0, 2.0, 3.0});
  CHECK(r.rmse == 0.0);
  CHECK(r.mae == 0.0);
  CHECK(r.n_points == 3);
}

TEST_CASE("hand computed residuals") {
  MetricReport r = compute_metrics("X", {1.0, 4.0}, {1.0, 2.0});
  CHECK(r.mae == Catch::Approx(1.0).margin(1e-12));
  CHECK(r.rmse == Catch::Approx(std::sqrt(2.0)).margin(1e-12));
}

TEST_CASE("constant offset collapses both metrics to the offset") {
  for (double c : {0.5, -1.25, 3e-7}) {
    std::vector<double> ref = {0.1, 1.7, -2.3, 5.0};
    std::vector<double> est = ref;
    for (double& v : est) v += c;
    MetricReport r = compute_metrics("X", ref, est);
    CHECK(r.rmse == Catch::Approx(std::fabs(c)).margin(1e-12));
    CHECK(r.mae == Catch::Approx(std::fabs(c)).margin(1e-12));
  }
}

TEST_CASE("mae never exceeds rmse") {
  RandomStream rs(12, stream_purpose::kGeneric, 0, 0);
  for (int trial = 0; trial < 1000; ++trial) {
    std::size_t n = 1 + static_cast<std::size_t>(rs.uniform() * 20);
    std::vector<double> ref(n), est(n);
    for (std::size_t i = 0; i < n; ++i) {
      ref[i] = 10.0 * (rs.uniform() - 0.5);
      est[i] = 10.0 * (rs.uniform() - 0.5);
    }
    MetricReport r = compute_metrics("X", ref, est);
    REQUIRE(r.mae <= r.rmse * (1.0 + 1e-12));
  }
}

TEST_CASE("scaling both series scales both metrics") {
  std::vector<double> ref = {0.1, 1.7, -2.3, 5.0};
  std::vector<double> est = {0.3, 1.1, -2.0, 4.2};
  MetricReport base = compute_metrics("X", ref, est);
  double lambda = -2.5;
  std::vector<double> ref2 = ref, est2 = est;
  for (double& v : ref2) v *= lambda;
  for (double& v : est2) v *= lambda;
  MetricReport scaled = compute_metrics("X", ref2, est2);
  CHECK(scaled.rmse == Catch::Approx(std::fabs(lambda) * base.rmse)
                           .epsilon(1e-12));
  CHECK(scaled.mae == Catch::Approx(std::fabs(lambda) * base.mae)
                          .epsilon(1e-12));
}

namespace {

Trajectory line(double slope, const char* name) {
  Trajectory t;
  t.variable_names = {name};
  t.times = {0.0, 1.0, 2.0};
  t.values = {0.0, slope, 2.0 * slope};
  return t;
}

}  // namespace

TEST_CASE("trajectory comparison interpolates both sides") {
  Trajectory pred = line(1.0, "X");
  Trajectory truth = line(2.0, "X");
  std::vector<double> times = {0.5, 1.0, 1.5};
  MetricReport r = compute_metrics(pred, truth, "X", times);
  // residuals are -0.5, -1.0, -1.5
  CHECK(r.mae == Catch::Approx(1.0).margin(1e-12));
  CHECK(r.rmse == Catch::Approx(std::sqrt((0.25 + 1.0 + 2.25) / 3.0))
                      .margin(1e-12));
  CHECK(r.eval_times == times);
}

TEST_CASE("evaluation order does not change the metrics") {
  Trajectory pred = line(1.0, "X");
  Trajectory truth = line(2.0, "X");
  std::vector<double> fwd = {0.2, 0.9, 1.4, 1.9};
  std::vector<double> rev = fwd;
  std::reverse(rev.begin(), rev.end());
  MetricReport a = compute_metrics(pred, truth, "X", fwd);
  MetricReport b = compute_metrics(pred, truth, "X", rev);
  CHECK(a.rmse == Catch::Approx(b.rmse).epsilon(1e-15));
  CHECK(a.mae == Catch::Approx(b.mae).epsilon(1e-15));
}

TEST_CASE("metrics argument validation") {
  CHECK_THROWS_AS(compute_metrics("X", {1.0}, {1.0, 2.0}), Error);
  CHECK_THROWS_AS(compute_metrics("X", {}, {}), Error);
  Trajectory pred = line(1.0, "X");
  Trajectory truth = line(2.0, "Y");
  CHECK_THROWS_AS(compute_metrics(pred, truth, "X", {0.5}), Error);
  CHECK_THROWS_AS(compute_metrics(pred, truth, "Y", std::vector<double>{}),
                  Error);
}

TEST_CASE("non-finite residuals raise a numeric error") {
  try {
    compute_metrics("X", {1.0, 2.0},
                    {1.0, std::numeric_limits<double>::infinity()});
    FAIL("expected a numeric error");
  } catch (const Error& err) {
    CHECK(err.kind() == ErrorKind::Numeric);
  }
}

TEST_CASE("metric reports round trip through json") {
  std::string dir = testutil::work_dir("metrics_json");
  std::vector<MetricReport> rs(2);
  rs[0].variable = "X";
  rs[0].rmse = 0.125;
  rs[0].mae = 0.0625;
  rs[0].n_points = 7;
  rs[1].variable = "Rpp";
  rs[1].rmse = 1.5e-3;
  rs[1].mae = 1.1e-3;
  rs[1].n_points = 12;
  std::string path = dir + "/metrics.json";
  write_metrics_json(path, rs);
  std::vector<MetricReport> back = read_metrics_json(path);
  REQUIRE(back.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back[i].variable == rs[i].variable);
    CHECK(back[i].rmse == rs[i].rmse);
    CHECK(back[i].mae == rs[i].mae);
    CHECK(back[i].n_points == rs[i].n_points);
  }
  std::string text = testutil::slurp(path);
  CHECK(text.find("\"variable\"") != std::string::npos);
  CHECK(text.find("\"rmse\"") != std::string::npos);
}
