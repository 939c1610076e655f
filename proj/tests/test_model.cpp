#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "odebn/error.hpp"
#include "odebn/model.hpp"
#include "odebn/random.hpp"

using namespace odebn;

namespace {

const char* kLotkaText = R"(model lv
var X = 1
var Y = 1
param a ~ N(2, 0.5) in (0, inf)
param b ~ N(1, 0.25) in (0, inf)
param c ~ N(4, 1) in (0, inf)
param d ~ N(1, 0.25) in (0, inf)
eq dX/dt = a*X - b*X*Y
eq dY/dt = -c*Y + d*X*Y
obs X noise 0.05
)";

ModelSpec lotka() { return parse_model(kLotkaText); }

}  // namespace

TEST_CASE("single decay model parses into the expected shape") {
  ModelSpec m = parse_model(
      "model decay\n"
      "var X = 1.0\n"
      "param a ~ N(1, 0.5) in (0, inf)\n"
      "eq dX/dt = -a*X\n");
  CHECK(m.name == "decay");
  REQUIRE(m.n_vars() == 1);
  CHECK(m.variables[0].name == "X");
  CHECK(m.variables[0].initial_value == 1.0);
  REQUIRE(m.n_params() == 1);
  CHECK(m.parameters[0].prior_mean == 1.0);
  CHECK(m.parameters[0].prior_sd == 0.5);
  CHECK(m.parameters[0].lower_bound == 0.0);
  CHECK(std::isinf(m.parameters[0].upper_bound));

  const Expr& e = *m.equations[0];
  REQUIRE(e.kind == Expr::Kind::Mul);
  REQUIRE(e.lhs->kind == Expr::Kind::Negate);
  CHECK(e.lhs->lhs->name == "a");
  CHECK(e.rhs->name == "X");
}

TEST_CASE("predator prey rates at concrete points") {
  ModelSpec m = lotka();
  std::vector<double> r = m.rhs({1, 1}, {2, 1, 4, 1}, {}, 0.0);
  REQUIRE(r.size() == 2);
  CHECK(r[0] == 1.0);
  CHECK(r[1] == -3.0);

  r = m.rhs({3, 4}, {2, 1, 4, 1}, {}, 0.0);
  CHECK(r[0] == -6.0);
  CHECK(r[1] == -4.0);
}

TEST_CASE("zero state is a fixed point of the mass action rates") {
  ModelSpec m = lotka();
  std::vector<double> r = m.rhs({0, 0}, {2, 1, 4, 1}, {}, 0.0);
  CHECK(r[0] == 0.0);
  CHECK(r[1] == 0.0);
}

TEST_CASE("shipped cascade model reproduces its initial rates") {
  ModelSpec m = parse_model(testutil::slurp(testutil::model_path("stc.ode")));
  REQUIRE(m.n_vars() == 5);
  std::vector<double> state;
  for (const VariableDecl& v : m.variables) state.push_back(v.initial_value);
  std::vector<double> params = {0.07, 0.6, 0.05, 0.3, 0.017, 0.3};
  REQUIRE(m.n_params() == 6);
  std::vector<double> r = m.rhs(state, params, {}, 0.0);
  CHECK(r[m.variable_index("S")] == Catch::Approx(-0.67).margin(1e-12));
  CHECK(r[m.variable_index("dS")] == Catch::Approx(0.07).margin(1e-12));
  CHECK(r[m.variable_index("R")] == Catch::Approx(-0.6).margin(1e-12));
  CHECK(r[m.variable_index("RS")] == Catch::Approx(0.6).margin(1e-12));
  CHECK(r[m.variable_index("Rpp")] == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("cascade rates conserve both mass balances everywhere") {
  ModelSpec m = parse_model(testutil::slurp(testutil::model_path("stc.ode")));
  int iS = m.variable_index("S"), idS = m.variable_index("dS");
  int iR = m.variable_index("R"), iRS = m.variable_index("RS");
  int iRpp = m.variable_index("Rpp");
  RandomStream rs(11, stream_purpose::kGeneric, 0, 0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> state(5), params(6);
    for (double& v : state) v = rs.uniform() * 2.0;
    for (double& v : params) v = 0.01 + rs.uniform();
    std::vector<double> r = m.rhs(state, params, {}, 0.0);
    double scale = 0.0;
    for (double v : r) scale = std::max(scale, std::fabs(v));
    double tol = 1e-12 * std::max(1.0, scale);
    CHECK(std::fabs(r[iS] + r[idS] + r[iRS]) <= tol);
    CHECK(std::fabs(r[iR] + r[iRS] + r[iRpp]) <= tol);
  }
}

TEST_CASE("time symbol is usable on the right hand side") {
  ModelSpec m = parse_model(
      "model ramp\n"
      "var X = 0\n"
      "eq dX/dt = t\n");
  CHECK(m.rhs({0}, {}, {}, 3.0)[0] == 3.0);
}

TEST_CASE("input declarations bind file columns") {
  ModelSpec m = parse_model(testutil::slurp(testutil::model_path("pif45.ode")));
  REQUIRE(m.n_inputs() == 1);
  CHECK(m.inputs[0].name == "TOC1");
  CHECK(m.inputs[0].column == "TOC1");
  REQUIRE(m.n_vars() == 1);
  CHECK(m.variables[0].name == "PIF");
}

TEST_CASE("every equation symbol resolves to exactly one declaration") {
  for (const char* file : {"lotka.ode", "stc.ode", "pif45.ode"}) {
    ModelSpec m = parse_model(testutil::slurp(testutil::model_path(file)));
    for (std::size_t i = 0; i < m.n_vars(); ++i) {
      std::set<std::string> syms;
      collect_symbols(*m.equations[i], syms);
      for (const std::string& s : syms) {
        int hits = 0;
        if (m.variable_index(s) >= 0) ++hits;
        if (m.parameter_index(s) >= 0) ++hits;
        for (const InputDecl& in : m.inputs) {
          if (in.name == s) ++hits;
        }
        if (s == "t") ++hits;
        INFO(file << " equation " << m.variables[i].name << " symbol " << s);
        CHECK(hits == 1);
      }
    }
  }
}

TEST_CASE("parse rejects malformed or inconsistent sources") {
  auto expect_validation = [](const std::string& text, const std::string& needle) {
    try {
      parse_model(text);
      FAIL("expected a validation error for: " << text);
    } catch (const Error& err) {
      CHECK(err.kind() == ErrorKind::Validation);
      INFO(err.what());
      CHECK(std::string(err.what()).find(needle) != std::string::npos);
    }
  };

  expect_validation("var X = 1\n", "missing equation");
  expect_validation("var X = 1\nvar X = 2\neq dX/dt = 1\n", "duplicate");
  expect_validation("var X = 1\neq dX/dt = 1\neq dX/dt = 2\n", "duplicate");
  expect_validation("var X = 1\neq dY/dt = 1\neq dX/dt = 1\n", "undeclared");
  expect_validation("var X = 1\neq dX/dt = a*X\n", "a");
  expect_validation("var X = 1\neq dX/dt = 1\nobs Y noise 0.1\n", "Y");
  expect_validation("var X = 1\neq dX/dt = 1\nobs X noise 0\n", "noise");
  expect_validation(
      "var X = 1\nparam p ~ N(1, 0) in (0, inf)\neq dX/dt = p\n", "sd");
  expect_validation(
      "var X = 1\nparam p ~ N(1, 0.1) in (2, 1)\neq dX/dt = p\n", "bound");
  expect_validation("var t = 1\neq dt/dt = 1\n", "t");
  expect_validation("var X = 1\neq dX/dt = 1 extra\n", "line 2");
  expect_validation("frob X = 1\n", "line 1");
  expect_validation("var X = inf\neq dX/dt = 1\n", "finite");
}

TEST_CASE("syntax errors name the offending line") {
  try {
    parse_model("var X = 1\nvar Y = 2\neq dX/dt = a +\neq dY/dt = 1\n");
    FAIL("expected a validation error");
  } catch (const Error& err) {
    CHECK(std::string(err.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("comments and blank lines are ignored") {
  ModelSpec m = parse_model(
      "# header comment\n"
      "model demo\n"
      "\n"
      "var X = 2   # trailing comment\n"
      "eq dX/dt = -X\n");
  CHECK(m.name == "demo");
  CHECK(m.variables[0].initial_value == 2.0);
}

TEST_CASE("print then parse is a structural identity on shipped models") {
  for (const char* file : {"lotka.ode", "stc.ode", "pif45.ode"}) {
    ModelSpec m = parse_model(testutil::slurp(testutil::model_path(file)));
    std::string printed = print_model(m);
    ModelSpec again = parse_model(printed);
    INFO(file);
    CHECK(again.name == m.name);
    REQUIRE(again.n_vars() == m.n_vars());
    REQUIRE(again.n_params() == m.n_params());
    REQUIRE(again.n_inputs() == m.n_inputs());
    REQUIRE(again.observations.size() == m.observations.size());
    for (std::size_t i = 0; i < m.n_vars(); ++i) {
      CHECK(again.variables[i].name == m.variables[i].name);
      CHECK(again.variables[i].initial_value == m.variables[i].initial_value);
      CHECK(testutil::exprs_equal(*again.equations[i], *m.equations[i]));
    }
    for (std::size_t i = 0; i < m.n_params(); ++i) {
      CHECK(again.parameters[i].name == m.parameters[i].name);
      CHECK(again.parameters[i].prior_mean == m.parameters[i].prior_mean);
      CHECK(again.parameters[i].prior_sd == m.parameters[i].prior_sd);
      CHECK(again.parameters[i].lower_bound == m.parameters[i].lower_bound);
      CHECK(again.parameters[i].upper_bound == m.parameters[i].upper_bound);
    }
    for (std::size_t i = 0; i < m.observations.size(); ++i) {
      CHECK(again.observations[i].variable == m.observations[i].variable);
      CHECK(again.observations[i].noise_sd == m.observations[i].noise_sd);
    }
    CHECK(print_model(again) == printed);
  }
}

TEST_CASE("rhs validates argument lengths") {
  ModelSpec m = lotka();
  CHECK_THROWS_AS(m.rhs({1.0}, {2, 1, 4, 1}, {}, 0.0), Error);
  CHECK_THROWS_AS(m.rhs({1, 1}, {2, 1}, {}, 0.0), Error);
}

TEST_CASE("non-finite rates are reported with the variable name") {
  ModelSpec m = parse_model(
      "var X = 1\n"
      "var Y = 1\n"
      "eq dX/dt = 1 / Y\n"
      "eq dY/dt = -Y\n");
  try {
    m.rhs({1, 0}, {}, {}, 0.0);
    FAIL("expected a numeric error");
  } catch (const Error& err) {
    CHECK(err.kind() == ErrorKind::Numeric);
    CHECK(std::string(err.what()).find("X") != std::string::npos);
  }
}
