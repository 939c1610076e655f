#pragma once

#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "odebn/error.hpp"
#include "odebn/expr.hpp"

namespace odebn {

struct VariableDecl {
  std::string name;
  double initial_value = 0.0;
};

struct ParameterDecl {
  std::string name;
  double prior_mean = 0.0;
  double prior_sd = 0.0;
  double lower_bound = -std::numeric_limits<double>::infinity();
  double upper_bound = std::numeric_limits<double>::infinity();
};

struct InputDecl {
  std::string name;    // symbol used in equations
  std::string column;  // column of the input time-series file
};

struct ObsDecl {
  std::string variable;
  double noise_sd = 0.0;
};

/// A parsed and validated ODE model: variables with initial values, parameters
/// with Gaussian priors, exogenous inputs, one rate equation per variable, and
/// observation declarations. Immutable by convention after finalize().
struct ModelSpec {
  std::string name = "unnamed";
  std::vector<VariableDecl> variables;
  std::vector<ParameterDecl> parameters;
  std::vector<InputDecl> inputs;
  std::vector<ExprPtr> equations;  // aligned with `variables`
  std::vector<ObsDecl> observations;

  std::size_t n_vars() const { return variables.size(); }
  std::size_t n_params() const { return parameters.size(); }
  std::size_t n_inputs() const { return inputs.size(); }

  /// Environment layout used by the compiled equations:
  /// [variables..., parameters..., inputs..., t].
  std::size_t env_size() const { return n_vars() + n_params() + n_inputs() + 1; }
  std::size_t t_slot() const { return env_size() - 1; }

  const std::unordered_map<std::string, std::uint32_t>& slots() const {
    return slots_;
  }
  const std::vector<Program>& compiled_equations() const { return programs_; }
  std::size_t rhs_stack_need() const { return stack_need_; }

  int variable_index(std::string_view name) const {
    for (std::size_t i = 0; i < variables.size(); ++i) {
      if (variables[i].name == name) return static_cast<int>(i);
    }
    return -1;
  }

  int parameter_index(std::string_view name) const {
    for (std::size_t i = 0; i < parameters.size(); ++i) {
      if (parameters[i].name == name) return static_cast<int>(i);
    }
    return -1;
  }

  /// Validate all invariants and (re)build the compiled equation programs.
  /// Call after any mutation; parse_model has already done it for you.
  void finalize() {
    validate_declarations();
    for (std::size_t i = 0; i < variables.size(); ++i) {
      if (i >= equations.size() || !equations[i]) {
        throw_validation("missing equation for variable '" +
                         variables[i].name + "'");
      }
    }
    if (equations.size() > variables.size()) {
      throw_validation("more equations than declared variables");
    }
    build_slots();
    programs_.clear();
    stack_need_ = 0;
    for (std::size_t i = 0; i < variables.size(); ++i) {
      std::set<std::string> symbols;
      collect_symbols(*equations[i], symbols);
      for (const std::string& s : symbols) {
        if (!slots_.count(s)) {
          throw_validation("equation for '" + variables[i].name +
                           "' references unresolved symbol '" + s + "'");
        }
      }
      programs_.push_back(compile_expr(*equations[i], slots_));
      if (programs_.back().stack_need > stack_need_) {
        stack_need_ = programs_.back().stack_need;
      }
    }
  }

  /// Evaluate all rate equations: f(state, params, inputs, t) in declaration
  /// order. Throws a domain error naming the variable on non-finite output.
  std::vector<double> rhs(const std::vector<double>& state,
                          const std::vector<double>& params,
                          const std::vector<double>& input_values,
                          double t) const {
    if (state.size() != n_vars() || params.size() != n_params() ||
        input_values.size() != n_inputs()) {
      throw_validation("rhs: vector lengths do not match the declarations");
    }
    std::vector<double> env(env_size());
    std::vector<double> stack(stack_need_);
    fill_env(env.data(), state.data(), params.data(), input_values.data(), t);
    std::vector<double> out(n_vars());
    rhs_into(out.data(), env.data(), stack.data());
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (!std::isfinite(out[i])) {
        throw_numeric("rhs of '" + variables[i].name +
                      "' is non-finite at t = " + std::to_string(t));
      }
    }
    return out;
  }

  // Hot path used by the integrator and the particle filter: no allocation,
  // no finiteness check (callers test the propagated state instead).
  void fill_env(double* env, const double* state, const double* params,
                const double* input_values, double t) const {
    std::size_t k = 0;
    for (std::size_t i = 0; i < n_vars(); ++i) env[k++] = state[i];
    for (std::size_t i = 0; i < n_params(); ++i) env[k++] = params[i];
    for (std::size_t i = 0; i < n_inputs(); ++i) env[k++] = input_values[i];
    env[k] = t;
  }

  void rhs_into(double* out, const double* env, double* stack) const {
    for (std::size_t i = 0; i < programs_.size(); ++i) {
      out[i] = run_program(programs_[i], env, stack);
    }
  }

 private:
  void validate_declarations() {
    std::set<std::string> seen{"t"};
    auto declare = [&](const std::string& n, const char* what) {
      if (n.empty()) throw_validation(std::string(what) + " with empty name");
      if (!seen.insert(n).second) {
        throw_validation("duplicate declaration of '" + n +
                         "' (names are unique across variables, parameters, "
                         "inputs, and the reserved symbol t)");
      }
    };
    for (const auto& v : variables) {
      declare(v.name, "variable");
      if (!std::isfinite(v.initial_value)) {
        throw_validation("initial value of '" + v.name + "' is not finite");
      }
    }
    for (const auto& p : parameters) {
      declare(p.name, "parameter");
      if (!(p.prior_sd > 0.0)) {
        throw_validation("prior sd of parameter '" + p.name +
                         "' must be > 0");
      }
      if (!(p.lower_bound < p.upper_bound)) {
        throw_validation("bounds of parameter '" + p.name +
                         "' must satisfy lower < upper");
      }
    }
    for (const auto& in : inputs) declare(in.name, "input");
    if (equations.size() != variables.size()) {
      throw_validation("expected one equation per variable");
    }
    for (const auto& o : observations) {
      if (variable_index(o.variable) < 0) {
        throw_validation("observation declared on unknown variable '" +
                         o.variable + "'");
      }
      if (!(o.noise_sd > 0.0)) {
        throw_validation("observation noise for '" + o.variable +
                         "' must be > 0");
      }
    }
  }

  void build_slots() {
    slots_.clear();
    std::uint32_t k = 0;
    for (const auto& v : variables) slots_[v.name] = k++;
    for (const auto& p : parameters) slots_[p.name] = k++;
    for (const auto& in : inputs) slots_[in.name] = k++;
    slots_["t"] = k;
  }

  std::unordered_map<std::string, std::uint32_t> slots_;
  std::vector<Program> programs_;
  std::size_t stack_need_ = 0;
};

// ---------------------------------------------------------------------------
// Model DSL parsing

namespace detail {

class LineScanner {
 public:
  LineScanner(std::string_view line, int line_no)
      : line_(line), line_no_(line_no) {}

  void skip_ws() {
    while (pos_ < line_.size() &&
           std::isspace(static_cast<unsigned char>(line_[pos_]))) {
      ++pos_;
    }
  }

  bool at_end() {
    skip_ws();
    return pos_ >= line_.size();
  }

  std::string ident() {
    skip_ws();
    if (pos_ >= line_.size() ||
        !(std::isalpha(static_cast<unsigned char>(line_[pos_])) ||
          line_[pos_] == '_')) {
      fail("expected identifier");
    }
    std::size_t start = pos_;
    while (pos_ < line_.size() &&
           (std::isalnum(static_cast<unsigned char>(line_[pos_])) ||
            line_[pos_] == '_')) {
      ++pos_;
    }
    return std::string(line_.substr(start, pos_ - start));
  }

  double number() {
    skip_ws();
    // Accept inf / -inf for parameter bounds.
    if (match_word("inf") || match_word("+inf")) {
      return std::numeric_limits<double>::infinity();
    }
    if (match_word("-inf")) {
      return -std::numeric_limits<double>::infinity();
    }
    const char* begin = line_.data() + pos_;
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin) fail("expected number");
    pos_ += static_cast<std::size_t>(end - begin);
    return v;
  }

  void expect(char c) {
    skip_ws();
    if (pos_ >= line_.size() || line_[pos_] != c) {
      fail(std::string("expected '") + c + "'");
    }
    ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < line_.size() && line_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect_word(const std::string& w) {
    skip_ws();
    if (!match_word(w)) fail("expected '" + w + "'");
  }

  std::string_view rest() {
    skip_ws();
    std::string_view r = line_.substr(pos_);
    pos_ = line_.size();
    return r;
  }

  std::size_t pos() const { return pos_; }

  [[noreturn]] void fail(const std::string& why) {
    throw_validation("syntax error at line " + std::to_string(line_no_) +
                     ", column " + std::to_string(pos_ + 1) + ": " + why);
  }

 private:
  bool match_word(const std::string& w) {
    if (line_.substr(pos_, w.size()) != w) return false;
    std::size_t after = pos_ + w.size();
    if (after < line_.size() &&
        (std::isalnum(static_cast<unsigned char>(line_[after])) ||
         line_[after] == '_')) {
      return false;
    }
    pos_ = after;
    return true;
  }

  std::string_view line_;
  std::size_t pos_ = 0;
  int line_no_;
};

}  // namespace detail

/// Parse the line-oriented model DSL:
///
///   model <name>
///   var <ident> = <real>
///   param <ident> ~ N(<mean>, <sd>) in (<lo>, <hi>)   # bounds optional
///   input <ident> from <column>
///   eq d<ident>/dt = <expression>
///   obs <ident> noise <real>
///
/// '#' starts a comment. Declaration order is preserved.
inline ModelSpec parse_model(const std::string& source_text) {
  ModelSpec m;
  bool have_name = false;
  std::vector<std::pair<std::string, ExprPtr>> equations;  // var -> rhs

  std::istringstream in(source_text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    if (auto hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    detail::LineScanner sc(line, line_no);
    if (sc.at_end()) continue;

    std::string keyword = sc.ident();
    if (keyword == "model") {
      if (have_name) sc.fail("duplicate model declaration");
      m.name = sc.ident();
      have_name = true;
    } else if (keyword == "var") {
      VariableDecl v;
      v.name = sc.ident();
      sc.expect('=');
      v.initial_value = sc.number();
      m.variables.push_back(std::move(v));
    } else if (keyword == "param") {
      ParameterDecl p;
      p.name = sc.ident();
      sc.expect('~');
      sc.expect_word("N");
      sc.expect('(');
      p.prior_mean = sc.number();
      sc.expect(',');
      p.prior_sd = sc.number();
      sc.expect(')');
      if (!sc.at_end()) {
        sc.expect_word("in");
        sc.expect('(');
        p.lower_bound = sc.number();
        sc.expect(',');
        p.upper_bound = sc.number();
        sc.expect(')');
      }
      m.parameters.push_back(std::move(p));
    } else if (keyword == "input") {
      InputDecl d;
      d.name = sc.ident();
      sc.expect_word("from");
      d.column = sc.ident();
      m.inputs.push_back(std::move(d));
    } else if (keyword == "eq") {
      sc.expect('d');
      std::string var = sc.ident();
      sc.expect('/');
      sc.expect_word("dt");
      sc.expect('=');
      sc.skip_ws();
      int expr_col = static_cast<int>(sc.pos());
      ExprPtr e = parse_expression(sc.rest(), line_no, expr_col);
      equations.emplace_back(std::move(var), std::move(e));
    } else if (keyword == "obs") {
      ObsDecl o;
      o.variable = sc.ident();
      sc.expect_word("noise");
      o.noise_sd = sc.number();
      m.observations.push_back(std::move(o));
    } else {
      sc.fail("unknown keyword '" + keyword + "'");
    }
    if (!sc.at_end()) sc.fail("trailing text");
  }

  // Match equations to declared variables, by name.
  m.equations.resize(m.variables.size());
  for (auto& [var, e] : equations) {
    int idx = m.variable_index(var);
    if (idx < 0) {
      throw_validation("equation for undeclared variable '" + var + "'");
    }
    if (m.equations[idx]) {
      throw_validation("duplicate equation for variable '" + var + "'");
    }
    m.equations[idx] = std::move(e);
  }

  m.finalize();
  return m;
}

namespace detail {

inline std::string format_bound(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return format_double(v);
}

}  // namespace detail

/// Canonical DSL text for a model; parse_model(print_model(m)) reproduces m
/// structurally.
inline std::string print_model(const ModelSpec& m) {
  std::string out;
  out += "model " + m.name + "\n";
  for (const auto& v : m.variables) {
    out += "var " + v.name + " = " + detail::format_double(v.initial_value) + "\n";
  }
  for (const auto& p : m.parameters) {
    out += "param " + p.name + " ~ N(" + detail::format_double(p.prior_mean) +
           ", " + detail::format_double(p.prior_sd) + ") in (" +
           detail::format_bound(p.lower_bound) + ", " +
           detail::format_bound(p.upper_bound) + ")\n";
  }
  for (const auto& in : m.inputs) {
    out += "input " + in.name + " from " + in.column + "\n";
  }
  for (std::size_t i = 0; i < m.variables.size(); ++i) {
    out += "eq d" + m.variables[i].name + "/dt = " +
           print_expr(*m.equations[i]) + "\n";
  }
  for (const auto& o : m.observations) {
    out += "obs " + o.variable + " noise " + detail::format_double(o.noise_sd) +
           "\n";
  }
  return out;
}

}  // namespace odebn
