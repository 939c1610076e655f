#pragma once

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "odebn/error.hpp"
#include "odebn/model.hpp"
#include "odebn/random.hpp"
#include "odebn/trajectory.hpp"

namespace odebn {

/// Noise configuration applied when compiling a model into a DBN template.
/// Parameter random-walk sd is a fraction of each prior sd per step; state
/// process noise is a single sd shared by all variables (0 keeps the variable
/// transition exactly the deterministic Euler map).
struct NoiseConfig {
  double walk_sd_fraction = 0.02;
  double process_noise_sd = 0.0;
};

struct VariableNode {
  std::string name;
  std::vector<std::string> parents;  // symbols of the RHS plus the node itself
  double process_noise_sd = 0.0;
};

struct ParameterNode {
  std::string name;
  double walk_sd = 0.0;
  double lower_bound;
  double upper_bound;
};

struct ObservationNode {
  std::string variable;
  int var_index = -1;
  double noise_sd = 0.0;
};

/// Joint latent state of one time slice: model parameters plus variables.
struct SliceState {
  double t = 0.0;
  std::vector<double> params;
  std::vector<double> state;
};

// Out-of-bounds parameter proposals are clamped just inside the bound, which
// keeps positivity constraints without producing exact zeros in rate laws.
inline constexpr double kBoundMargin = 1e-12;

/// Two-slice DBN compiled from an ODE model: per-variable Euler transitions,
/// Gaussian random-walk parameter nodes, Gaussian observation nodes.
struct DbnTemplate {
  double dt = 0.0;
  ModelSpec model;  // carries the compiled rate equations
  std::vector<VariableNode> variable_nodes;
  std::vector<ParameterNode> parameter_nodes;
  std::vector<ObservationNode> observation_nodes;
  std::vector<std::string> input_bindings;

  int observation_index(std::string_view variable) const {
    for (std::size_t i = 0; i < observation_nodes.size(); ++i) {
      if (observation_nodes[i].variable == variable) {
        return static_cast<int>(i);
      }
    }
    return -1;
  }

  /// Human-readable node/parent listing, used by the CLI's validate command.
  std::string describe() const {
    std::string out = "dbn template (dt = " + std::to_string(dt) + ")\n";
    for (const auto& node : variable_nodes) {
      out += "  variable " + node.name + " <- {";
      for (std::size_t i = 0; i < node.parents.size(); ++i) {
        if (i) out += ", ";
        out += node.parents[i];
      }
      out += "}\n";
    }
    for (const auto& node : parameter_nodes) {
      out += "  parameter " + node.name + " <- {" + node.name +
             "}  walk_sd = " + std::to_string(node.walk_sd) + "\n";
    }
    for (const auto& node : observation_nodes) {
      out += "  observation of " + node.variable +
             "  noise_sd = " + std::to_string(node.noise_sd) + "\n";
    }
    return out;
  }
};

/// Compile a validated model into the two-slice template. Parent sets are
/// derived by symbol extraction from each rate equation; each parameter's only
/// inter-slice parent is itself.
inline DbnTemplate compile_dbn(const ModelSpec& m, double dt,
                               const NoiseConfig& noise = {}) {
  if (!(dt > 0.0)) throw_validation("compile_dbn: dt must be > 0");
  if (noise.walk_sd_fraction < 0.0 || noise.process_noise_sd < 0.0) {
    throw_validation("compile_dbn: noise sds must be >= 0");
  }
  DbnTemplate tpl;
  tpl.dt = dt;
  tpl.model = m;
  for (std::size_t i = 0; i < m.n_vars(); ++i) {
    VariableNode node;
    node.name = m.variables[i].name;
    node.process_noise_sd = noise.process_noise_sd;
    std::set<std::string> symbols;
    collect_symbols(*m.equations[i], symbols);
    symbols.insert(node.name);  // self-arc from the previous slice
    node.parents.assign(symbols.begin(), symbols.end());
    tpl.variable_nodes.push_back(std::move(node));
  }
  for (const auto& p : m.parameters) {
    tpl.parameter_nodes.push_back(
        {p.name, noise.walk_sd_fraction * p.prior_sd, p.lower_bound,
         p.upper_bound});
  }
  for (const auto& o : m.observations) {
    int idx = m.variable_index(o.variable);
    if (idx < 0) {
      throw_validation("observation on unknown variable '" + o.variable + "'");
    }
    tpl.observation_nodes.push_back({o.variable, idx, o.noise_sd});
  }
  for (const auto& in : m.inputs) tpl.input_bindings.push_back(in.name);
  return tpl;
}

namespace detail {

inline double clamp_to_bounds(double v, double lo, double hi) {
  if (v <= lo) return lo + kBoundMargin;
  if (v >= hi) return hi - kBoundMargin;
  return v;
}

/// Reusable buffers for the in-place transition hot path.
struct TransitionWorkspace {
  std::vector<double> env;
  std::vector<double> stack;
  std::vector<double> deriv;
  std::vector<double> input_values;

  void resize(const ModelSpec& m) {
    env.resize(m.env_size());
    stack.resize(m.rhs_stack_need());
    deriv.resize(m.n_vars());
    input_values.resize(m.n_inputs());
  }
};

/// Advance one particle in place: propagate parameters by their Gaussian
/// random walk (clamped to bounds), then drive the Euler step with the NEW
/// parameter values, then add state process noise. Returns false when the
/// propagated state is non-finite (the particle is dead).
inline bool transition_inplace(const DbnTemplate& tpl, double t,
                               double* params, double* state,
                               RandomStream& rng,
                               const double* input_values,
                               TransitionWorkspace& ws) {
  const ModelSpec& m = tpl.model;
  for (std::size_t j = 0; j < tpl.parameter_nodes.size(); ++j) {
    const ParameterNode& node = tpl.parameter_nodes[j];
    if (node.walk_sd > 0.0) {
      params[j] = clamp_to_bounds(params[j] + node.walk_sd * rng.normal(),
                                  node.lower_bound, node.upper_bound);
    }
  }
  m.fill_env(ws.env.data(), state, params, input_values, t);
  m.rhs_into(ws.deriv.data(), ws.env.data(), ws.stack.data());
  bool finite = true;
  for (std::size_t i = 0; i < m.n_vars(); ++i) {
    double next = state[i] + tpl.dt * ws.deriv[i];
    double sd = tpl.variable_nodes[i].process_noise_sd;
    if (sd > 0.0) next += sd * rng.normal();
    state[i] = next;
    finite = finite && std::isfinite(next);
  }
  return finite;
}

}  // namespace detail

/// One DBN transition of the joint latent state. The propagated parameters
/// (not the previous ones) drive the Euler step: the intra-slice arcs run
/// parameters -> variables.
inline SliceState transition(const DbnTemplate& tpl, const SliceState& s,
                             RandomStream& rng, const InputSet& inputs = {}) {
  if (s.params.size() != tpl.parameter_nodes.size() ||
      s.state.size() != tpl.variable_nodes.size()) {
    throw_validation("transition: slice state shape mismatch");
  }
  SliceState next = s;
  detail::TransitionWorkspace ws;
  ws.resize(tpl.model);
  inputs.values_at(s.t, ws.input_values.data());
  bool finite =
      detail::transition_inplace(tpl, s.t, next.params.data(),
                                 next.state.data(), rng,
                                 ws.input_values.data(), ws);
  if (!finite) {
    throw_numeric("transition produced a non-finite state at t = " +
                  std::to_string(s.t));
  }
  next.t = s.t + tpl.dt;
  return next;
}

inline constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

/// Log density of observing `value` on the given variable: Normal with mean
/// at the current state component and the observation node's noise sd.
inline double observation_logpdf(const DbnTemplate& tpl, const SliceState& s,
                                 std::string_view variable, double value) {
  int idx = tpl.observation_index(variable);
  if (idx < 0) {
    throw_validation("no observation node for variable '" +
                     std::string(variable) + "'");
  }
  const ObservationNode& node = tpl.observation_nodes[idx];
  double z = (value - s.state[node.var_index]) / node.noise_sd;
  return -0.5 * z * z - std::log(node.noise_sd) - 0.5 * kLogTwoPi;
}

}  // namespace odebn
