#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "odebn/error.hpp"
#include "odebn/model.hpp"
#include "odebn/trajectory.hpp"

namespace odebn {

enum class Method { Euler, Rk4 };

/// One forward-Euler step: state + dt * derivative, elementwise.
inline std::vector<double> euler_step(const std::vector<double>& state,
                                      const std::vector<double>& derivative,
                                      double dt) {
  if (state.size() != derivative.size()) {
    throw_validation("euler_step: state and derivative lengths differ");
  }
  std::vector<double> out(state.size());
  for (std::size_t i = 0; i < state.size(); ++i) {
    out[i] = state[i] + dt * derivative[i];
  }
  return out;
}

namespace detail {

[[noreturn]] inline void report_non_finite(const ModelSpec& m,
                                           const std::vector<double>& state,
                                           double t) {
  for (std::size_t i = 0; i < state.size(); ++i) {
    if (!std::isfinite(state[i])) {
      throw_numeric("integration produced a non-finite value for '" +
                    m.variables[i].name + "' at t = " + std::to_string(t));
    }
  }
  throw_numeric("integration produced a non-finite state at t = " +
                std::to_string(t));
}

}  // namespace detail

/// Fixed-step integration of the model's rate equations over the grid.
/// Euler evaluates the right-hand side at the left endpoint of each step;
/// RK4 is the classical 4-stage scheme with inputs interpolated at the stage
/// times. The first row is the declared initial state.
inline Trajectory integrate(const ModelSpec& m,
                            const std::vector<double>& params,
                            const GridSpec& grid, Method method,
                            const InputSet& inputs = {}) {
  grid.validate();
  if (params.size() != m.n_params()) {
    throw_validation("integrate: expected " + std::to_string(m.n_params()) +
                     " parameters, got " + std::to_string(params.size()));
  }
  if (inputs.size() != m.n_inputs()) {
    throw_validation("integrate: model declares " +
                     std::to_string(m.n_inputs()) +
                     " inputs but the input set binds " +
                     std::to_string(inputs.size()));
  }
  inputs.require_coverage(grid.t_start, grid.t_end);

  const std::size_t nv = m.n_vars();
  const std::size_t n = grid.n_steps();
  const double dt = grid.dt;

  Trajectory traj;
  for (const auto& v : m.variables) traj.variable_names.push_back(v.name);
  traj.times.resize(n + 1);
  traj.values.resize((n + 1) * nv);

  std::vector<double> state(nv);
  for (std::size_t i = 0; i < nv; ++i) state[i] = m.variables[i].initial_value;

  std::vector<double> env(m.env_size());
  std::vector<double> stack(m.rhs_stack_need());
  std::vector<double> input_vals(m.n_inputs());
  std::vector<double> k1(nv), k2(nv), k3(nv), k4(nv), mid(nv);

  auto eval_rhs = [&](const std::vector<double>& x, double t, double* out) {
    inputs.values_at(t, input_vals.data());
    m.fill_env(env.data(), x.data(), params.data(), input_vals.data(), t);
    m.rhs_into(out, env.data(), stack.data());
  };

  auto store = [&](std::size_t row) {
    traj.times[row] = grid.time(row);
    for (std::size_t i = 0; i < nv; ++i) {
      if (!std::isfinite(state[i])) {
        detail::report_non_finite(m, state, grid.time(row));
      }
      traj.at(row, i) = state[i];
    }
  };

  store(0);
  for (std::size_t step = 0; step < n; ++step) {
    double t = grid.time(step);
    if (method == Method::Euler) {
      eval_rhs(state, t, k1.data());
      for (std::size_t i = 0; i < nv; ++i) state[i] = state[i] + dt * k1[i];
    } else {
      eval_rhs(state, t, k1.data());
      for (std::size_t i = 0; i < nv; ++i) mid[i] = state[i] + 0.5 * dt * k1[i];
      eval_rhs(mid, t + 0.5 * dt, k2.data());
      for (std::size_t i = 0; i < nv; ++i) mid[i] = state[i] + 0.5 * dt * k2[i];
      eval_rhs(mid, t + 0.5 * dt, k3.data());
      for (std::size_t i = 0; i < nv; ++i) mid[i] = state[i] + dt * k3[i];
      eval_rhs(mid, t + dt, k4.data());
      for (std::size_t i = 0; i < nv; ++i) {
        state[i] += dt / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
      }
    }
    store(step + 1);
  }
  return traj;
}

}  // namespace odebn
