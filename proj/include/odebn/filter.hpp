#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "odebn/dbn.hpp"
#include "odebn/error.hpp"
#include "odebn/evidence.hpp"
#include "odebn/random.hpp"
#include "odebn/trajectory.hpp"

namespace odebn {

struct FilterConfig {
  std::size_t n_particles = 5000;
  double resample_threshold = 0.5;  // resample when ESS < threshold * N
  std::uint64_t seed = 42;
  std::vector<double> init_state_sd;  // per variable; empty means all zero
  unsigned n_threads = 1;             // 0 picks the hardware thread count
};

/// Particle population in structure-of-arrays layout, particle-major.
struct ParticleEnsemble {
  std::size_t n = 0;
  std::size_t nv = 0;
  std::size_t np = 0;
  std::vector<double> params;       // n rows of np
  std::vector<double> states;       // n rows of nv
  std::vector<double> log_weights;  // unnormalized

  void resize(std::size_t n_, std::size_t nv_, std::size_t np_) {
    n = n_;
    nv = nv_;
    np = np_;
    params.assign(n * np, 0.0);
    states.assign(n * nv, 0.0);
    log_weights.assign(n, 0.0);
  }

  double* param_row(std::size_t i) { return params.data() + i * np; }
  const double* param_row(std::size_t i) const {
    return params.data() + i * np;
  }
  double* state_row(std::size_t i) { return states.data() + i * nv; }
  const double* state_row(std::size_t i) const {
    return states.data() + i * nv;
  }
};

/// Draw the initial population: parameters from their truncated Gaussian
/// priors, states from the declared initial values plus optional Gaussian
/// jitter. One stream per particle keeps the draw independent of scheduling.
inline ParticleEnsemble init_particles(const DbnTemplate& tpl,
                                       const FilterConfig& cfg) {
  const ModelSpec& m = tpl.model;
  if (cfg.n_particles < 2) {
    throw_validation("filter: n_particles must be >= 2");
  }
  if (!cfg.init_state_sd.empty() && cfg.init_state_sd.size() != m.n_vars()) {
    throw_validation("filter: init_state_sd must list one sd per variable");
  }
  ParticleEnsemble ens;
  ens.resize(cfg.n_particles, m.n_vars(), m.n_params());
  for (std::size_t i = 0; i < ens.n; ++i) {
    RandomStream rng(cfg.seed, stream_purpose::kInit, 0, i);
    double* pr = ens.param_row(i);
    for (std::size_t j = 0; j < ens.np; ++j) {
      const ParameterDecl& p = m.parameters[j];
      pr[j] = rng.truncated_normal(p.prior_mean, p.prior_sd, p.lower_bound,
                                   p.upper_bound);
    }
    double* st = ens.state_row(i);
    for (std::size_t v = 0; v < ens.nv; ++v) {
      st[v] = m.variables[v].initial_value;
      if (!cfg.init_state_sd.empty() && cfg.init_state_sd[v] > 0.0) {
        st[v] += cfg.init_state_sd[v] * rng.normal();
      }
    }
  }
  return ens;
}

/// Normalize log weights into `w` and return the effective sample size
/// 1 / sum(w_i^2). Throws a numeric error when every particle is dead.
inline double normalize_weights(const std::vector<double>& log_weights,
                                std::vector<double>& w) {
  double m = -std::numeric_limits<double>::infinity();
  for (double lw : log_weights) m = std::max(m, lw);
  if (!(m > -std::numeric_limits<double>::infinity())) {
    throw_numeric("all particles have zero weight");
  }
  w.resize(log_weights.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = std::exp(log_weights[i] - m);
    sum += w[i];
  }
  double sum_sq = 0.0;
  for (double& x : w) {
    x /= sum;
    sum_sq += x * x;
  }
  return 1.0 / sum_sq;
}

/// Systematic resampling: one uniform offset in [0, 1), giving pointers
/// (offset + k)/n_out through the cumulative weights. Indices come out
/// sorted, and each source's offspring count differs from n_out * w_i by
/// less than 1.
inline std::vector<std::size_t> systematic_resample_indices(
    const std::vector<double>& w, double offset, std::size_t n_out = 0) {
  if (w.empty()) throw_validation("resample: empty weight vector");
  if (!(offset >= 0.0 && offset < 1.0)) {
    throw_validation("resample: offset must lie in [0, 1)");
  }
  if (n_out == 0) n_out = w.size();
  std::vector<std::size_t> out;
  out.reserve(n_out);
  double cum = w[0];
  std::size_t j = 0;
  for (std::size_t k = 0; k < n_out; ++k) {
    double target =
        (offset + static_cast<double>(k)) / static_cast<double>(n_out);
    while (cum <= target && j + 1 < w.size()) {
      ++j;
      cum += w[j];
    }
    out.push_back(j);
  }
  return out;
}

inline void resample_ensemble(ParticleEnsemble& ens,
                              const std::vector<std::size_t>& indices) {
  if (indices.size() != ens.n) {
    throw_validation("resample: index count does not match ensemble size");
  }
  std::vector<double> new_params(ens.params.size());
  std::vector<double> new_states(ens.states.size());
  for (std::size_t i = 0; i < ens.n; ++i) {
    std::size_t src = indices[i];
    std::copy_n(ens.param_row(src), ens.np, new_params.data() + i * ens.np);
    std::copy_n(ens.state_row(src), ens.nv, new_states.data() + i * ens.nv);
  }
  ens.params.swap(new_params);
  ens.states.swap(new_states);
  std::fill(ens.log_weights.begin(), ens.log_weights.end(), 0.0);
}

struct StepSummary {
  std::vector<double> var_mean, var_sd;
  std::vector<double> param_mean, param_sd;
  double ess = 0.0;
};

namespace detail {

/// Weighted mean and population sd of one SoA column. The mean accumulates
/// offsets from particle 0's value, so an ensemble of identical particles
/// reproduces that value exactly.
inline void weighted_column_summary(const double* base, std::size_t stride,
                                    std::size_t col, std::size_t n,
                                    const std::vector<double>& w,
                                    double& mean_out, double& sd_out) {
  double ref = base[col];
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += w[i] * (base[i * stride + col] - ref);
  }
  double mean = ref + acc;
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double d = base[i * stride + col] - mean;
    var += w[i] * d * d;
  }
  mean_out = mean;
  sd_out = std::sqrt(std::max(var, 0.0));
}

}  // namespace detail

/// Weighted posterior means and sds over all variables and parameters.
inline StepSummary posterior_summary(const ParticleEnsemble& ens,
                                     const std::vector<double>& w,
                                     double ess) {
  StepSummary s;
  s.ess = ess;
  s.var_mean.resize(ens.nv);
  s.var_sd.resize(ens.nv);
  for (std::size_t v = 0; v < ens.nv; ++v) {
    detail::weighted_column_summary(ens.states.data(), ens.nv, v, ens.n, w,
                                    s.var_mean[v], s.var_sd[v]);
  }
  s.param_mean.resize(ens.np);
  s.param_sd.resize(ens.np);
  for (std::size_t j = 0; j < ens.np; ++j) {
    detail::weighted_column_summary(ens.params.data(), ens.np, j, ens.n, w,
                                    s.param_mean[j], s.param_sd[j]);
  }
  return s;
}

/// Per-step posterior summaries over the whole grid.
struct FilterResult {
  std::vector<std::string> variable_names;
  std::vector<std::string> parameter_names;
  std::vector<double> times;
  std::vector<StepSummary> steps;
  std::vector<double> assimilated_times;  // grid times that carried evidence

  std::size_t n_rows() const { return times.size(); }

  const StepSummary& at_time(double t) const {
    for (std::size_t i = 0; i < times.size(); ++i) {
      double tol = 1e-9 * std::max(1.0, std::abs(t));
      if (std::abs(times[i] - t) <= tol) return steps[i];
    }
    throw_validation("no filter row at t = " + detail::format_double(t));
  }

  /// Flatten into a table with the canonical column layout:
  /// t, per-variable mean/sd pairs, per-parameter mean/sd pairs, ess.
  Trajectory to_table() const {
    Trajectory table;
    for (const auto& v : variable_names) {
      table.variable_names.push_back(v + "_mean");
      table.variable_names.push_back(v + "_sd");
    }
    for (const auto& p : parameter_names) {
      table.variable_names.push_back(p + "_mean");
      table.variable_names.push_back(p + "_sd");
    }
    table.variable_names.push_back("ess");
    table.times = times;
    std::size_t ncol = table.variable_names.size();
    table.values.resize(times.size() * ncol);
    for (std::size_t r = 0; r < times.size(); ++r) {
      const StepSummary& s = steps[r];
      std::size_t c = 0;
      for (std::size_t v = 0; v < variable_names.size(); ++v) {
        table.values[r * ncol + c++] = s.var_mean[v];
        table.values[r * ncol + c++] = s.var_sd[v];
      }
      for (std::size_t p = 0; p < parameter_names.size(); ++p) {
        table.values[r * ncol + c++] = s.param_mean[p];
        table.values[r * ncol + c++] = s.param_sd[p];
      }
      table.values[r * ncol + c] = s.ess;
    }
    return table;
  }
};

inline void write_filter_csv(const std::string& path, const FilterResult& r) {
  write_trajectory_csv(r.to_table(), path);
}

namespace detail {

struct ResolvedEvidence {
  int obs_index;
  double value;
};

/// Snap evidence to grid rows and resolve each point against an observation
/// node. Reports unobservable variables and off-grid times as validation
/// errors before any filtering starts.
inline std::map<std::size_t, std::vector<ResolvedEvidence>> resolve_evidence(
    const DbnTemplate& tpl, const GridSpec& grid, const EvidenceStream& ev) {
  std::map<std::size_t, std::vector<ResolvedEvidence>> by_step;
  for (const auto& p : ev.points) {
    int obs = tpl.observation_index(p.variable);
    if (obs < 0) {
      throw_validation("evidence on variable '" + p.variable +
                       "' which has no observation node");
    }
    if (!std::isfinite(p.value)) {
      throw_validation("evidence value for '" + p.variable +
                       "' is not finite");
    }
    std::size_t idx = snap_to_grid(p.t, grid);
    by_step[idx].push_back({obs, p.value});
  }
  return by_step;
}

inline void run_chunked(std::size_t n, unsigned n_threads,
                        const std::function<void(std::size_t, std::size_t,
                                                 std::size_t)>& body) {
  unsigned hw = std::thread::hardware_concurrency();
  unsigned t = n_threads == 0 ? (hw == 0 ? 1 : hw) : n_threads;
  if (t <= 1 || n < 2 * t) {
    body(0, n, 0);
    return;
  }
  std::size_t chunk = (n + t - 1) / t;
  std::vector<std::thread> threads;
  for (unsigned k = 0; k < t; ++k) {
    std::size_t lo = k * chunk;
    std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    threads.emplace_back([&body, lo, hi, k] { body(lo, hi, k); });
  }
  for (auto& th : threads) th.join();
}

}  // namespace detail

/// Bootstrap particle filter over the full grid. Every grid row gets a
/// posterior summary; evidence rows additionally reweight, and resampling
/// triggers when the effective sample size drops below the threshold.
/// Output is identical for any thread count: every random draw is keyed by
/// (seed, purpose, step, particle), never by execution order.
inline FilterResult run_filter(const DbnTemplate& tpl, const GridSpec& grid,
                               const EvidenceStream& evidence,
                               const FilterConfig& cfg,
                               const InputSet& inputs = {}) {
  grid.validate();
  if (std::abs(grid.dt - tpl.dt) > 1e-12 * std::max(1.0, std::abs(tpl.dt))) {
    throw_validation("filter grid dt does not match the template dt");
  }
  if (!(cfg.resample_threshold > 0.0 && cfg.resample_threshold <= 1.0)) {
    throw_validation("filter: resample_threshold must lie in (0, 1]");
  }
  const ModelSpec& m = tpl.model;
  if (inputs.size() != m.n_inputs()) {
    throw_validation("filter: model needs " + std::to_string(m.n_inputs()) +
                     " input series, got " + std::to_string(inputs.size()));
  }
  std::size_t n_steps = grid.n_steps();
  if (m.n_inputs() > 0) inputs.require_coverage(grid.t_start, grid.t_end);

  auto by_step = detail::resolve_evidence(tpl, grid, evidence);

  // Input values at every grid time, computed once up front.
  std::vector<double> step_inputs((n_steps + 1) * std::max<std::size_t>(
                                      m.n_inputs(), 1));
  if (m.n_inputs() > 0) {
    for (std::size_t i = 0; i <= n_steps; ++i) {
      inputs.values_at(grid.time(i), step_inputs.data() + i * m.n_inputs());
    }
  }

  ParticleEnsemble ens = init_particles(tpl, cfg);
  const double neg_inf = -std::numeric_limits<double>::infinity();

  FilterResult result;
  for (const auto& v : m.variables) result.variable_names.push_back(v.name);
  for (const auto& p : m.parameters) {
    result.parameter_names.push_back(p.name);
  }

  std::vector<double> weights;
  for (std::size_t step = 0; step <= n_steps; ++step) {
    bool weights_dirty = false;
    if (step > 0) {
      double t_left = grid.time(step - 1);
      const double* in_vals =
          m.n_inputs() > 0 ? step_inputs.data() + (step - 1) * m.n_inputs()
                           : nullptr;
      std::vector<char> died(ens.n, 0);
      detail::run_chunked(
          ens.n, cfg.n_threads,
          [&](std::size_t lo, std::size_t hi, std::size_t) {
            detail::TransitionWorkspace ws;
            ws.resize(m);
            for (std::size_t i = lo; i < hi; ++i) {
              RandomStream rng(cfg.seed, stream_purpose::kTransition, step, i);
              bool ok = detail::transition_inplace(
                  tpl, t_left, ens.param_row(i), ens.state_row(i), rng,
                  in_vals, ws);
              if (!ok) died[i] = 1;
            }
          });
      for (std::size_t i = 0; i < ens.n; ++i) {
        if (died[i]) {
          ens.log_weights[i] = neg_inf;
          weights_dirty = true;
        }
      }
    }

    auto ev_it = by_step.find(step);
    if (ev_it != by_step.end()) {
      result.assimilated_times.push_back(grid.time(step));
      for (const auto& e : ev_it->second) {
        const ObservationNode& node = tpl.observation_nodes[e.obs_index];
        for (std::size_t i = 0; i < ens.n; ++i) {
          double z =
              (e.value - ens.state_row(i)[node.var_index]) / node.noise_sd;
          ens.log_weights[i] +=
              -0.5 * z * z - std::log(node.noise_sd) - 0.5 * kLogTwoPi;
        }
      }
      weights_dirty = true;
    }

    double ess = normalize_weights(ens.log_weights, weights);
    result.times.push_back(grid.time(step));
    result.steps.push_back(posterior_summary(ens, weights, ess));

    if (weights_dirty && ess < cfg.resample_threshold *
                                   static_cast<double>(ens.n)) {
      RandomStream rng(cfg.seed, stream_purpose::kResample, step, 0);
      resample_ensemble(ens,
                        systematic_resample_indices(weights, rng.uniform()));
    }
  }
  return result;
}

}  // namespace odebn
