#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "odebn/config.hpp"
#include "odebn/dbn.hpp"
#include "odebn/error.hpp"
#include "odebn/evidence.hpp"
#include "odebn/filter.hpp"
#include "odebn/integrate.hpp"
#include "odebn/metrics.hpp"
#include "odebn/model.hpp"
#include "odebn/svg.hpp"
#include "odebn/trajectory.hpp"

namespace odebn {

inline std::string read_text_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw_io("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  if (is.bad()) throw_io("failed while reading '" + path + "'");
  return ss.str();
}

inline ModelSpec load_model_file(const std::string& path) {
  return parse_model(read_text_file(path));
}

namespace detail {

/// True parameter values in declaration order; every model parameter must be
/// pinned, and no unknown names are accepted.
inline std::vector<double> resolve_true_params(
    const ModelSpec& m, const std::map<std::string, double>& given) {
  for (const auto& [name, _] : given) {
    if (m.parameter_index(name) < 0) {
      throw_validation("true_params names unknown parameter '" + name + "'");
    }
  }
  std::vector<double> out;
  for (const auto& p : m.parameters) {
    auto it = given.find(p.name);
    if (it == given.end()) {
      throw_validation("true_params is missing parameter '" + p.name + "'");
    }
    out.push_back(it->second);
  }
  return out;
}

inline InputSet load_inputs(const RunConfig& cfg, const ModelSpec& m) {
  if (m.n_inputs() == 0) return InputSet();
  if (cfg.inputs_path.empty()) {
    throw_validation("model declares inputs but the config has no inputs.path");
  }
  Trajectory series = read_trajectory_csv(cfg.resolve(cfg.inputs_path));
  return InputSet(m, series);
}

inline GridSpec fine_grid(const GridSpec& g) {
  return GridSpec{g.t_start, g.t_end, g.dt / 10.0};
}

}  // namespace detail

/// Reference trajectory for a run: RK4 at a tenth of the filter step, or a
/// caller-supplied file that must cover every model variable.
inline Trajectory build_truth(const RunConfig& cfg, const ModelSpec& m,
                              const InputSet& inputs) {
  if (cfg.truth.source == TruthSpec::Source::File) {
    Trajectory t = read_trajectory_csv(cfg.resolve(cfg.truth.path));
    for (const auto& v : m.variables) t.require_column(v.name);
    return t;
  }
  std::vector<double> params = detail::resolve_true_params(m, cfg.true_params);
  return integrate(m, params, detail::fine_grid(cfg.grid), Method::Rk4,
                   inputs);
}

struct SimulateOutcome {
  Trajectory truth;
  std::string truth_path;
};

/// `simulate`: write the RK4 reference trajectory for a config.
inline SimulateOutcome cmd_simulate(const RunConfig& cfg) {
  ModelSpec m = load_model_file(cfg.resolve(cfg.model_path));
  InputSet inputs = detail::load_inputs(cfg, m);
  SimulateOutcome out;
  out.truth = build_truth(cfg, m, inputs);
  std::filesystem::create_directories(cfg.output_dir);
  out.truth_path =
      (std::filesystem::path(cfg.output_dir) / "truth.csv").string();
  write_trajectory_csv(out.truth, out.truth_path);
  return out;
}

struct FilterOutcome {
  ModelSpec model;
  Trajectory truth;
  EvidenceStream evidence;
  FilterResult result;
  std::vector<MetricReport> metrics;
  std::string result_path;
  std::string metrics_path;
  std::string evidence_path;  // empty when evidence came from a file
};

/// `filter`: assemble truth and evidence per the config, run the bootstrap
/// filter over the grid, and write result CSV plus metrics JSON.
inline FilterOutcome cmd_filter(const RunConfig& cfg) {
  FilterOutcome out;
  out.model = load_model_file(cfg.resolve(cfg.model_path));
  const ModelSpec& m = out.model;
  InputSet inputs = detail::load_inputs(cfg, m);
  out.truth = build_truth(cfg, m, inputs);

  if (!cfg.has_evidence) {
    throw_validation("filter requires an 'evidence' section in the config");
  }
  bool sampled = cfg.evidence.source == EvidenceSpec::Source::Sample;
  if (sampled) {
    std::vector<double> noise_sds = cfg.evidence.noise_sd.resolve(
        cfg.evidence.schedule.variables, "evidence.noise_sd");
    out.evidence = sample_evidence(out.truth, cfg.evidence.schedule,
                                   noise_sds, cfg.filter.seed);
  } else {
    out.evidence = read_evidence_csv(cfg.resolve(cfg.evidence.path));
  }

  DbnTemplate tpl = compile_dbn(m, cfg.grid.dt, cfg.noise);
  FilterConfig fcfg = cfg.filter;
  std::vector<std::string> var_names;
  for (const auto& v : m.variables) var_names.push_back(v.name);
  fcfg.init_state_sd = cfg.init_state_sd.resolve(var_names, "init_state_sd");
  out.result = run_filter(tpl, cfg.grid, out.evidence, fcfg, inputs);

  for (std::size_t v = 0; v < var_names.size(); ++v) {
    std::vector<double> est;
    est.reserve(out.result.n_rows());
    for (const auto& s : out.result.steps) est.push_back(s.var_mean[v]);
    out.metrics.push_back(metrics_against_reference(
        var_names[v], out.truth, out.result.times, est));
  }

  std::filesystem::create_directories(cfg.output_dir);
  std::filesystem::path dir(cfg.output_dir);
  out.result_path = (dir / "result.csv").string();
  out.metrics_path = (dir / "metrics.json").string();
  write_filter_csv(out.result_path, out.result);
  write_metrics_json(out.metrics_path, out.metrics);
  if (sampled) {
    out.evidence_path = (dir / "evidence.csv").string();
    write_evidence_csv(out.evidence_path, out.evidence);
  }
  return out;
}

/// `plot`: one variable from a result table plus truth overlay and optional
/// evidence dots, rendered to an SVG file.
inline void cmd_plot(const std::string& result_path,
                     const std::string& truth_path,
                     const std::string& evidence_path,
                     const std::string& variable,
                     const std::string& out_path) {
  Trajectory result = read_trajectory_csv(result_path);
  Trajectory truth = read_trajectory_csv(truth_path);
  EvidenceStream evidence;
  bool have_evidence = !evidence_path.empty();
  if (have_evidence) evidence = read_evidence_csv(evidence_path);
  truth.require_column(variable);  // fail early with the variable named
  std::string svg = plot_variable_svg(result, &truth,
                                      have_evidence ? &evidence : nullptr,
                                      variable);
  write_svg(out_path, svg);
}

/// `validate`: parse and validate a model file, then print its structure as
/// the compiled network's node/parent listing.
inline void cmd_validate(const std::string& model_path, std::ostream& os) {
  ModelSpec m = load_model_file(model_path);
  DbnTemplate tpl = compile_dbn(m, 1.0);
  os << "model '" << m.name << "': ok\n";
  os << "  variables: " << m.n_vars() << ", parameters: " << m.n_params()
     << ", inputs: " << m.n_inputs() << ", observations: "
     << m.observations.size() << "\n";
  for (const auto& node : tpl.variable_nodes) {
    os << "  variable " << node.name << " <- {";
    for (std::size_t i = 0; i < node.parents.size(); ++i) {
      if (i) os << ", ";
      os << node.parents[i];
    }
    os << "}\n";
  }
  for (const auto& node : tpl.parameter_nodes) {
    os << "  parameter " << node.name << " <- {" << node.name << "}\n";
  }
  char sd[32];
  for (const auto& node : tpl.observation_nodes) {
    std::snprintf(sd, sizeof sd, "%g", node.noise_sd);
    os << "  observation of " << node.variable << " (noise_sd " << sd << ")\n";
  }
}

}  // namespace odebn
