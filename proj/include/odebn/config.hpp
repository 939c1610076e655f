#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "odebn/dbn.hpp"
#include "odebn/error.hpp"
#include "odebn/evidence.hpp"
#include "odebn/filter.hpp"
#include "odebn/trajectory.hpp"

namespace odebn {

/// A scalar noise setting that is either one value broadcast to every name
/// or a per-name map.
struct SdSpec {
  bool is_map = false;
  double value = 0.0;
  std::map<std::string, double> by_name;

  std::vector<double> resolve(const std::vector<std::string>& names,
                              const std::string& what) const {
    std::vector<double> out;
    out.reserve(names.size());
    for (const auto& n : names) {
      double v = value;
      if (is_map) {
        auto it = by_name.find(n);
        v = it == by_name.end() ? 0.0 : it->second;
      }
      if (v < 0.0) {
        throw_validation(what + " for '" + n + "' must be >= 0");
      }
      out.push_back(v);
    }
    return out;
  }
};

struct TruthSpec {
  enum class Source { GenerateRk4, File };
  Source source = Source::GenerateRk4;
  std::string path;  // set when source is File
};

struct EvidenceSpec {
  enum class Source { File, Sample };
  Source source = Source::Sample;
  std::string path;  // set when source is File
  SamplingSchedule schedule;
  SdSpec noise_sd;
};

/// One benchmark run: which model, which grid, how the truth and evidence
/// come to exist, and how the filter is configured.
struct RunConfig {
  std::string model_path;
  GridSpec grid;
  FilterConfig filter;
  SdSpec init_state_sd;
  NoiseConfig noise;
  TruthSpec truth;
  bool has_evidence = false;
  EvidenceSpec evidence;
  std::map<std::string, double> true_params;
  std::string inputs_path;  // optional exogenous input CSV
  std::string output_dir;
  std::string base_dir;  // directory of the config file itself

  std::string resolve(const std::string& path) const {
    std::filesystem::path p(path);
    if (p.is_absolute() || base_dir.empty()) return path;
    return (std::filesystem::path(base_dir) / p).string();
  }
};

namespace detail {

inline void require_keys(const nlohmann::json& j,
                         const std::set<std::string>& allowed,
                         const std::string& context) {
  if (!j.is_object()) {
    throw_validation("config: " + context + " must be a JSON object");
  }
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) {
      throw_validation("config: unknown key '" + key + "' in " + context);
    }
  }
}

inline double get_number(const nlohmann::json& j, const std::string& key,
                         const std::string& context) {
  if (!j.contains(key) || !j.at(key).is_number()) {
    throw_validation("config: " + context + " needs a numeric '" + key + "'");
  }
  return j.at(key).get<double>();
}

inline double get_number_or(const nlohmann::json& j, const std::string& key,
                            double fallback, const std::string& context) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) {
    throw_validation("config: '" + key + "' in " + context +
                     " must be a number");
  }
  return j.at(key).get<double>();
}

inline std::uint64_t get_uint_or(const nlohmann::json& j,
                                 const std::string& key, std::uint64_t fb,
                                 const std::string& context) {
  if (!j.contains(key)) return fb;
  const auto& v = j.at(key);
  bool ok = v.is_number_integer() &&
            (v.is_number_unsigned() || v.get<long long>() >= 0);
  if (!ok) {
    throw_validation("config: '" + key + "' in " + context +
                     " must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

inline std::string get_string(const nlohmann::json& j, const std::string& key,
                              const std::string& context) {
  if (!j.contains(key) || !j.at(key).is_string()) {
    throw_validation("config: " + context + " needs a string '" + key + "'");
  }
  return j.at(key).get<std::string>();
}

inline SdSpec parse_sd_spec(const nlohmann::json& v,
                            const std::string& context) {
  SdSpec out;
  if (v.is_number()) {
    out.value = v.get<double>();
    if (out.value < 0.0) {
      throw_validation("config: " + context + " must be >= 0");
    }
    return out;
  }
  if (v.is_object()) {
    out.is_map = true;
    for (const auto& [key, val] : v.items()) {
      if (!val.is_number()) {
        throw_validation("config: " + context + "." + key +
                         " must be a number");
      }
      out.by_name[key] = val.get<double>();
    }
    return out;
  }
  throw_validation("config: " + context +
                   " must be a number or an object of numbers");
}

inline SamplingSchedule parse_schedule(const nlohmann::json& j) {
  const std::string ctx = "evidence.schedule";
  std::string kind = get_string(j, "kind", ctx);
  SamplingSchedule s;
  std::set<std::string> allowed = {"kind", "variables"};
  if (kind == "explicit") {
    s.kind = ScheduleKind::Explicit;
    allowed.insert("times");
    require_keys(j, allowed, ctx);
    if (!j.contains("times") || !j.at("times").is_array()) {
      throw_validation("config: explicit schedule needs a 'times' array");
    }
    for (const auto& t : j.at("times")) {
      if (!t.is_number()) {
        throw_validation("config: schedule times must be numbers");
      }
      s.times.push_back(t.get<double>());
    }
    for (std::size_t i = 1; i < s.times.size(); ++i) {
      if (!(s.times[i] > s.times[i - 1])) {
        throw_validation("config: explicit times must be strictly increasing");
      }
    }
  } else if (kind == "uniform_random") {
    s.kind = ScheduleKind::Uniform;
    allowed.insert("n");
    allowed.insert("seed");
    require_keys(j, allowed, ctx);
    s.n = static_cast<std::size_t>(get_uint_or(j, "n", 0, ctx));
    if (s.n == 0) throw_validation("config: schedule n must be >= 1");
    s.seed = get_uint_or(j, "seed", 0, ctx);
  } else if (kind == "geometric_front_loaded") {
    s.kind = ScheduleKind::Geometric;
    allowed.insert("n");
    allowed.insert("ratio");
    require_keys(j, allowed, ctx);
    s.n = static_cast<std::size_t>(get_uint_or(j, "n", 0, ctx));
    if (s.n == 0) throw_validation("config: schedule n must be >= 1");
    s.ratio = get_number(j, "ratio", ctx);
    if (!(s.ratio > 1.0)) {
      throw_validation("config: geometric schedule ratio must be > 1");
    }
  } else {
    throw_validation("config: unknown schedule kind '" + kind + "'");
  }
  if (!j.contains("variables") || !j.at("variables").is_array() ||
      j.at("variables").empty()) {
    throw_validation("config: schedule needs a non-empty 'variables' array");
  }
  for (const auto& v : j.at("variables")) {
    if (!v.is_string()) {
      throw_validation("config: schedule variables must be strings");
    }
    s.variables.push_back(v.get<std::string>());
  }
  return s;
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j) {
  using namespace detail;
  require_keys(j, {"model_path", "grid", "filter", "noise", "truth",
                   "evidence", "true_params", "inputs", "output_dir"},
               "top level");
  RunConfig cfg;
  cfg.model_path = get_string(j, "model_path", "top level");
  cfg.output_dir = get_string(j, "output_dir", "top level");

  if (!j.contains("grid")) throw_validation("config: missing 'grid'");
  const auto& g = j.at("grid");
  require_keys(g, {"t_start", "t_end", "dt"}, "grid");
  cfg.grid.t_start = get_number(g, "t_start", "grid");
  cfg.grid.t_end = get_number(g, "t_end", "grid");
  cfg.grid.dt = get_number(g, "dt", "grid");
  cfg.grid.validate();

  if (j.contains("filter")) {
    const auto& f = j.at("filter");
    require_keys(f,
                 {"n_particles", "resample_threshold", "seed",
                  "init_state_sd", "n_threads"},
                 "filter");
    cfg.filter.n_particles = static_cast<std::size_t>(
        get_uint_or(f, "n_particles", cfg.filter.n_particles, "filter"));
    if (cfg.filter.n_particles == 0) {
      throw_validation("config: filter.n_particles must be >= 1");
    }
    cfg.filter.resample_threshold = get_number_or(
        f, "resample_threshold", cfg.filter.resample_threshold, "filter");
    cfg.filter.seed = get_uint_or(f, "seed", cfg.filter.seed, "filter");
    cfg.filter.n_threads = static_cast<unsigned>(
        get_uint_or(f, "n_threads", cfg.filter.n_threads, "filter"));
    if (f.contains("init_state_sd")) {
      cfg.init_state_sd =
          parse_sd_spec(f.at("init_state_sd"), "filter.init_state_sd");
    }
  }

  if (j.contains("noise")) {
    const auto& n = j.at("noise");
    require_keys(n, {"walk_sd_fraction", "process_noise_sd"}, "noise");
    cfg.noise.walk_sd_fraction = get_number_or(
        n, "walk_sd_fraction", cfg.noise.walk_sd_fraction, "noise");
    cfg.noise.process_noise_sd = get_number_or(
        n, "process_noise_sd", cfg.noise.process_noise_sd, "noise");
    if (cfg.noise.walk_sd_fraction < 0.0 || cfg.noise.process_noise_sd < 0.0) {
      throw_validation("config: noise sds must be >= 0");
    }
  }

  if (!j.contains("truth")) throw_validation("config: missing 'truth'");
  const auto& t = j.at("truth");
  std::string source = get_string(t, "source", "truth");
  if (source == "generate_rk4") {
    require_keys(t, {"source"}, "truth");
    cfg.truth.source = TruthSpec::Source::GenerateRk4;
  } else if (source == "file") {
    require_keys(t, {"source", "path"}, "truth");
    cfg.truth.source = TruthSpec::Source::File;
    cfg.truth.path = get_string(t, "path", "truth");
  } else {
    throw_validation("config: truth.source must be generate_rk4 or file");
  }

  if (j.contains("evidence")) {
    cfg.has_evidence = true;
    const auto& e = j.at("evidence");
    std::string esrc = get_string(e, "source", "evidence");
    if (esrc == "file") {
      require_keys(e, {"source", "path"}, "evidence");
      cfg.evidence.source = EvidenceSpec::Source::File;
      cfg.evidence.path = get_string(e, "path", "evidence");
    } else if (esrc == "sample") {
      require_keys(e, {"source", "schedule", "noise_sd"}, "evidence");
      cfg.evidence.source = EvidenceSpec::Source::Sample;
      if (!e.contains("schedule")) {
        throw_validation("config: sampled evidence needs a 'schedule'");
      }
      cfg.evidence.schedule = parse_schedule(e.at("schedule"));
      if (e.contains("noise_sd")) {
        cfg.evidence.noise_sd =
            parse_sd_spec(e.at("noise_sd"), "evidence.noise_sd");
      }
    } else {
      throw_validation("config: evidence.source must be file or sample");
    }
  }

  if (j.contains("true_params")) {
    const auto& tp = j.at("true_params");
    if (!tp.is_object()) {
      throw_validation("config: true_params must be an object");
    }
    for (const auto& [key, val] : tp.items()) {
      if (!val.is_number()) {
        throw_validation("config: true_params." + key + " must be a number");
      }
      cfg.true_params[key] = val.get<double>();
    }
  }

  if (j.contains("inputs")) {
    const auto& in = j.at("inputs");
    require_keys(in, {"path"}, "inputs");
    cfg.inputs_path = get_string(in, "path", "inputs");
  }
  return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw_io("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw_validation("config '" + path + "': " + e.what());
  }
  RunConfig cfg = parse_run_config(j);
  cfg.base_dir = std::filesystem::path(path).parent_path().string();
  return cfg;
}

}  // namespace odebn
