#pragma once

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "odebn/error.hpp"
#include "odebn/trajectory.hpp"

namespace odebn {

struct MetricReport {
  std::string variable;
  double rmse = 0.0;
  double mae = 0.0;
  std::size_t n_points = 0;
  std::vector<double> eval_times;
};

/// RMSE and MAE of an estimate series against a reference series sampled at
/// the same points.
inline MetricReport compute_metrics(const std::string& variable,
                                    const std::vector<double>& reference,
                                    const std::vector<double>& estimate) {
  if (reference.size() != estimate.size()) {
    throw_validation("metrics: reference and estimate lengths differ");
  }
  if (reference.empty()) {
    throw_validation("metrics: no points to compare");
  }
  double sq = 0.0;
  double ab = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    double e = estimate[i] - reference[i];
    if (!std::isfinite(e)) {
      throw_numeric("metrics: non-finite residual for '" + variable + "'");
    }
    sq += e * e;
    ab += std::abs(e);
  }
  double n = static_cast<double>(reference.size());
  MetricReport r;
  r.variable = variable;
  r.rmse = std::sqrt(sq / n);
  r.mae = ab / n;
  r.n_points = reference.size();
  return r;
}

/// Metrics of an estimate at given times against a (denser) reference
/// trajectory, which is interpolated at those times.
inline MetricReport metrics_against_reference(
    const std::string& variable, const Trajectory& reference,
    const std::vector<double>& times, const std::vector<double>& estimate) {
  std::size_t col = reference.require_column(variable);
  std::vector<double> ref_values;
  ref_values.reserve(times.size());
  for (double t : times) ref_values.push_back(reference.interpolate(col, t));
  MetricReport r = compute_metrics(variable, ref_values, estimate);
  r.eval_times = times;
  return r;
}

/// Metrics between two trajectories, both interpolated at eval_times.
inline MetricReport compute_metrics(const Trajectory& pred,
                                    const Trajectory& truth,
                                    const std::string& variable,
                                    const std::vector<double>& eval_times) {
  if (eval_times.empty()) throw_validation("metrics: empty eval_times");
  std::size_t pc = pred.require_column(variable);
  std::vector<double> est;
  est.reserve(eval_times.size());
  for (double t : eval_times) est.push_back(pred.interpolate(pc, t));
  return metrics_against_reference(variable, truth, eval_times, est);
}

inline nlohmann::json metrics_to_json(const std::vector<MetricReport>& rs) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rs) {
    arr.push_back({{"variable", r.variable},
                   {"rmse", r.rmse},
                   {"mae", r.mae},
                   {"n_points", r.n_points}});
  }
  return arr;
}

inline void write_metrics_json(const std::string& path,
                               const std::vector<MetricReport>& rs) {
  std::ofstream os(path);
  if (!os) throw_io("cannot open '" + path + "' for writing");
  os << metrics_to_json(rs).dump(2) << '\n';
  if (!os.good()) throw_io("failed while writing '" + path + "'");
}

inline std::vector<MetricReport> read_metrics_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw_io("cannot open '" + path + "'");
  nlohmann::json arr;
  try {
    is >> arr;
  } catch (const nlohmann::json::exception& e) {
    throw_validation(std::string("metrics json: ") + e.what());
  }
  if (!arr.is_array()) throw_validation("metrics json: expected an array");
  std::vector<MetricReport> out;
  for (const auto& item : arr) {
    MetricReport r;
    r.variable = item.at("variable").get<std::string>();
    r.rmse = item.at("rmse").get<double>();
    r.mae = item.at("mae").get<double>();
    r.n_points = item.at("n_points").get<std::size_t>();
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace odebn
