#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "odebn/error.hpp"
#include "odebn/model.hpp"

namespace odebn {

/// Fixed integration grid {t_start, t_start + dt, ..., t_start + n*dt}.
struct GridSpec {
  double t_start = 0.0;
  double t_end = 0.0;
  double dt = 0.0;

  void validate() const {
    if (!(dt > 0.0)) throw_validation("grid dt must be > 0");
    if (!(t_start < t_end)) throw_validation("grid requires t_start < t_end");
    if ((t_end - t_start) / dt > 1e7) {
      throw_validation("grid would exceed 1e7 steps");
    }
  }

  /// Number of steps; time(n_steps()) is the last grid point.
  std::size_t n_steps() const {
    return static_cast<std::size_t>(
        std::floor((t_end - t_start) / dt + 1e-9));
  }

  double time(std::size_t i) const {
    return t_start + static_cast<double>(i) * dt;
  }
};

/// Dense time-indexed matrix of values, row per grid time, column per
/// variable. Used for benchmark truth, input series, and posterior summaries.
struct Trajectory {
  std::vector<std::string> variable_names;
  std::vector<double> times;   // strictly increasing
  std::vector<double> values;  // row-major [time][variable]

  std::size_t n_rows() const { return times.size(); }
  std::size_t n_cols() const { return variable_names.size(); }

  double at(std::size_t row, std::size_t col) const {
    return values[row * n_cols() + col];
  }
  double& at(std::size_t row, std::size_t col) {
    return values[row * n_cols() + col];
  }

  int column_index(std::string_view name) const {
    for (std::size_t i = 0; i < variable_names.size(); ++i) {
      if (variable_names[i] == name) return static_cast<int>(i);
    }
    return -1;
  }

  std::size_t require_column(std::string_view name) const {
    int idx = column_index(name);
    if (idx < 0) {
      throw_validation("trajectory has no column '" + std::string(name) + "'");
    }
    return static_cast<std::size_t>(idx);
  }

  void validate() const {
    if (values.size() != n_rows() * n_cols()) {
      throw_validation("trajectory shape mismatch");
    }
    for (std::size_t i = 1; i < times.size(); ++i) {
      if (!(times[i] > times[i - 1])) {
        throw_validation("trajectory times must be strictly increasing");
      }
    }
    for (double v : values) {
      if (!std::isfinite(v)) {
        throw_validation("trajectory contains a non-finite value");
      }
    }
  }

  /// Linear interpolation of one column at time t. Queries may overshoot the
  /// span by a relative 1e-9 (floating-point dust from grid arithmetic);
  /// anything further out is an error.
  double interpolate(std::size_t col, double t) const {
    if (times.empty()) throw_validation("interpolating an empty trajectory");
    double lo = times.front(), hi = times.back();
    double tol = 1e-9 * std::max({1.0, std::abs(lo), std::abs(hi)});
    if (t < lo - tol || t > hi + tol) {
      throw_validation("query time " + std::to_string(t) +
                       " outside trajectory span [" + std::to_string(lo) +
                       ", " + std::to_string(hi) + "]");
    }
    if (t <= lo) return at(0, col);
    if (t >= hi) return at(n_rows() - 1, col);
    auto it = std::upper_bound(times.begin(), times.end(), t);
    std::size_t j = static_cast<std::size_t>(it - times.begin());
    double t0 = times[j - 1], t1 = times[j];
    double w = (t - t0) / (t1 - t0);
    return at(j - 1, col) + w * (at(j, col) - at(j - 1, col));
  }
};

/// Linear interpolation of every column at the query times.
inline Trajectory resample_trajectory(const Trajectory& traj,
                                      const std::vector<double>& query_times) {
  Trajectory out;
  out.variable_names = traj.variable_names;
  out.times = query_times;
  out.values.resize(query_times.size() * traj.n_cols());
  for (std::size_t r = 0; r < query_times.size(); ++r) {
    for (std::size_t c = 0; c < traj.n_cols(); ++c) {
      out.at(r, c) = traj.interpolate(c, query_times[r]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV: header `t,<var1>,<var2>,...`, one row per time, 17 significant digits.

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    // trim surrounding whitespace
    std::size_t a = cell.find_first_not_of(" \t\r");
    std::size_t b = cell.find_last_not_of(" \t\r");
    out.push_back(a == std::string::npos ? std::string()
                                         : cell.substr(a, b - a + 1));
  }
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

inline double parse_csv_double(const std::string& cell, int line_no) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') {
    throw_validation("malformed numeric cell '" + cell + "' at line " +
                     std::to_string(line_no));
  }
  return v;
}

}  // namespace detail

inline void write_trajectory_csv(const Trajectory& traj, std::ostream& out) {
  out << "t";
  for (const auto& n : traj.variable_names) out << "," << n;
  out << "\n";
  char buf[40];
  for (std::size_t r = 0; r < traj.n_rows(); ++r) {
    std::snprintf(buf, sizeof(buf), "%.17g", traj.times[r]);
    out << buf;
    for (std::size_t c = 0; c < traj.n_cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", traj.at(r, c));
      out << "," << buf;
    }
    out << "\n";
  }
}

inline void write_trajectory_csv(const Trajectory& traj,
                                 const std::string& path) {
  std::ofstream f(path);
  if (!f) throw_io("cannot open '" + path + "' for writing");
  write_trajectory_csv(traj, f);
  if (!f.good()) throw_io("error writing '" + path + "'");
}

inline Trajectory read_trajectory_csv(std::istream& in) {
  Trajectory traj;
  std::string line;
  if (!std::getline(in, line)) throw_validation("empty trajectory file");
  auto header = detail::split_csv_line(line);
  if (header.empty() || header[0] != "t") {
    throw_validation("trajectory header must start with 't'");
  }
  traj.variable_names.assign(header.begin() + 1, header.end());
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) {
      throw_validation("row at line " + std::to_string(line_no) + " has " +
                       std::to_string(cells.size()) + " cells, expected " +
                       std::to_string(header.size()));
    }
    traj.times.push_back(detail::parse_csv_double(cells[0], line_no));
    for (std::size_t c = 1; c < cells.size(); ++c) {
      traj.values.push_back(detail::parse_csv_double(cells[c], line_no));
    }
  }
  traj.validate();
  return traj;
}

inline Trajectory read_trajectory_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw_io("cannot open '" + path + "'");
  return read_trajectory_csv(f);
}

// ---------------------------------------------------------------------------
// Exogenous inputs

/// Binds a model's declared inputs to columns of a loaded time series and
/// serves linearly interpolated values on demand.
class InputSet {
 public:
  InputSet() = default;

  InputSet(const ModelSpec& model, Trajectory series)
      : series_(std::move(series)) {
    for (const auto& decl : model.inputs) {
      int col = series_.column_index(decl.column);
      if (col < 0) {
        throw_validation("input series has no column '" + decl.column +
                         "' required by input '" + decl.name + "'");
      }
      columns_.push_back(static_cast<std::size_t>(col));
    }
  }

  std::size_t size() const { return columns_.size(); }

  /// Check that the series covers [t_start, t_end].
  void require_coverage(double t_start, double t_end) const {
    if (columns_.empty()) return;
    double tol = 1e-6 * std::max(1.0, t_end - t_start);
    if (series_.times.empty() || series_.times.front() > t_start + tol ||
        series_.times.back() < t_end - tol) {
      throw_validation("input series does not cover the simulation interval");
    }
  }

  void values_at(double t, double* out) const {
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      out[i] = series_.interpolate(columns_[i], t);
    }
  }

  std::vector<double> values_at(double t) const {
    std::vector<double> out(columns_.size());
    values_at(t, out.data());
    return out;
  }

 private:
  Trajectory series_;
  std::vector<std::size_t> columns_;
};

}  // namespace odebn
