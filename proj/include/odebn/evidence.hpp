#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "odebn/error.hpp"
#include "odebn/random.hpp"
#include "odebn/trajectory.hpp"

namespace odebn {

/// One observed value of one variable at one time point.
struct EvidencePoint {
  double t = 0.0;
  std::string variable;
  double value = 0.0;
};

struct EvidenceStream {
  std::vector<EvidencePoint> points;  // sorted by t, ties keep file order

  void validate() const {
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (!std::isfinite(points[i].t) || !std::isfinite(points[i].value)) {
        throw_validation("evidence point " + std::to_string(i) +
                         " is not finite");
      }
      if (i > 0 && points[i].t < points[i - 1].t) {
        throw_validation("evidence times are not sorted at point " +
                         std::to_string(i));
      }
    }
  }

  void sort_by_time() {
    std::stable_sort(points.begin(), points.end(),
                     [](const EvidencePoint& a, const EvidencePoint& b) {
                       return a.t < b.t;
                     });
  }
};

/// Nearest grid index for an evidence time. Evidence must land within half a
/// step of a grid point; anything farther is a validation error.
inline std::size_t snap_to_grid(double t, const GridSpec& grid) {
  double pos = (t - grid.t_start) / grid.dt;
  long long idx = std::llround(pos);
  if (idx < 0) idx = 0;
  long long last = static_cast<long long>(grid.n_steps());
  if (idx > last) idx = last;
  double snapped = grid.time(static_cast<std::size_t>(idx));
  if (std::abs(t - snapped) > 0.5 * grid.dt * (1.0 + 1e-9)) {
    throw_validation("evidence time " + detail::format_double(t) +
                     " is more than dt/2 from the nearest grid point");
  }
  return static_cast<std::size_t>(idx);
}

inline void write_evidence_csv(std::ostream& os, const EvidenceStream& ev) {
  os << "t,variable,value\n";
  char buf[64];
  for (const auto& p : ev.points) {
    std::snprintf(buf, sizeof buf, "%.17g", p.t);
    os << buf << ',' << p.variable << ',';
    std::snprintf(buf, sizeof buf, "%.17g", p.value);
    os << buf << '\n';
  }
}

inline void write_evidence_csv(const std::string& path,
                               const EvidenceStream& ev) {
  std::ofstream os(path);
  if (!os) throw_io("cannot open '" + path + "' for writing");
  write_evidence_csv(os, ev);
  if (!os.good()) throw_io("failed while writing '" + path + "'");
}

/// Rows may arrive unsorted and are sorted silently; an exact duplicate
/// (time, variable) pair is an error.
inline EvidenceStream read_evidence_csv(std::istream& is) {
  EvidenceStream ev;
  std::string line;
  if (!std::getline(is, line)) throw_io("evidence file is empty");
  auto header = detail::split_csv_line(line);
  if (header.size() != 3 || header[0] != "t" || header[1] != "variable" ||
      header[2] != "value") {
    throw_validation("evidence header must be t,variable,value");
  }
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != 3) {
      throw_validation("evidence line " + std::to_string(line_no) +
                       " does not have 3 cells");
    }
    EvidencePoint p;
    p.t = detail::parse_csv_double(cells[0], line_no);
    p.variable = cells[1];
    if (p.variable.empty()) {
      throw_validation("evidence line " + std::to_string(line_no) +
                       " has an empty variable name");
    }
    p.value = detail::parse_csv_double(cells[2], line_no);
    ev.points.push_back(std::move(p));
  }
  ev.sort_by_time();
  std::set<std::pair<double, std::string>> seen;
  for (const auto& p : ev.points) {
    if (!seen.insert({p.t, p.variable}).second) {
      throw_validation("duplicate evidence for '" + p.variable + "' at t = " +
                       detail::format_double(p.t));
    }
  }
  ev.validate();
  return ev;
}

inline EvidenceStream read_evidence_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw_io("cannot open '" + path + "'");
  return read_evidence_csv(is);
}

/// How observation times are placed inside the grid span.
enum class ScheduleKind {
  Uniform,    // n times drawn uniformly at random over the span
  Geometric,  // n times with geometrically growing gaps (front-loaded)
  Explicit,   // caller-provided times
};

struct SamplingSchedule {
  ScheduleKind kind = ScheduleKind::Uniform;
  std::size_t n = 0;
  double ratio = 1.5;                 // geometric gap growth factor
  std::uint64_t seed = 0;             // uniform draw seed
  std::vector<double> times;          // explicit times
  std::vector<std::string> variables;  // which variables get observed
};

/// Observation times for a schedule over [t_start, t_end], sorted. The
/// geometric kind places time k of n at the fraction (r^k - 1)/(r^n - 1) of
/// the span, which packs points toward the start.
inline std::vector<double> schedule_times(const SamplingSchedule& s,
                                          double t_start, double t_end) {
  if (!(t_end > t_start)) {
    throw_validation("schedule: span must have t_end > t_start");
  }
  std::vector<double> out;
  double span = t_end - t_start;
  switch (s.kind) {
    case ScheduleKind::Uniform: {
      if (s.n == 0) throw_validation("schedule: n must be >= 1");
      RandomStream rng(s.seed, stream_purpose::kSchedule, 0, 0);
      for (std::size_t k = 0; k < s.n; ++k) {
        out.push_back(t_start + span * rng.uniform());
      }
      std::sort(out.begin(), out.end());
      break;
    }
    case ScheduleKind::Geometric: {
      if (s.n == 0) throw_validation("schedule: n must be >= 1");
      if (!(s.ratio > 1.0)) {
        throw_validation("schedule: geometric ratio must be > 1");
      }
      double denom = std::pow(s.ratio, static_cast<double>(s.n)) - 1.0;
      for (std::size_t k = 1; k <= s.n; ++k) {
        double frac = (std::pow(s.ratio, static_cast<double>(k)) - 1.0) / denom;
        out.push_back(t_start + span * frac);
      }
      break;
    }
    case ScheduleKind::Explicit: {
      if (s.times.empty()) throw_validation("schedule: no explicit times");
      for (std::size_t i = 1; i < s.times.size(); ++i) {
        if (!(s.times[i] > s.times[i - 1])) {
          throw_validation("schedule: explicit times must be strictly "
                           "increasing");
        }
      }
      for (double t : s.times) {
        if (t < t_start || t > t_end) {
          throw_validation("schedule time " + detail::format_double(t) +
                           " lies outside the span");
        }
      }
      out = s.times;
      break;
    }
  }
  return out;
}

/// Draw evidence from a truth trajectory at scheduled times. `noise_sds`
/// pairs with `schedule.variables`; a zero sd copies the truth value exactly.
inline EvidenceStream sample_evidence(const Trajectory& truth,
                                      const SamplingSchedule& schedule,
                                      const std::vector<double>& noise_sds,
                                      std::uint64_t noise_seed) {
  if (schedule.variables.empty()) {
    throw_validation("sample_evidence: schedule names no variables");
  }
  if (noise_sds.size() != schedule.variables.size()) {
    throw_validation("sample_evidence: one noise sd per variable required");
  }
  if (truth.times.empty()) {
    throw_validation("sample_evidence: truth trajectory is empty");
  }
  std::vector<std::size_t> cols;
  for (const auto& name : schedule.variables) {
    cols.push_back(truth.require_column(name));
  }
  std::vector<double> times =
      schedule_times(schedule, truth.times.front(), truth.times.back());
  EvidenceStream ev;
  for (std::size_t i = 0; i < times.size(); ++i) {
    for (std::size_t v = 0; v < cols.size(); ++v) {
      EvidencePoint p;
      p.t = times[i];
      p.variable = schedule.variables[v];
      p.value = truth.interpolate(cols[v], times[i]);
      if (noise_sds[v] > 0.0) {
        RandomStream rng(noise_seed, stream_purpose::kEvidenceNoise, i, v);
        p.value += noise_sds[v] * rng.normal();
      }
      ev.points.push_back(std::move(p));
    }
  }
  ev.validate();
  return ev;
}

}  // namespace odebn
