#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "odebn/error.hpp"
#include "odebn/evidence.hpp"
#include "odebn/trajectory.hpp"

namespace odebn {
namespace detail {

inline std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string fmt_coord(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

inline std::string fmt_tick(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

/// Round tick positions covering [lo, hi] with roughly `target` intervals.
inline std::vector<double> nice_ticks(double lo, double hi, int target = 6) {
  double range = hi - lo;
  if (!(range > 0.0)) return {lo};
  double raw = range / target;
  double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double mult : {1.0, 2.0, 5.0, 10.0}) {
    if (mult * mag >= raw) {
      step = mult * mag;
      break;
    }
  }
  std::vector<double> ticks;
  double first = std::ceil(lo / step - 1e-9) * step;
  for (double v = first; v <= hi + 1e-9 * step; v += step) {
    ticks.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
  }
  return ticks;
}

}  // namespace detail

/// One variable's filter output, truth overlay, and evidence dots as a
/// self-contained SVG chart: shaded band is mean +/- 1 sd, the solid line is
/// the posterior mean, the dashed line is the reference trajectory.
struct PlotData {
  std::vector<double> mean_times;
  std::vector<double> mean;
  std::vector<double> sd;                              // same length as mean
  std::vector<double> truth_times;                     // may be empty
  std::vector<double> truth;
  std::vector<std::pair<double, double>> evidence;     // (t, value)
  std::string variable = "value";
  std::string x_label = "time";
};

inline std::string render_plot_svg(const PlotData& d) {
  if (d.mean_times.size() != d.mean.size() ||
      d.mean.size() != d.sd.size()) {
    throw_validation("plot: mean/sd column lengths differ");
  }
  if (d.truth_times.size() != d.truth.size()) {
    throw_validation("plot: truth column lengths differ");
  }
  if (d.mean_times.empty()) throw_validation("plot: no rows to draw");

  double x_lo = d.mean_times.front();
  double x_hi = d.mean_times.back();
  for (double t : d.truth_times) {
    x_lo = std::min(x_lo, t);
    x_hi = std::max(x_hi, t);
  }
  double y_lo = d.mean[0] - d.sd[0];
  double y_hi = d.mean[0] + d.sd[0];
  for (std::size_t i = 0; i < d.mean.size(); ++i) {
    y_lo = std::min(y_lo, d.mean[i] - d.sd[i]);
    y_hi = std::max(y_hi, d.mean[i] + d.sd[i]);
  }
  for (double v : d.truth) {
    y_lo = std::min(y_lo, v);
    y_hi = std::max(y_hi, v);
  }
  for (const auto& [t, v] : d.evidence) {
    x_lo = std::min(x_lo, t);
    x_hi = std::max(x_hi, t);
    y_lo = std::min(y_lo, v);
    y_hi = std::max(y_hi, v);
  }
  if (!(x_hi > x_lo)) x_hi = x_lo + 1.0;
  double y_pad = 0.05 * (y_hi - y_lo);
  if (!(y_pad > 0.0)) y_pad = std::max(1.0, std::abs(y_lo)) * 0.1;
  y_lo -= y_pad;
  y_hi += y_pad;

  const double width = 860.0, height = 520.0;
  const double ml = 72.0, mr = 24.0, mt = 36.0, mb = 56.0;
  const double pw = width - ml - mr;
  const double ph = height - mt - mb;
  auto px = [&](double t) { return ml + pw * (t - x_lo) / (x_hi - x_lo); };
  auto py = [&](double v) {
    return mt + ph * (1.0 - (v - y_lo) / (y_hi - y_lo));
  };

  using detail::fmt_coord;
  using detail::fmt_tick;
  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         fmt_tick(width) + "\" height=\"" + fmt_tick(height) +
         "\" viewBox=\"0 0 " + fmt_tick(width) + " " + fmt_tick(height) +
         "\" font-family=\"sans-serif\" font-size=\"13\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  for (double tv : detail::nice_ticks(x_lo, x_hi)) {
    double x = px(tv);
    svg += "<line x1=\"" + fmt_coord(x) + "\" y1=\"" + fmt_coord(mt) +
           "\" x2=\"" + fmt_coord(x) + "\" y2=\"" + fmt_coord(mt + ph) +
           "\" stroke=\"#e0e0e0\"/>\n";
    svg += "<text x=\"" + fmt_coord(x) + "\" y=\"" + fmt_coord(mt + ph + 18) +
           "\" text-anchor=\"middle\">" + fmt_tick(tv) + "</text>\n";
  }
  for (double tv : detail::nice_ticks(y_lo, y_hi)) {
    double y = py(tv);
    svg += "<line x1=\"" + fmt_coord(ml) + "\" y1=\"" + fmt_coord(y) +
           "\" x2=\"" + fmt_coord(ml + pw) + "\" y2=\"" + fmt_coord(y) +
           "\" stroke=\"#e0e0e0\"/>\n";
    svg += "<text x=\"" + fmt_coord(ml - 8) + "\" y=\"" + fmt_coord(y + 4) +
           "\" text-anchor=\"end\">" + fmt_tick(tv) + "</text>\n";
  }

  std::string band = "<path d=\"M";
  for (std::size_t i = 0; i < d.mean.size(); ++i) {
    if (i) band += " L";
    band += fmt_coord(px(d.mean_times[i])) + " " +
            fmt_coord(py(d.mean[i] + d.sd[i]));
  }
  for (std::size_t k = d.mean.size(); k-- > 0;) {
    band += " L" + fmt_coord(px(d.mean_times[k])) + " " +
            fmt_coord(py(d.mean[k] - d.sd[k]));
  }
  band += " Z\" fill=\"#4a90d9\" fill-opacity=\"0.25\" stroke=\"none\"/>\n";
  svg += band;

  if (!d.truth_times.empty()) {
    svg += "<polyline fill=\"none\" stroke=\"#444444\" stroke-width=\"1.5\" "
           "stroke-dasharray=\"6 4\" points=\"";
    for (std::size_t i = 0; i < d.truth_times.size(); ++i) {
      if (i) svg += ' ';
      svg += fmt_coord(px(d.truth_times[i])) + "," + fmt_coord(py(d.truth[i]));
    }
    svg += "\"/>\n";
  }

  svg += "<polyline fill=\"none\" stroke=\"#1f5fa8\" stroke-width=\"1.8\" "
         "points=\"";
  for (std::size_t i = 0; i < d.mean.size(); ++i) {
    if (i) svg += ' ';
    svg += fmt_coord(px(d.mean_times[i])) + "," + fmt_coord(py(d.mean[i]));
  }
  svg += "\"/>\n";

  for (const auto& [t, v] : d.evidence) {
    svg += "<circle cx=\"" + fmt_coord(px(t)) + "\" cy=\"" +
           fmt_coord(py(v)) + "\" r=\"3.5\" fill=\"#808080\"/>\n";
  }

  // Axes on top of the data, plus labels.
  svg += "<line x1=\"" + fmt_coord(ml) + "\" y1=\"" + fmt_coord(mt + ph) +
         "\" x2=\"" + fmt_coord(ml + pw) + "\" y2=\"" + fmt_coord(mt + ph) +
         "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + fmt_coord(ml) + "\" y1=\"" + fmt_coord(mt) +
         "\" x2=\"" + fmt_coord(ml) + "\" y2=\"" + fmt_coord(mt + ph) +
         "\" stroke=\"black\"/>\n";
  svg += "<text x=\"" + fmt_coord(ml + pw / 2) + "\" y=\"" +
         fmt_coord(height - 14) + "\" text-anchor=\"middle\">" +
         detail::xml_escape(d.x_label) + "</text>\n";
  svg += "<text x=\"18\" y=\"" + fmt_coord(mt + ph / 2) +
         "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " +
         fmt_coord(mt + ph / 2) + ")\">" + detail::xml_escape(d.variable) +
         "</text>\n";

  double lx = ml + pw - 150.0, ly = mt + 14.0;
  svg += "<line x1=\"" + fmt_coord(lx) + "\" y1=\"" + fmt_coord(ly) +
         "\" x2=\"" + fmt_coord(lx + 26) + "\" y2=\"" + fmt_coord(ly) +
         "\" stroke=\"#1f5fa8\" stroke-width=\"1.8\"/>\n";
  svg += "<text x=\"" + fmt_coord(lx + 32) + "\" y=\"" + fmt_coord(ly + 4) +
         "\">mean</text>\n";
  ly += 18.0;
  svg += "<line x1=\"" + fmt_coord(lx) + "\" y1=\"" + fmt_coord(ly) +
         "\" x2=\"" + fmt_coord(lx + 26) + "\" y2=\"" + fmt_coord(ly) +
         "\" stroke=\"#444444\" stroke-width=\"1.5\" "
         "stroke-dasharray=\"6 4\"/>\n";
  svg += "<text x=\"" + fmt_coord(lx + 32) + "\" y=\"" + fmt_coord(ly + 4) +
         "\">truth</text>\n";
  if (!d.evidence.empty()) {
    ly += 18.0;
    svg += "<circle cx=\"" + fmt_coord(lx + 13) + "\" cy=\"" + fmt_coord(ly) +
           "\" r=\"3.5\" fill=\"#808080\"/>\n";
    svg += "<text x=\"" + fmt_coord(lx + 32) + "\" y=\"" + fmt_coord(ly + 4) +
           "\">evidence</text>\n";
  }

  svg += "</svg>\n";
  return svg;
}

/// Assemble PlotData for one variable from a filter summary table, a truth
/// trajectory, and an evidence stream, then render it.
inline std::string plot_variable_svg(const Trajectory& filter_table,
                                     const Trajectory* truth,
                                     const EvidenceStream* evidence,
                                     const std::string& variable) {
  PlotData d;
  d.variable = variable;
  std::size_t mean_col = filter_table.require_column(variable + "_mean");
  std::size_t sd_col = filter_table.require_column(variable + "_sd");
  d.mean_times = filter_table.times;
  for (std::size_t r = 0; r < filter_table.times.size(); ++r) {
    d.mean.push_back(filter_table.at(r, mean_col));
    d.sd.push_back(filter_table.at(r, sd_col));
  }
  if (truth != nullptr) {
    std::size_t tc = truth->require_column(variable);
    d.truth_times = truth->times;
    for (std::size_t r = 0; r < truth->times.size(); ++r) {
      d.truth.push_back(truth->at(r, tc));
    }
  }
  if (evidence != nullptr) {
    for (const auto& p : evidence->points) {
      if (p.variable == variable) d.evidence.emplace_back(p.t, p.value);
    }
  }
  return render_plot_svg(d);
}

inline void write_svg(const std::string& path, const std::string& svg) {
  std::ofstream os(path);
  if (!os) throw_io("cannot open '" + path + "' for writing");
  os << svg;
  if (!os.good()) throw_io("failed while writing '" + path + "'");
}

}  // namespace odebn
