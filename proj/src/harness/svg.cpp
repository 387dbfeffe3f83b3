#include "laser/harness/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>


namespace laser::harness {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  const double a = std::abs(v);
  if (a != 0.0 && (a >= 1e5 || a < 1e-3)) {
    std::snprintf(buf, sizeof(buf), "%.1e", v);
  } else {
    std::snprintf(buf, sizeof(buf), "%.4g", v);
  }
  return buf;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (!(lo <= hi)) {
      lo = 0.0;
      hi = 1.0;
    } else if (lo == hi) {
      lo -= 0.5;
      hi += 0.5;
    } else {
      const double pad = 0.04 * (hi - lo);
      lo -= pad;
      hi += pad;
    }
  }
};

std::vector<double> nice_ticks(double lo, double hi) {
  const double raw = (hi - lo) / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    step = m * mag;
    if (step >= raw) break;
  }
  std::vector<double> ticks;
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * step; t += step) {
    ticks.push_back(std::abs(t) < 1e-12 * step ? 0.0 : t);
  }
  return ticks;
}

}  // namespace

std::string xml_escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string line_chart(const std::vector<Series>& series, const ChartOptions& options) {
  const double left = 70.0;
  const double right = options.legend ? 170.0 : 20.0;
  const double top = 40.0;
  const double bottom = 50.0;
  const double pw = options.width - left - right;
  const double ph = options.height - top - bottom;

  Range xr;
  Range yr;
  for (const auto& s : series) {
    for (double v : s.x) xr.add(v);
    for (double v : s.y) yr.add(v);
    for (double v : s.lower) yr.add(v);
    for (double v : s.upper) yr.add(v);
  }
  if (options.reference_y) yr.add(*options.reference_y);
  xr.finish();
  yr.finish();
  auto px = [&](double x) { return left + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto py = [&](double y) { return top + (yr.hi - y) / (yr.hi - yr.lo) * ph; };

  std::string s;
  s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(options.width) + "\" height=\"" +
       num(options.height) + "\" viewBox=\"0 0 " + num(options.width) + " " + num(options.height) + "\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(options.width / 2) + "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
       "font-size=\"15\">" + xml_escape(options.title) + "</text>\n";

  s += "<g font-family=\"sans-serif\" font-size=\"11\" stroke=\"#000\">\n";
  s += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
       "\" fill=\"none\"/>\n";
  for (double t : nice_ticks(xr.lo, xr.hi)) {
    s += "<line x1=\"" + num(px(t)) + "\" y1=\"" + num(top + ph) + "\" x2=\"" + num(px(t)) + "\" y2=\"" +
         num(top + ph + 5) + "\"/>\n";
    s += "<text x=\"" + num(px(t)) + "\" y=\"" + num(top + ph + 18) + "\" text-anchor=\"middle\" stroke=\"none\">" +
         tick_label(t) + "</text>\n";
  }
  for (double t : nice_ticks(yr.lo, yr.hi)) {
    s += "<line x1=\"" + num(left - 5) + "\" y1=\"" + num(py(t)) + "\" x2=\"" + num(left) + "\" y2=\"" + num(py(t)) +
         "\"/>\n";
    s += "<text x=\"" + num(left - 8) + "\" y=\"" + num(py(t) + 4) + "\" text-anchor=\"end\" stroke=\"none\">" +
         tick_label(t) + "</text>\n";
  }
  s += "</g>\n";
  s += "<text x=\"" + num(left + pw / 2) + "\" y=\"" + num(options.height - 10) +
       "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" + xml_escape(options.x_label) +
       "</text>\n";
  s += "<text x=\"16\" y=\"" + num(top + ph / 2) + "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
       "font-size=\"12\" transform=\"rotate(-90 16 " + num(top + ph / 2) + ")\">" + xml_escape(options.y_label) +
       "</text>\n";

  if (options.reference_y) {
    s += "<line x1=\"" + num(left) + "\" y1=\"" + num(py(*options.reference_y)) + "\" x2=\"" + num(left + pw) +
         "\" y2=\"" + num(py(*options.reference_y)) + "\" stroke=\"#555\" stroke-dasharray=\"6 4\"/>\n";
  }

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& sr = series[k];
    const std::string color = kPalette[k % std::size(kPalette)];
    if (!sr.lower.empty() && sr.lower.size() == sr.x.size() && sr.upper.size() == sr.x.size()) {
      std::string pts;
      for (std::size_t i = 0; i < sr.x.size(); ++i) {
        if (std::isfinite(sr.x[i]) && std::isfinite(sr.upper[i])) pts += num(px(sr.x[i])) + "," + num(py(sr.upper[i])) + " ";
      }
      for (std::size_t i = sr.x.size(); i-- > 0;) {
        if (std::isfinite(sr.x[i]) && std::isfinite(sr.lower[i])) pts += num(px(sr.x[i])) + "," + num(py(sr.lower[i])) + " ";
      }
      s += "<polygon points=\"" + pts + "\" fill=\"" + color + "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
    }
    std::string pts;
    const std::size_t n = std::min(sr.x.size(), sr.y.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(sr.x[i]) || !std::isfinite(sr.y[i])) continue;
      if (!pts.empty()) pts += " ";
      pts += num(px(sr.x[i])) + "," + num(py(sr.y[i]));
    }
    s += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\"/>\n";
  }

  if (options.legend) {
    s += "<g font-family=\"sans-serif\" font-size=\"11\">\n";
    const std::size_t shown = std::min<std::size_t>(series.size(), 20);
    for (std::size_t k = 0; k < shown; ++k) {
      const double y = top + 12 + 16.0 * static_cast<double>(k);
      const double x = left + pw + 12;
      s += "<line x1=\"" + num(x) + "\" y1=\"" + num(y) + "\" x2=\"" + num(x + 20) + "\" y2=\"" + num(y) +
           "\" stroke=\"" + kPalette[k % std::size(kPalette)] + "\" stroke-width=\"2\"/>\n";
      s += "<text x=\"" + num(x + 26) + "\" y=\"" + num(y + 4) + "\">" + xml_escape(series[k].label) + "</text>\n";
    }
    s += "</g>\n";
  }
  s += "</svg>\n";
  return s;
}

}  // namespace laser::harness
