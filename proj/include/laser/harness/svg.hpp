#pragma once

#include <optional>
#include <string>
#include <vector>

namespace laser::harness {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  // Optional shaded band, same length as x.
  std::vector<double> lower;
  std::vector<double> upper;
};

struct ChartOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  double width = 720.0;
  double height = 440.0;
  bool legend = true;
  // Horizontal reference line, e.g. a threshold or a table plane.
  std::optional<double> reference_y;
};

// Static line chart with axes, ticks, one polyline per series and a legend.
// Non-finite points are skipped.
std::string line_chart(const std::vector<Series>& series, const ChartOptions& options);

std::string xml_escape(const std::string& text);

}  // namespace laser::harness
