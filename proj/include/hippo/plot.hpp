#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hippo {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = true;
  int width = 720;
  int height = 480;
};

/// Static SVG line chart with a legend. Nonpositive values are dropped on a log axis.
void write_svg(std::ostream& out, const PlotSpec& spec, const std::vector<Series>& series);

}  // namespace hippo
