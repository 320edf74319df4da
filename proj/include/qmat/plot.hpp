#pragma once

#include <array>
#include <string>
#include <vector>

namespace qmat {

// Minimal self-rendered line plot, enough for a per-coefficient accuracy
// curve: axes, tick labels, one polyline per series.
struct LinePlot {
  struct Series {
    std::vector<double> values;  // x is the 1-based index
    std::array<std::uint8_t, 3> color{0, 0, 0};
  };
  std::vector<Series> series;
  double y_min = 0.0;
  double y_max = 1.0;
  int width = 640;
  int height = 440;
};

void render_line_plot(const LinePlot& plot, const std::string& png_path);

}  // namespace qmat
