#include "qmat/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "qmat/image_io.hpp"

namespace qmat {
namespace {

// 3x5 digit/point/minus glyphs, row-major bits.
constexpr std::uint16_t kGlyphs[12] = {
    0b111101101101111,  // 0
    0b010110010010111,  // 1
    0b111001111100111,  // 2
    0b111001111001111,  // 3
    0b101101111001001,  // 4
    0b111100111001111,  // 5
    0b111100111101111,  // 6
    0b111001001001001,  // 7
    0b111101111101111,  // 8
    0b111101111001111,  // 9
    0b000000000000010,  // .
    0b000000111000000,  // -
};

struct Canvas {
  PixelImage img;

  Canvas(int h, int w) : img(h, w, 3) {
    std::fill(img.samples.begin(), img.samples.end(), 255);
  }

  void set(int y, int x, const std::array<std::uint8_t, 3>& c) {
    if (y < 0 || y >= img.height || x < 0 || x >= img.width) return;
    img.at(y, x, 0) = c[0];
    img.at(y, x, 1) = c[1];
    img.at(y, x, 2) = c[2];
  }

  void line(int y0, int x0, int y1, int x1, const std::array<std::uint8_t, 3>& c) {
    const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
      set(y0, x0, c);
      if (x0 == x1 && y0 == y1) break;
      const int e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }

  void glyph(int y, int x, int g, const std::array<std::uint8_t, 3>& c) {
    for (int r = 0; r < 5; ++r)
      for (int col = 0; col < 3; ++col)
        if (kGlyphs[g] >> (14 - (r * 3 + col)) & 1) set(y + r, x + col, c);
  }

  void text(int y, int x, const std::string& s, const std::array<std::uint8_t, 3>& c) {
    for (char ch : s) {
      if (ch >= '0' && ch <= '9') glyph(y, x, ch - '0', c);
      else if (ch == '.') glyph(y, x, 10, c);
      else if (ch == '-') glyph(y, x, 11, c);
      x += 4;
    }
  }
};

}  // namespace

void render_line_plot(const LinePlot& plot, const std::string& png_path) {
  const int margin_l = 40, margin_r = 12, margin_t = 12, margin_b = 28;
  Canvas canvas(plot.height, plot.width);
  const std::array<std::uint8_t, 3> black{0, 0, 0};
  const std::array<std::uint8_t, 3> gray{210, 210, 210};

  const int x0 = margin_l, x1 = plot.width - margin_r;
  const int y0 = plot.height - margin_b, y1 = margin_t;

  std::size_t npoints = 0;
  for (const auto& s : plot.series) npoints = std::max(npoints, s.values.size());
  if (npoints < 2) npoints = 2;
  const double yspan = plot.y_max - plot.y_min;

  auto px = [&](double i) {
    return x0 + static_cast<int>(std::lround((x1 - x0) * i / double(npoints - 1)));
  };
  auto py = [&](double v) {
    const double t = (v - plot.y_min) / (yspan != 0.0 ? yspan : 1.0);
    return y0 - static_cast<int>(std::lround((y0 - y1) * std::clamp(t, 0.0, 1.0)));
  };

  // Horizontal gridlines and y tick labels at quarters.
  for (int q = 0; q <= 4; ++q) {
    const double v = plot.y_min + yspan * q / 4.0;
    const int y = py(v);
    canvas.line(y, x0, y, x1, gray);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    canvas.text(y - 2, 4, buf, black);
  }
  // X tick labels at every point.
  for (std::size_t i = 0; i < npoints; ++i) {
    const int x = px(static_cast<double>(i));
    canvas.line(y0, x, y0 + 3, x, black);
    canvas.text(y0 + 6, x - 3, std::to_string(i + 1), black);
  }
  canvas.line(y0, x0, y0, x1, black);
  canvas.line(y1, x0, y0, x0, black);

  for (const auto& s : plot.series) {
    for (std::size_t i = 0; i + 1 < s.values.size(); ++i)
      canvas.line(py(s.values[i]), px(static_cast<double>(i)), py(s.values[i + 1]),
                  px(static_cast<double>(i + 1)), s.color);
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      const int y = py(s.values[i]), x = px(static_cast<double>(i));
      canvas.set(y - 1, x, s.color);
      canvas.set(y + 1, x, s.color);
      canvas.set(y, x - 1, s.color);
      canvas.set(y, x + 1, s.color);
    }
  }

  write_png(png_path, canvas.img);
}

}  // namespace qmat
