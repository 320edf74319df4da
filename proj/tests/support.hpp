#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>

#include "qmat/image.hpp"
#include "qmat/rng.hpp"

namespace testsupport {

// Independent brute-force orthonormal 2-D DCT, straight from the definition:
// Y[u][v] = s(u) s(v) sum_{x,y} X[x][y] cos((2x+1)u pi/16) cos((2y+1)v pi/16).
// O(64^2), used only as a test oracle.
inline std::array<double, 64> brute_force_dct(const std::array<double, 64>& in) {
  const double pi = 3.14159265358979323846;
  std::array<double, 64> out{};
  for (int u = 0; u < 8; ++u)
    for (int v = 0; v < 8; ++v) {
      const double su = u == 0 ? std::sqrt(1.0 / 8.0) : 0.5;
      const double sv = v == 0 ? std::sqrt(1.0 / 8.0) : 0.5;
      double acc = 0.0;
      for (int x = 0; x < 8; ++x)
        for (int y = 0; y < 8; ++y)
          acc += in[x * 8 + y] * std::cos((2 * x + 1) * u * pi / 16.0) *
                 std::cos((2 * y + 1) * v * pi / 16.0);
      out[u * 8 + v] = su * sv * acc;
    }
  return out;
}

// Mixed-texture synthetic source image: smooth gradients, a few rectangles,
// mild noise. Enough spectral content for compression tests at any qf.
inline qmat::PixelImage synthetic_image(std::uint64_t seed, int h, int w) {
  qmat::CounterRng rng(qmat::CounterRng::derive_key(seed, "synth-img"));
  qmat::PixelImage img(h, w, 3);
  double base[3], gx[3], gy[3];
  for (int c = 0; c < 3; ++c) {
    base[c] = 40.0 + 170.0 * rng.next_double();
    gx[c] = (rng.next_double() - 0.5) * 200.0 / w;
    gy[c] = (rng.next_double() - 0.5) * 200.0 / h;
  }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        double v = base[c] + gx[c] * x + gy[c] * y;
        img.at(y, x, c) = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
      }
  const int n_rects = 6 + rng.uniform_int(0, 6);
  for (int r = 0; r < n_rects; ++r) {
    const int rw = rng.uniform_int(6, std::max(7, w / 3));
    const int rh = rng.uniform_int(6, std::max(7, h / 3));
    const int x0 = rng.uniform_int(0, std::max(0, w - rw - 1));
    const int y0 = rng.uniform_int(0, std::max(0, h - rh - 1));
    int col[3];
    for (int c = 0; c < 3; ++c) col[c] = rng.uniform_int(0, 255);
    for (int y = y0; y < y0 + rh; ++y)
      for (int x = x0; x < x0 + rw; ++x)
        for (int c = 0; c < 3; ++c)
          img.at(y, x, c) = static_cast<std::uint8_t>((img.at(y, x, c) + col[c]) / 2);
  }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        const int noisy = img.at(y, x, c) + rng.uniform_int(-12, 12);
        img.at(y, x, c) = static_cast<std::uint8_t>(std::clamp(noisy, 0, 255));
      }
  return img;
}

// Fresh scratch directory under the system temp root.
inline std::string scratch_dir(const std::string& tag) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / ("qmat_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

}  // namespace testsupport
