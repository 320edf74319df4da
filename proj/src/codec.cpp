#include "qmat/codec.hpp"

#include <cmath>
#include <vector>

#include "qmat/dct.hpp"

namespace qmat {
namespace {

inline std::uint8_t clamp_round_u8(double v) {
  if (v <= 0.0) return 0;
  if (v >= 255.0) return 255;
  return static_cast<std::uint8_t>(std::lround(v));
}

// Planes hold integer-valued samples in [0,255] stored as double.
using Plane = std::vector<double>;

void rgb_to_ycbcr(const PixelImage& img, Plane& y, Plane& cb, Plane& cr) {
  const std::size_t n = static_cast<std::size_t>(img.height) * img.width;
  y.resize(n);
  cb.resize(n);
  cr.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = img.samples[i * 3 + 0];
    const double g = img.samples[i * 3 + 1];
    const double b = img.samples[i * 3 + 2];
    y[i] = std::lround(0.299 * r + 0.587 * g + 0.114 * b);
    cb[i] = std::lround(-0.168735892 * r - 0.331264108 * g + 0.5 * b + 128.0);
    cr[i] = std::lround(0.5 * r - 0.418687589 * g - 0.081312411 * b + 128.0);
    if (cb[i] < 0) cb[i] = 0;
    if (cb[i] > 255) cb[i] = 255;
    if (cr[i] < 0) cr[i] = 0;
    if (cr[i] > 255) cr[i] = 255;
  }
}

void ycbcr_to_rgb(const Plane& y, const Plane& cb, const Plane& cr, PixelImage& img) {
  const std::size_t n = static_cast<std::size_t>(img.height) * img.width;
  for (std::size_t i = 0; i < n; ++i) {
    const double Y = y[i], B = cb[i] - 128.0, R = cr[i] - 128.0;
    img.samples[i * 3 + 0] = clamp_round_u8(Y + 1.402 * R);
    img.samples[i * 3 + 1] = clamp_round_u8(Y - 0.344136286 * B - 0.714136286 * R);
    img.samples[i * 3 + 2] = clamp_round_u8(Y + 1.772 * B);
  }
}

// Quantize/dequantize every 8x8 block of one plane in place.
void cycle_plane(Plane& p, int h, int w, const QuantMatrix& q) {
  const int by = h / 8, bx = w / 8;
#pragma omp parallel for collapse(2) schedule(static)
  for (int brow = 0; brow < by; ++brow) {
    for (int bcol = 0; bcol < bx; ++bcol) {
      Block blk;
      for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c)
          blk[r * 8 + c] = p[static_cast<std::size_t>(brow * 8 + r) * w + bcol * 8 + c] - 128.0;
      const IntBlock levels = quantize(dct2d_8x8(blk), q);
      const Block rec = idct2d_8x8(dequantize(levels, q));
      for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c) {
          double v = rec[r * 8 + c] + 128.0;
          if (v < 0.0) v = 0.0;
          if (v > 255.0) v = 255.0;
          p[static_cast<std::size_t>(brow * 8 + r) * w + bcol * 8 + c] = std::lround(v);
        }
    }
  }
}

}  // namespace

PixelImage jpeg_cycle(const PixelImage& img, const QuantTables& q) {
  if (img.height % 8 != 0 || img.width % 8 != 0)
    throw std::invalid_argument("jpeg_cycle: dimensions must be multiples of 8");
  validate(q.luma);
  validate(q.chroma);

  if (img.channels == 1) {
    Plane p(img.samples.begin(), img.samples.end());
    cycle_plane(p, img.height, img.width, q.luma);
    PixelImage out(img.height, img.width, 1);
    for (std::size_t i = 0; i < p.size(); ++i) out.samples[i] = clamp_round_u8(p[i]);
    return out;
  }

  Plane y, cb, cr;
  rgb_to_ycbcr(img, y, cb, cr);
  cycle_plane(y, img.height, img.width, q.luma);
  cycle_plane(cb, img.height, img.width, q.chroma);
  cycle_plane(cr, img.height, img.width, q.chroma);
  PixelImage out(img.height, img.width, 3);
  ycbcr_to_rgb(y, cb, cr, out);
  return out;
}

PixelImage jpeg_cycle(const PixelImage& img, const QuantMatrix& q) {
  return jpeg_cycle(img, QuantTables{q, q});
}

PixelImage double_compress(const PixelImage& img, const QuantTables& q1,
                           const QuantTables& q2, const GridShift& shift) {
  validate_shift(shift);
  PixelImage first = jpeg_cycle(img, q1);
  if (!shift.aligned()) {
    const int h = first.height - shift.dy;
    const int w = first.width - shift.dx;
    if (h < 8 || w < 8) throw std::invalid_argument("double_compress: image too small for shift");
    first = crop_to_block_multiple(crop(first, shift.dy, shift.dx, h, w));
  }
  return jpeg_cycle(first, q2);
}

PixelImage double_compress(const PixelImage& img, const QuantMatrix& q1,
                           const QuantMatrix& q2, const GridShift& shift) {
  return double_compress(img, QuantTables{q1, q1}, QuantTables{q2, q2}, shift);
}

}  // namespace qmat
