#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace qmat {

// Interleaved 8-bit raster, row-major, channel-last. channels is 1 or 3.
struct PixelImage {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<std::uint8_t> samples;

  PixelImage() = default;
  PixelImage(int h, int w, int c)
      : height(h), width(w), channels(c),
        samples(static_cast<std::size_t>(h) * w * c, 0) {
    if (h < 1 || w < 1 || (c != 1 && c != 3))
      throw std::invalid_argument("PixelImage: bad dimensions");
  }

  std::uint8_t at(int y, int x, int c) const {
    return samples[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t& at(int y, int x, int c) {
    return samples[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
};

// Pixel offset of the second compression grid relative to the first.
// (0,0) is the aligned case.
struct GridShift {
  int dx = 0;
  int dy = 0;

  bool aligned() const { return dx == 0 && dy == 0; }
};

inline void validate_shift(const GridShift& s) {
  if (s.dx < 0 || s.dx > 7 || s.dy < 0 || s.dy > 7)
    throw std::invalid_argument("GridShift: dx, dy must be in [0, 7]");
}

// Copy out the rectangle starting at (y0, x0) of size h x w.
inline PixelImage crop(const PixelImage& img, int y0, int x0, int h, int w) {
  if (y0 < 0 || x0 < 0 || y0 + h > img.height || x0 + w > img.width)
    throw std::invalid_argument("crop: rectangle out of bounds");
  PixelImage out(h, w, img.channels);
  const std::size_t row_bytes = static_cast<std::size_t>(w) * img.channels;
  for (int y = 0; y < h; ++y) {
    const std::uint8_t* src =
        img.samples.data() +
        (static_cast<std::size_t>(y0 + y) * img.width + x0) * img.channels;
    std::copy(src, src + row_bytes,
              out.samples.data() + static_cast<std::size_t>(y) * row_bytes);
  }
  return out;
}

// Largest top-left sub-image whose sides are multiples of 8.
inline PixelImage crop_to_block_multiple(const PixelImage& img) {
  const int h = img.height & ~7;
  const int w = img.width & ~7;
  if (h < 8 || w < 8) throw std::invalid_argument("image smaller than one 8x8 block");
  if (h == img.height && w == img.width) return img;
  return crop(img, 0, 0, h, w);
}

}  // namespace qmat
