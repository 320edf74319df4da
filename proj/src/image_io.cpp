#include "qmat/image_io.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <vector>

namespace qmat {
namespace {

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ImageIoError("cannot open file: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

std::uint32_t be32(const std::uint8_t* p) {
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
         (std::uint32_t(p[2]) << 8) | p[3];
}

// ---------------------------------------------------------------- PNG

constexpr std::uint8_t kPngSig[8] = {137, 80, 78, 71, 13, 10, 26, 10};

std::vector<std::uint8_t> zlib_inflate(const std::vector<std::uint8_t>& in,
                                       std::size_t expected) {
  std::vector<std::uint8_t> out(expected);
  uLongf out_len = out.size();
  const int rc = uncompress(out.data(), &out_len, in.data(), in.size());
  if (rc != Z_OK || out_len != expected) throw ImageIoError("PNG: corrupt compressed data");
  return out;
}

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

PixelImage decode_png(const std::vector<std::uint8_t>& bytes, const std::string& path) {
  if (bytes.size() < 8 + 25 || std::memcmp(bytes.data(), kPngSig, 8) != 0)
    throw ImageIoError("not a PNG file: " + path);

  std::size_t pos = 8;
  int width = 0, height = 0, bit_depth = 0, color_type = 0;
  std::vector<std::uint8_t> idat;
  bool saw_ihdr = false, saw_iend = false;

  while (pos + 8 <= bytes.size()) {
    const std::uint32_t len = be32(&bytes[pos]);
    if (pos + 12 + len > bytes.size()) throw ImageIoError("PNG: truncated chunk in " + path);
    const char* type = reinterpret_cast<const char*>(&bytes[pos + 4]);
    const std::uint8_t* data = &bytes[pos + 8];

    if (std::memcmp(type, "IHDR", 4) == 0) {
      if (len != 13) throw ImageIoError("PNG: bad IHDR");
      width = static_cast<int>(be32(data));
      height = static_cast<int>(be32(data + 4));
      bit_depth = data[8];
      color_type = data[9];
      if (data[12] != 0) throw ImageIoError("PNG: interlaced images are not supported");
      saw_ihdr = true;
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), data, data + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      saw_iend = true;
      break;
    }
    pos += 12 + len;
  }
  if (!saw_ihdr || !saw_iend || idat.empty()) throw ImageIoError("PNG: missing chunks in " + path);
  if (width <= 0 || height <= 0) throw ImageIoError("PNG: bad dimensions");

  int samples_per_pixel;
  switch (color_type) {
    case 0: samples_per_pixel = 1; break;  // gray
    case 2: samples_per_pixel = 3; break;  // RGB
    case 4: samples_per_pixel = 2; break;  // gray + alpha
    case 6: samples_per_pixel = 4; break;  // RGBA
    default: throw ImageIoError("PNG: palette images are not supported");
  }
  if (bit_depth != 8 && bit_depth != 16)
    throw ImageIoError("PNG: only 8/16-bit depths supported");

  const int bytes_per_sample = bit_depth / 8;
  const int bpp = samples_per_pixel * bytes_per_sample;  // filter unit
  const std::size_t stride = static_cast<std::size_t>(width) * bpp;
  const std::size_t raw_size = (stride + 1) * height;
  std::vector<std::uint8_t> raw = zlib_inflate(idat, raw_size);

  // Undo per-scanline filters in place.
  std::vector<std::uint8_t> prev(stride, 0);
  for (int y = 0; y < height; ++y) {
    std::uint8_t* row = &raw[y * (stride + 1)];
    const std::uint8_t filter = row[0];
    std::uint8_t* cur = row + 1;
    for (std::size_t i = 0; i < stride; ++i) {
      const int a = i >= static_cast<std::size_t>(bpp) ? cur[i - bpp] : 0;
      const int b = prev[i];
      const int c = i >= static_cast<std::size_t>(bpp) ? prev[i - bpp] : 0;
      int v = cur[i];
      switch (filter) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: v += paeth(a, b, c); break;
        default: throw ImageIoError("PNG: bad filter type");
      }
      cur[i] = static_cast<std::uint8_t>(v);
    }
    std::memcpy(prev.data(), cur, stride);
  }

  const int out_channels = samples_per_pixel >= 3 ? 3 : 1;
  PixelImage img(height, width, out_channels);
  for (int y = 0; y < height; ++y) {
    const std::uint8_t* cur = &raw[y * (stride + 1)] + 1;
    for (int x = 0; x < width; ++x) {
      const std::uint8_t* px = cur + static_cast<std::size_t>(x) * bpp;
      for (int ch = 0; ch < out_channels; ++ch)
        img.at(y, x, ch) = px[ch * bytes_per_sample];  // high byte for 16-bit
    }
  }
  return img;
}

void append_be32(std::vector<std::uint8_t>& v, std::uint32_t x) {
  v.push_back(static_cast<std::uint8_t>(x >> 24));
  v.push_back(static_cast<std::uint8_t>(x >> 16));
  v.push_back(static_cast<std::uint8_t>(x >> 8));
  v.push_back(static_cast<std::uint8_t>(x));
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                  const std::uint8_t* data, std::size_t len) {
  append_be32(out, static_cast<std::uint32_t>(len));
  const std::size_t type_pos = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data, data + len);
  const std::uint32_t crc = crc32(0, &out[type_pos], static_cast<uInt>(4 + len));
  append_be32(out, crc);
}

// ---------------------------------------------------------------- TIFF

std::uint32_t tiff_read(const std::uint8_t* p, int n, bool little) {
  std::uint32_t v = 0;
  for (int i = 0; i < n; ++i)
    v |= std::uint32_t(p[little ? i : n - 1 - i]) << (8 * i);
  return v;
}

struct TiffTag {
  std::uint16_t id = 0, type = 0;
  std::uint32_t count = 0;
  std::uint32_t value_or_offset = 0;  // raw field
};

PixelImage decode_tiff(const std::vector<std::uint8_t>& bytes, const std::string& path) {
  if (bytes.size() < 8) throw ImageIoError("not a TIFF file: " + path);
  bool little;
  if (bytes[0] == 'I' && bytes[1] == 'I') little = true;
  else if (bytes[0] == 'M' && bytes[1] == 'M') little = false;
  else throw ImageIoError("not a TIFF file: " + path);
  if (tiff_read(&bytes[2], 2, little) != 42) throw ImageIoError("TIFF: bad magic");

  const std::uint32_t ifd_off = tiff_read(&bytes[4], 4, little);
  if (ifd_off + 2 > bytes.size()) throw ImageIoError("TIFF: truncated IFD");
  const std::uint32_t n_tags = tiff_read(&bytes[ifd_off], 2, little);
  if (ifd_off + 2 + n_tags * 12 > bytes.size()) throw ImageIoError("TIFF: truncated IFD");

  auto type_size = [](std::uint16_t t) -> std::uint32_t {
    switch (t) {
      case 1: case 2: case 6: case 7: return 1;  // byte-ish
      case 3: case 8: return 2;                  // short
      case 4: case 9: case 11: return 4;         // long / float
      default: return 0;
    }
  };

  std::uint32_t width = 0, height = 0, compression = 1, spp = 1, rows_per_strip = 0;
  std::uint32_t planar = 1;
  std::vector<std::uint32_t> bits, strip_offsets, strip_counts;

  for (std::uint32_t t = 0; t < n_tags; ++t) {
    const std::uint8_t* p = &bytes[ifd_off + 2 + t * 12];
    TiffTag tag;
    tag.id = static_cast<std::uint16_t>(tiff_read(p, 2, little));
    tag.type = static_cast<std::uint16_t>(tiff_read(p + 2, 2, little));
    tag.count = tiff_read(p + 4, 4, little);
    const std::uint32_t elem = type_size(tag.type);
    if (elem == 0) continue;

    auto values = [&](std::size_t max_vals) {
      std::vector<std::uint32_t> vals;
      const std::uint32_t total = elem * tag.count;
      const std::uint8_t* src = total <= 4 ? p + 8 : &bytes[tiff_read(p + 8, 4, little)];
      if (total > 4 && tiff_read(p + 8, 4, little) + total > bytes.size())
        throw ImageIoError("TIFF: tag data out of range");
      for (std::uint32_t i = 0; i < tag.count && i < max_vals; ++i)
        vals.push_back(tiff_read(src + i * elem, static_cast<int>(elem), little));
      return vals;
    };

    switch (tag.id) {
      case 256: width = values(1).at(0); break;
      case 257: height = values(1).at(0); break;
      case 258: bits = values(16); break;
      case 259: compression = values(1).at(0); break;
      case 273: strip_offsets = values(1u << 20); break;
      case 277: spp = values(1).at(0); break;
      case 278: rows_per_strip = values(1).at(0); break;
      case 279: strip_counts = values(1u << 20); break;
      case 284: planar = values(1).at(0); break;
      default: break;
    }
  }

  if (compression != 1)
    throw ImageIoError("TIFF: only uncompressed images are supported (" + path + ")");
  if (planar != 1) throw ImageIoError("TIFF: planar configuration 2 not supported");
  if (width == 0 || height == 0 || strip_offsets.empty())
    throw ImageIoError("TIFF: missing required tags");
  if (spp != 1 && spp != 3 && spp != 4)
    throw ImageIoError("TIFF: unsupported samples per pixel");
  std::uint32_t depth = bits.empty() ? 8 : bits[0];
  for (std::uint32_t b : bits)
    if (b != depth) throw ImageIoError("TIFF: mixed bit depths not supported");
  if (depth != 8 && depth != 16) throw ImageIoError("TIFF: only 8/16-bit supported");
  if (rows_per_strip == 0) rows_per_strip = height;

  const int bytes_per_sample = static_cast<int>(depth) / 8;
  const std::size_t row_bytes = static_cast<std::size_t>(width) * spp * bytes_per_sample;
  std::vector<std::uint8_t> pixels(row_bytes * height);

  std::size_t row = 0;
  for (std::size_t s = 0; s < strip_offsets.size() && row < height; ++s) {
    const std::size_t rows_here = std::min<std::size_t>(rows_per_strip, height - row);
    const std::size_t need = rows_here * row_bytes;
    if (strip_offsets[s] + need > bytes.size()) throw ImageIoError("TIFF: truncated strip");
    if (s < strip_counts.size() && strip_counts[s] < need)
      throw ImageIoError("TIFF: strip shorter than expected");
    std::memcpy(&pixels[row * row_bytes], &bytes[strip_offsets[s]], need);
    row += rows_here;
  }
  if (row != height) throw ImageIoError("TIFF: missing strips");

  const int out_channels = spp >= 3 ? 3 : 1;
  PixelImage img(static_cast<int>(height), static_cast<int>(width), out_channels);
  for (std::uint32_t y = 0; y < height; ++y)
    for (std::uint32_t x = 0; x < width; ++x) {
      const std::uint8_t* px = &pixels[y * row_bytes +
                                       static_cast<std::size_t>(x) * spp * bytes_per_sample];
      for (int ch = 0; ch < out_channels; ++ch) {
        // 16-bit: take the most significant byte.
        const std::uint8_t* sp = px + ch * bytes_per_sample;
        img.at(static_cast<int>(y), static_cast<int>(x), ch) =
            bytes_per_sample == 1 ? sp[0] : (little ? sp[1] : sp[0]);
      }
    }
  return img;
}

}  // namespace

PixelImage read_png(const std::string& path) { return decode_png(read_file(path), path); }
PixelImage read_tiff(const std::string& path) { return decode_tiff(read_file(path), path); }

void write_png(const std::string& path, const PixelImage& img) {
  if (img.channels != 1 && img.channels != 3)
    throw ImageIoError("write_png: channels must be 1 or 3");

  const std::size_t stride = static_cast<std::size_t>(img.width) * img.channels;
  std::vector<std::uint8_t> raw((stride + 1) * img.height);
  for (int y = 0; y < img.height; ++y) {
    raw[y * (stride + 1)] = 0;  // filter: none
    std::memcpy(&raw[y * (stride + 1) + 1], &img.samples[y * stride], stride);
  }

  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> compressed(bound);
  if (compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw ImageIoError("write_png: deflate failed");
  compressed.resize(bound);

  std::vector<std::uint8_t> out(kPngSig, kPngSig + 8);
  std::uint8_t ihdr[13];
  ihdr[0] = static_cast<std::uint8_t>(img.width >> 24);
  ihdr[1] = static_cast<std::uint8_t>(img.width >> 16);
  ihdr[2] = static_cast<std::uint8_t>(img.width >> 8);
  ihdr[3] = static_cast<std::uint8_t>(img.width);
  ihdr[4] = static_cast<std::uint8_t>(img.height >> 24);
  ihdr[5] = static_cast<std::uint8_t>(img.height >> 16);
  ihdr[6] = static_cast<std::uint8_t>(img.height >> 8);
  ihdr[7] = static_cast<std::uint8_t>(img.height);
  ihdr[8] = 8;                                         // bit depth
  ihdr[9] = img.channels == 3 ? 2 : 0;                 // color type
  ihdr[10] = ihdr[11] = ihdr[12] = 0;
  append_chunk(out, "IHDR", ihdr, 13);
  append_chunk(out, "IDAT", compressed.data(), compressed.size());
  append_chunk(out, "IEND", nullptr, 0);

  std::ofstream f(path, std::ios::binary);
  if (!f) throw ImageIoError("cannot open for writing: " + path);
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw ImageIoError("write failed: " + path);
}

PixelImage ingest_image(const std::string& path) {
  const std::vector<std::uint8_t> bytes = read_file(path);
  if (bytes.size() < 8) throw ImageIoError("file too short: " + path);

  PixelImage img;
  if (std::memcmp(bytes.data(), kPngSig, 8) == 0) {
    img = decode_png(bytes, path);
  } else if ((bytes[0] == 'I' && bytes[1] == 'I') || (bytes[0] == 'M' && bytes[1] == 'M')) {
    img = decode_tiff(bytes, path);
  } else if (bytes[0] == 0xFF && bytes[1] == 0xD8) {
    throw ImageIoError("JPEG sources are lossy and not accepted: " + path);
  } else {
    throw ImageIoError("unsupported image format: " + path);
  }

  if (img.height < kMinPatchSourceSide || img.width < kMinPatchSourceSide)
    throw ImageIoError("image too small (need at least 72x72): " + path);

  if (img.channels == 1) {
    PixelImage rgb(img.height, img.width, 3);
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        const std::uint8_t v = img.at(y, x, 0);
        rgb.at(y, x, 0) = rgb.at(y, x, 1) = rgb.at(y, x, 2) = v;
      }
    return rgb;
  }
  return img;
}

}  // namespace qmat
