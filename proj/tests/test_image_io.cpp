#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "qmat/image_io.hpp"
#include "support.hpp"

using qmat::ImageIoError;
using qmat::PixelImage;

namespace fs = std::filesystem;

namespace {

void write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary);
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
}

// Minimal uncompressed little-endian TIFF writer (8-bit chunky), test-only.
void write_tiff(const std::string& path, const PixelImage& img) {
  std::vector<std::uint8_t> out = {'I', 'I', 42, 0};
  const std::uint32_t pixel_bytes = static_cast<std::uint32_t>(img.samples.size());
  const std::uint32_t ifd_offset = 8 + pixel_bytes;
  auto put32 = [&out](std::uint32_t v) {
    out.push_back(v & 0xff);
    out.push_back((v >> 8) & 0xff);
    out.push_back((v >> 16) & 0xff);
    out.push_back((v >> 24) & 0xff);
  };
  auto put16 = [&out](std::uint16_t v) {
    out.push_back(v & 0xff);
    out.push_back((v >> 8) & 0xff);
  };
  put32(ifd_offset);
  out.insert(out.end(), img.samples.begin(), img.samples.end());

  const std::uint16_t spp = static_cast<std::uint16_t>(img.channels);
  struct Tag {
    std::uint16_t id, type;
    std::uint32_t count, value;
  };
  // BitsPerSample for 3 samples needs external storage.
  const std::uint32_t bits_offset = ifd_offset + 2 + 9 * 12 + 4;
  const std::vector<Tag> tags = {
      {256, 3, 1, static_cast<std::uint32_t>(img.width)},
      {257, 3, 1, static_cast<std::uint32_t>(img.height)},
      {258, 3, spp, spp == 1 ? 8u : bits_offset},
      {259, 3, 1, 1},  // uncompressed
      {262, 3, 1, spp == 1 ? 1u : 2u},
      {273, 4, 1, 8},  // strip offset: right after header
      {277, 3, 1, spp},
      {278, 3, 1, static_cast<std::uint32_t>(img.height)},
      {279, 4, 1, pixel_bytes},
  };
  put16(static_cast<std::uint16_t>(tags.size()));
  for (const Tag& t : tags) {
    put16(t.id);
    put16(t.type);
    put32(t.count);
    if (t.type == 3 && t.count == 1) {
      put16(static_cast<std::uint16_t>(t.value));
      put16(0);
    } else {
      put32(t.value);
    }
  }
  put32(0);  // no next IFD
  if (spp == 3) {
    put16(8);
    put16(8);
    put16(8);
  }
  write_bytes(path, out);
}

}  // namespace

TEST_CASE("png round-trip preserves pixels") {
  const std::string dir = testsupport::scratch_dir("imageio_png");
  const PixelImage img = testsupport::synthetic_image(41, 80, 100);
  const std::string path = dir + "/img.png";
  qmat::write_png(path, img);
  const PixelImage back = qmat::read_png(path);
  REQUIRE(back.height == img.height);
  REQUIRE(back.width == img.width);
  REQUIRE(back.channels == 3);
  CHECK(back.samples == img.samples);
}

TEST_CASE("ingest decodes a valid png source") {
  const std::string dir = testsupport::scratch_dir("imageio_ingest");
  const PixelImage img = testsupport::synthetic_image(42, 512, 512);
  const std::string path = dir + "/big.png";
  qmat::write_png(path, img);
  const PixelImage loaded = qmat::ingest_image(path);
  CHECK(loaded.height == 512);
  CHECK(loaded.width == 512);
  CHECK(loaded.channels == 3);
}

TEST_CASE("ingest rejects images below the 72x72 minimum") {
  const std::string dir = testsupport::scratch_dir("imageio_small");
  PixelImage tiny(40, 40, 3);
  const std::string path = dir + "/tiny.png";
  qmat::write_png(path, tiny);
  CHECK_THROWS_WITH_AS(qmat::ingest_image(path),
                       doctest::Contains("too small"), ImageIoError);
}

TEST_CASE("ingest replicates grayscale to three channels") {
  const std::string dir = testsupport::scratch_dir("imageio_gray");
  PixelImage gray(100, 90, 1);
  for (int y = 0; y < 100; ++y)
    for (int x = 0; x < 90; ++x) gray.at(y, x, 0) = static_cast<std::uint8_t>(x + y);
  const std::string path = dir + "/gray.png";
  qmat::write_png(path, gray);
  const PixelImage rgb = qmat::ingest_image(path);
  REQUIRE(rgb.channels == 3);
  for (int y = 0; y < 100; y += 7)
    for (int x = 0; x < 90; x += 7) {
      CHECK(rgb.at(y, x, 0) == gray.at(y, x, 0));
      CHECK(rgb.at(y, x, 1) == gray.at(y, x, 0));
      CHECK(rgb.at(y, x, 2) == gray.at(y, x, 0));
    }
}

TEST_CASE("ingest rejects lossy and unknown formats") {
  const std::string dir = testsupport::scratch_dir("imageio_bad");
  const std::string jpeg_path = dir + "/fake.jpg";
  write_bytes(jpeg_path, {0xFF, 0xD8, 0xFF, 0xE0, 0, 0, 0, 0, 0, 0});
  CHECK_THROWS_WITH_AS(qmat::ingest_image(jpeg_path), doctest::Contains("lossy"),
                       ImageIoError);

  const std::string junk_path = dir + "/junk.bin";
  write_bytes(junk_path, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  CHECK_THROWS_AS(qmat::ingest_image(junk_path), ImageIoError);
  CHECK_THROWS_AS(qmat::ingest_image(dir + "/missing.png"), ImageIoError);
}

TEST_CASE("truncated png is reported as corrupt") {
  const std::string dir = testsupport::scratch_dir("imageio_trunc");
  const PixelImage img = testsupport::synthetic_image(43, 80, 80);
  const std::string path = dir + "/img.png";
  qmat::write_png(path, img);
  std::ifstream f(path, std::ios::binary);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  bytes.resize(bytes.size() / 2);
  const std::string cut = dir + "/cut.png";
  write_bytes(cut, bytes);
  CHECK_THROWS_AS(qmat::read_png(cut), ImageIoError);
}

TEST_CASE("uncompressed tiff decodes for rgb and grayscale") {
  const std::string dir = testsupport::scratch_dir("imageio_tiff");
  const PixelImage img = testsupport::synthetic_image(44, 96, 120);
  write_tiff(dir + "/img.tif", img);
  const PixelImage back = qmat::read_tiff(dir + "/img.tif");
  REQUIRE(back.height == img.height);
  REQUIRE(back.width == img.width);
  CHECK(back.samples == img.samples);

  PixelImage gray(80, 80, 1);
  for (int i = 0; i < 80 * 80; ++i) gray.samples[i] = static_cast<std::uint8_t>(i * 7);
  write_tiff(dir + "/gray.tif", gray);
  const PixelImage gback = qmat::read_tiff(dir + "/gray.tif");
  CHECK(gback.channels == 1);
  CHECK(gback.samples == gray.samples);

  const PixelImage via_ingest = qmat::ingest_image(dir + "/img.tif");
  CHECK(via_ingest.channels == 3);
}
