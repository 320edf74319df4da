#pragma once

#include <string>

#include "qmat/image.hpp"
#include "qmat/shard.hpp"

namespace qmat {

struct ImageIoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Decoders for the lossless source formats. Grayscale inputs come back with
// channels == 1; alpha channels are dropped; 16-bit samples keep the high byte.
PixelImage read_png(const std::string& path);
PixelImage read_tiff(const std::string& path);

// 8-bit PNG, channels 1 or 3.
void write_png(const std::string& path, const PixelImage& img);

// Dataset-facing loader: dispatches on magic bytes, rejects lossy or unknown
// formats, replicates grayscale to 3 channels and enforces the 72x72 minimum
// (shift margin plus one 64x64 patch).
PixelImage ingest_image(const std::string& path);

}  // namespace qmat
