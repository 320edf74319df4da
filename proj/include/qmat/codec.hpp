#pragma once

#include "qmat/image.hpp"
#include "qmat/quant.hpp"

namespace qmat {

// One compress/decompress round trip: per 8x8 block and channel, level-shift,
// DCT, quantize, dequantize, IDCT, un-shift, clamp to [0,255], round.
// Color images pass through YCbCr (4:4:4, no subsampling); the luma table
// quantizes Y, the chroma table Cb and Cr. Dimensions must be multiples of 8.
PixelImage jpeg_cycle(const PixelImage& img, const QuantTables& q);

// Same table for every channel.
PixelImage jpeg_cycle(const PixelImage& img, const QuantMatrix& q);

// jpeg_cycle with q1, then drop shift.dx columns and shift.dy rows from the
// top-left (re-cropping to a multiple of 8), then jpeg_cycle with q2.
// shift = (0,0) is the aligned case.
PixelImage double_compress(const PixelImage& img, const QuantTables& q1,
                           const QuantTables& q2, const GridShift& shift);

PixelImage double_compress(const PixelImage& img, const QuantMatrix& q1,
                           const QuantMatrix& q2, const GridShift& shift);

}  // namespace qmat
