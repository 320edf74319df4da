#pragma once

#include <array>

#include "qmat/quant.hpp"

namespace qmat {

using Block = std::array<double, 64>;   // 8x8, row-major
using IntBlock = std::array<int, 64>;

// Orthonormal type-II 2-D DCT of an 8x8 block of level-shifted samples.
Block dct2d_8x8(const Block& block);

// Exact inverse of dct2d_8x8 (type-III), up to floating-point error.
Block idct2d_8x8(const Block& coeffs);

// Entrywise round(c / step), halves away from zero.
IntBlock quantize(const Block& coeffs, const QuantMatrix& q);

// Entrywise level * step.
Block dequantize(const IntBlock& levels, const QuantMatrix& q);

}  // namespace qmat
