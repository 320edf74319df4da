#include "qmat/dct.hpp"

#include <cmath>

namespace qmat {
namespace {

// Orthonormal DCT-II basis: C[k][n] = s(k) * cos((2n+1) k pi / 16),
// s(0) = sqrt(1/8), s(k>0) = 1/2. Rows are orthonormal, so the inverse
// transform is the transpose.
struct Basis {
  double c[8][8];
  Basis() {
    const double pi = 3.14159265358979323846;
    for (int k = 0; k < 8; ++k) {
      const double s = k == 0 ? std::sqrt(1.0 / 8.0) : 0.5;
      for (int n = 0; n < 8; ++n) c[k][n] = s * std::cos((2 * n + 1) * k * pi / 16.0);
    }
  }
};

const Basis& basis() {
  static const Basis b;
  return b;
}

}  // namespace

Block dct2d_8x8(const Block& block) {
  const auto& c = basis().c;
  double tmp[8][8];  // rows transformed: tmp = X * C^T
  for (int r = 0; r < 8; ++r)
    for (int k = 0; k < 8; ++k) {
      double acc = 0.0;
      for (int n = 0; n < 8; ++n) acc += block[r * 8 + n] * c[k][n];
      tmp[r][k] = acc;
    }
  Block out;
  for (int k = 0; k < 8; ++k)  // columns: out = C * tmp
    for (int j = 0; j < 8; ++j) {
      double acc = 0.0;
      for (int n = 0; n < 8; ++n) acc += c[k][n] * tmp[n][j];
      out[k * 8 + j] = acc;
    }
  return out;
}

Block idct2d_8x8(const Block& coeffs) {
  const auto& c = basis().c;
  double tmp[8][8];  // tmp = C^T * Y
  for (int n = 0; n < 8; ++n)
    for (int j = 0; j < 8; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 8; ++k) acc += c[k][n] * coeffs[k * 8 + j];
      tmp[n][j] = acc;
    }
  Block out;
  for (int r = 0; r < 8; ++r)  // out = tmp * C
    for (int n = 0; n < 8; ++n) {
      double acc = 0.0;
      for (int k = 0; k < 8; ++k) acc += tmp[r][k] * c[k][n];
      out[r * 8 + n] = acc;
    }
  return out;
}

IntBlock quantize(const Block& coeffs, const QuantMatrix& q) {
  IntBlock out;
  for (int i = 0; i < 64; ++i)
    out[i] = static_cast<int>(std::lround(coeffs[i] / q.steps[i]));
  return out;
}

Block dequantize(const IntBlock& levels, const QuantMatrix& q) {
  Block out;
  for (int i = 0; i < 64; ++i)
    out[i] = static_cast<double>(levels[i]) * q.steps[i];
  return out;
}

}  // namespace qmat
