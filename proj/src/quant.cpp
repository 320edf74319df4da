#include "qmat/quant.hpp"

namespace qmat {
namespace {

// Reference tables from the JPEG standard, Annex K, row-major.
constexpr std::array<int, 64> kBaseLuminance = {
    16, 11, 10, 16, 24,  40,  51,  61,   //
    12, 12, 14, 19, 26,  58,  60,  55,   //
    14, 13, 16, 24, 40,  57,  69,  56,   //
    14, 17, 22, 29, 51,  87,  80,  62,   //
    18, 22, 37, 56, 68,  109, 103, 77,   //
    24, 35, 55, 64, 81,  104, 113, 92,   //
    49, 64, 78, 87, 103, 121, 120, 101,  //
    72, 92, 95, 98, 112, 100, 103, 99};

constexpr std::array<int, 64> kBaseChrominance = {
    17, 18, 24, 47, 99, 99, 99, 99,  //
    18, 21, 26, 66, 99, 99, 99, 99,  //
    24, 26, 56, 99, 99, 99, 99, 99,  //
    47, 66, 99, 99, 99, 99, 99, 99,  //
    99, 99, 99, 99, 99, 99, 99, 99,  //
    99, 99, 99, 99, 99, 99, 99, 99,  //
    99, 99, 99, 99, 99, 99, 99, 99,  //
    99, 99, 99, 99, 99, 99, 99, 99};

// Zig-zag index -> row-major index.
constexpr std::array<int, 64> kZigZag = {
    0,  1,  8,  16, 9,  2,  3,  10,  //
    17, 24, 32, 25, 18, 11, 4,  5,   //
    12, 19, 26, 33, 40, 48, 41, 34,  //
    27, 20, 13, 6,  7,  14, 21, 28,  //
    35, 42, 49, 56, 57, 50, 43, 36,  //
    29, 22, 15, 23, 30, 37, 44, 51,  //
    58, 59, 52, 45, 38, 31, 39, 46,  //
    53, 60, 61, 54, 47, 55, 62, 63};

}  // namespace

const std::array<int, 64>& zigzag_index_map() { return kZigZag; }

ZigZagVector zigzag(const QuantMatrix& q) {
  ZigZagVector v;
  for (int i = 0; i < 64; ++i) v.q[i] = q.steps[kZigZag[i]];
  return v;
}

QuantMatrix inverse_zigzag(const ZigZagVector& v) {
  QuantMatrix q;
  for (int i = 0; i < 64; ++i) q.steps[kZigZag[i]] = v.q[i];
  return q;
}

QTarget qtarget_from_matrix(const QuantMatrix& q, int nc) {
  if (nc < 1 || nc > 64) throw std::invalid_argument("QTarget: nc must be in [1, 64]");
  const ZigZagVector v = zigzag(q);
  QTarget t;
  t.nc = nc;
  t.values.assign(v.q.begin(), v.q.begin() + nc);
  return t;
}

QuantMatrix qf_to_table(int qf, Channel channel) {
  if (qf < 1 || qf > 100) throw std::invalid_argument("quality factor must be in [1, 100]");
  const std::array<int, 64>& base =
      channel == Channel::luma ? kBaseLuminance : kBaseChrominance;
  const int scale = qf < 50 ? 5000 / qf : 200 - 2 * qf;
  QuantMatrix q;
  for (int i = 0; i < 64; ++i) {
    int v = (base[i] * scale + 50) / 100;
    if (v < 1) v = 1;
    if (v > 255) v = 255;
    q.steps[i] = v;
  }
  return q;
}

}  // namespace qmat
