#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace qmat {

// 8x8 matrix of quantization steps, row-major. Entries in [1, 255],
// position (0,0) is the DC step.
struct QuantMatrix {
  std::array<int, 64> steps{};

  int at(int row, int col) const { return steps[row * 8 + col]; }
  int& at(int row, int col) { return steps[row * 8 + col]; }

  bool operator==(const QuantMatrix&) const = default;
};

inline void validate(const QuantMatrix& q) {
  for (int v : q.steps)
    if (v < 1 || v > 255) throw std::invalid_argument("QuantMatrix: entry outside [1, 255]");
}

// 64-element vector in zig-zag scan order; element 0 is the DC step.
struct ZigZagVector {
  std::array<int, 64> q{};

  bool operator==(const ZigZagVector&) const = default;
};

enum class Channel { luma, chroma };

// Maps zig-zag index -> row-major index (standard JPEG scan).
const std::array<int, 64>& zigzag_index_map();

ZigZagVector zigzag(const QuantMatrix& q);
QuantMatrix inverse_zigzag(const ZigZagVector& v);

// First nc zig-zag entries of a quantization matrix: the regression label.
struct QTarget {
  std::vector<int> values;
  int nc = 15;
};

QTarget qtarget_from_matrix(const QuantMatrix& q, int nc);

// Quality-factor scaling of the reference tables (the usual IJG rule):
// S = 5000/qf below 50 else 200 - 2*qf, entry = clamp((base*S + 50)/100, 1, 255).
// qf outside [1, 100] is rejected.
QuantMatrix qf_to_table(int qf, Channel channel);

// Luma/chroma table pair for one compression pass.
struct QuantTables {
  QuantMatrix luma;
  QuantMatrix chroma;
};

inline QuantTables tables_for_quality(int qf) {
  return {qf_to_table(qf, Channel::luma), qf_to_table(qf, Channel::chroma)};
}

}  // namespace qmat
