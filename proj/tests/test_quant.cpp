#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "data/libjpeg_tables.hpp"
#include "qmat/quant.hpp"
#include "qmat/rng.hpp"

using qmat::Channel;
using qmat::CounterRng;
using qmat::QuantMatrix;

namespace {

// Oracle built from the scan definition: anti-diagonals d = r+c in order,
// odd diagonals walked with increasing row, even ones with decreasing row.
std::array<int, 64> zigzag_by_definition() {
  std::array<int, 64> order{};
  int idx = 0;
  for (int d = 0; d <= 14; ++d) {
    if (d % 2 == 1) {
      for (int r = std::max(0, d - 7); r <= std::min(7, d); ++r)
        order[idx++] = r * 8 + (d - r);
    } else {
      for (int c = std::max(0, d - 7); c <= std::min(7, d); ++c)
        order[idx++] = (d - c) * 8 + c;
    }
  }
  return order;
}

}  // namespace

TEST_CASE("qf_to_table matches libjpeg emitted tables for qf 10..100") {
  for (const RefTables& ref : kLibjpegTables) {
    const QuantMatrix luma = qmat::qf_to_table(ref.qf, Channel::luma);
    const QuantMatrix chroma = qmat::qf_to_table(ref.qf, Channel::chroma);
    for (int i = 0; i < 64; ++i) {
      CAPTURE(ref.qf);
      CAPTURE(i);
      CHECK(luma.steps[i] == ref.luma[i]);
      CHECK(chroma.steps[i] == ref.chroma[i]);
    }
  }
}

TEST_CASE("qf spot values") {
  CHECK(qmat::qf_to_table(50, Channel::luma).steps[0] == 16);
  CHECK(qmat::qf_to_table(90, Channel::luma).steps[0] == 3);
  const QuantMatrix all_ones = qmat::qf_to_table(100, Channel::luma);
  for (int v : all_ones.steps) CHECK(v == 1);
  const QuantMatrix chroma100 = qmat::qf_to_table(100, Channel::chroma);
  for (int v : chroma100.steps) CHECK(v == 1);
}

TEST_CASE("qf_to_table rejects out-of-range quality factors") {
  CHECK_THROWS_AS(qmat::qf_to_table(0, Channel::luma), std::invalid_argument);
  CHECK_THROWS_AS(qmat::qf_to_table(101, Channel::luma), std::invalid_argument);
  CHECK_THROWS_AS(qmat::qf_to_table(-3, Channel::chroma), std::invalid_argument);
}

TEST_CASE("qf_to_table is entrywise monotone non-increasing in qf") {
  for (Channel ch : {Channel::luma, Channel::chroma}) {
    QuantMatrix prev = qmat::qf_to_table(1, ch);
    for (int qf = 2; qf <= 100; ++qf) {
      const QuantMatrix cur = qmat::qf_to_table(qf, ch);
      for (int i = 0; i < 64; ++i) {
        CHECK(cur.steps[i] <= prev.steps[i]);
        CHECK(cur.steps[i] >= 1);
        CHECK(cur.steps[i] <= 255);
      }
      prev = cur;
    }
  }
}

TEST_CASE("zigzag endpoints and permutation property") {
  const auto& map = qmat::zigzag_index_map();
  CHECK(map[0] == 0);    // DC first
  CHECK(map[63] == 63);  // bottom-right last

  std::array<bool, 64> seen{};
  for (int i = 0; i < 64; ++i) {
    CHECK(map[i] >= 0);
    CHECK(map[i] < 64);
    seen[map[i]] = true;
  }
  for (bool s : seen) CHECK(s);
}

TEST_CASE("zigzag map equals the scan definition oracle") {
  const auto oracle = zigzag_by_definition();
  const auto& map = qmat::zigzag_index_map();
  for (int i = 0; i < 64; ++i) CHECK(map[i] == oracle[i]);
}

TEST_CASE("zigzag round-trips on random matrices") {
  CounterRng rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    QuantMatrix q;
    for (int& v : q.steps) v = rng.uniform_int(1, 255);
    CHECK(qmat::inverse_zigzag(qmat::zigzag(q)) == q);
  }
}

TEST_CASE("qtarget takes the first nc zig-zag entries") {
  const QuantMatrix q = qmat::qf_to_table(50, Channel::luma);
  const qmat::QTarget t = qmat::qtarget_from_matrix(q, 15);
  REQUIRE(t.values.size() == 15);
  // Zig-zag order of the reference luminance table.
  const std::vector<int> expected = {16, 11, 12, 14, 12, 10, 16, 14,
                                     13, 14, 18, 17, 16, 19, 24};
  CHECK(t.values == expected);
  CHECK_THROWS_AS(qmat::qtarget_from_matrix(q, 0), std::invalid_argument);
  CHECK_THROWS_AS(qmat::qtarget_from_matrix(q, 65), std::invalid_argument);
}
