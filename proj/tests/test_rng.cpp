#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "qmat/rng.hpp"

using qmat::CounterRng;

TEST_CASE("same key reproduces the stream; at() is random access") {
  CounterRng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  CounterRng c(42);
  for (std::uint64_t i = 0; i < 50; ++i) CHECK(c.at(i) == CounterRng(42).at(i));
}

TEST_CASE("derived keys differ across tags and values") {
  std::set<std::uint64_t> keys;
  keys.insert(CounterRng::derive_key(1, "a"));
  keys.insert(CounterRng::derive_key(1, "b"));
  keys.insert(CounterRng::derive_key(2, "a"));
  keys.insert(CounterRng::derive_key(1, "a", 1));
  keys.insert(CounterRng::derive_key(1, "a", 0, 1));
  CHECK(keys.size() == 5);
}

TEST_CASE("uniform_int covers the range uniformly") {
  CounterRng rng(7);
  int counts[8] = {0};
  const int n = 80000;
  for (int i = 0; i < n; ++i) {
    const int v = rng.uniform_int(0, 7);
    REQUIRE(v >= 0);
    REQUIRE(v <= 7);
    counts[v]++;
  }
  for (int c : counts) {
    // ~4.7 sigma band around n/8
    CHECK(c > n / 8 - 500);
    CHECK(c < n / 8 + 500);
  }
}

TEST_CASE("next_double lies in [0,1), normal has sane moments") {
  CounterRng rng(9);
  double sum = 0.0, sq = 0.0;
  const int n = 50000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.next_double();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
  }
  for (int i = 0; i < n; ++i) {
    const double g = rng.normal();
    sum += g;
    sq += g * g;
  }
  CHECK(std::fabs(sum / n) < 0.02);
  CHECK(std::fabs(sq / n - 1.0) < 0.03);
}
