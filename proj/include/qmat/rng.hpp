#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace qmat {

// Counter-based deterministic generator (splitmix64 over key + counter).
// Identical output for identical (key, counter) on every platform, and
// random access via at(i) so parallel consumers stay reproducible.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Key derivation: fold a tag string and up to two values into a seed.
  // The seed is avalanched before the tag folds in, so low-entropy seeds
  // cannot alias with leading tag bytes.
  static std::uint64_t derive_key(std::uint64_t seed, std::string_view tag,
                                  std::uint64_t a = 0, std::uint64_t b = 0) {
    std::uint64_t h = 0xcbf29ce484222325ull ^ mix(seed);
    for (char c : tag) h = (h ^ static_cast<unsigned char>(c)) * 0x100000001b3ull;
    h = mix(h ^ mix(a));
    h = mix(h ^ mix(b + 0x632be59bd9b4e019ull));
    return h;
  }

  // Stateless random access into the stream.
  std::uint64_t at(std::uint64_t i) const { return mix(key_ + i * 0x9e3779b97f4a7c15ull); }

  std::uint64_t next_u64() { return at(counter_++); }
  std::uint32_t next_u32() { return static_cast<std::uint32_t>(next_u64() >> 32); }

  // Uniform double in [0, 1), 53-bit resolution.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  static double to_double(std::uint64_t v) { return static_cast<double>(v >> 11) * 0x1.0p-53; }

  // Uniform integer in [lo, hi], inclusive. Unbiased via rejection.
  int uniform_int(int lo, int hi) {
    const std::uint64_t range = static_cast<std::uint64_t>(hi) - lo + 1;
    const std::uint64_t limit = ~0ull - ~0ull % range;
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return lo + static_cast<int>(v % range);
  }

  // Standard normal via Box-Muller (no cached second value, keeps state trivial).
  double normal() {
    double u1 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace qmat
