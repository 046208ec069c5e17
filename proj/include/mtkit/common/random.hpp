#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace mtkit {

// Seeded generator whose derived draws are identical across standard
// library implementations. std::uniform_int_distribution and friends are
// implementation-defined, so every draw here is built from raw 64-bit
// engine output.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Unbiased integer in [0, bound). bound must be positive.
  std::uint64_t uniform_index(std::uint64_t bound) {
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % bound;
  }

  // Uniform double in [0, 1) with 53 bits of precision.
  double uniform_unit() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  bool fair_coin() { return (engine_() >> 63) != 0; }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_index(i));
      using std::swap;
      swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace mtkit
