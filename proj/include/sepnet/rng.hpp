#pragma once

// Portable PRNG so seeds reproduce across platforms and languages.
//
// Generator: xoshiro256** (Blackman & Vigna), state seeded by four successive
// outputs of splitmix64 starting from the user seed.
//   uniform()  = (next() >> 11) * 2^-53, in [0, 1)
//   normal()   = Box-Muller on two uniforms, u1 mapped to (0, 1]
//   below(n)   = rejection sampling on next() for an unbiased index

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>

namespace sepnet {

class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  std::uint64_t below(std::uint64_t n);

  /// Fisher-Yates from the back.
  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t s_[4];
};

std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace sepnet
