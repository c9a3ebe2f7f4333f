#ifndef RAAN_RNG_HPP_
#define RAAN_RNG_HPP_

#include <cstdint>
#include <vector>

namespace raan {

/// Deterministic 64-bit generator: xoshiro256** (Blackman & Vigna), state
/// seeded through splitmix64. Identical seed gives the identical sequence on
/// every platform; no libc++/libstdc++ distribution code is involved.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed);

  std::uint64_t next_u64();

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi);

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t uniform_index(std::uint64_t n);

  /// Standard normal via Box-Muller (both values consumed in order).
  double normal();

  /// Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_index(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  /// Derive an independent stream (used to give workers their own rng).
  SeededRng split();

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
  bool have_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

}  // namespace raan

#endif  // RAAN_RNG_HPP_
