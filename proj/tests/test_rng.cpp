#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "doctest.h"
#include "raan/rng.hpp"

using raan::SeededRng;

TEST_CASE("identical seeds give identical sequences") {
  SeededRng a(12345), b(12345);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("different seeds diverge") {
  SeededRng a(1), b(2);
  bool differ = false;
  for (int i = 0; i < 16 && !differ; ++i) differ = a.next_u64() != b.next_u64();
  CHECK(differ);
}

TEST_CASE("uniform stays in the half-open unit interval") {
  SeededRng rng(7);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("uniform range endpoints") {
  SeededRng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform(-2.0, 5.0);
    CHECK(u >= -2.0);
    CHECK(u < 5.0);
  }
}

TEST_CASE("uniform_index covers all residues without visible bias") {
  SeededRng rng(99);
  const std::uint64_t n = 7;
  std::vector<std::size_t> counts(n, 0);
  const int draws = 70000;
  for (int i = 0; i < draws; ++i) {
    const std::uint64_t k = rng.uniform_index(n);
    REQUIRE(k < n);
    counts[k]++;
  }
  // each bucket within 5 sigma of draws/n
  const double expect = draws / static_cast<double>(n);
  const double sigma = std::sqrt(expect * (1.0 - 1.0 / static_cast<double>(n)));
  for (std::size_t k = 0; k < n; ++k)
    CHECK(std::abs(static_cast<double>(counts[k]) - expect) < 5.0 * sigma);
}

TEST_CASE("normal moments are close to standard") {
  SeededRng rng(2024);
  const int n = 100000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sumsq += x * x;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.03);
}

TEST_CASE("shuffle is a permutation and depends on the seed") {
  std::vector<int> v(50);
  for (int i = 0; i < 50; ++i) v[i] = i;
  std::vector<int> w = v;
  SeededRng rng(5);
  rng.shuffle(w);
  std::vector<int> sorted = w;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == v);
  CHECK(w != v);  // 50! makes identity astronomically unlikely

  std::vector<int> w2 = v;
  SeededRng rng2(5);
  rng2.shuffle(w2);
  CHECK(w2 == w);
}

TEST_CASE("split produces an independent stream") {
  SeededRng a(11);
  SeededRng b = a.split();
  bool differ = false;
  for (int i = 0; i < 16 && !differ; ++i) differ = a.next_u64() != b.next_u64();
  CHECK(differ);

  // splitting is itself deterministic
  SeededRng a2(11);
  SeededRng b2 = a2.split();
  SeededRng a3(11);
  SeededRng b3 = a3.split();
  for (int i = 0; i < 100; ++i) CHECK(b2.next_u64() == b3.next_u64());
}

TEST_CASE("golden first outputs guard cross-platform drift") {
  // frozen from an independent implementation of splitmix64 + xoshiro256**
  SeededRng r0(0);
  CHECK(r0.next_u64() == 0x99ec5f36cb75f2b4ULL);
  CHECK(r0.next_u64() == 0xbf6e1f784956452aULL);
  CHECK(r0.next_u64() == 0x1a5f849d4933e6e0ULL);
  CHECK(r0.next_u64() == 0x6aa594f1262d2d2cULL);
  SeededRng r42(42);
  CHECK(r42.next_u64() == 0x15780b2e0c2ec716ULL);
  CHECK(r42.next_u64() == 0x6104d9866d113a7eULL);
  CHECK(r42.next_u64() == 0xae17533239e499a1ULL);
  CHECK(r42.next_u64() == 0xecb8ad4703b360a1ULL);
}
