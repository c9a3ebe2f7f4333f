#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "raan/matrix.hpp"

using raan::DenseMatrix;

TEST_CASE("matmul matches hand-computed product") {
  DenseMatrix a(2, 3, {1, 2, 3, 4, 5, 6});
  DenseMatrix b(3, 2, {7, 8, 9, 10, 11, 12});
  DenseMatrix c = raan::matmul(a, b);
  CHECK(c.rows() == 2);
  CHECK(c.cols() == 2);
  CHECK(c(0, 0) == 58);
  CHECK(c(0, 1) == 64);
  CHECK(c(1, 0) == 139);
  CHECK(c(1, 1) == 154);
}

TEST_CASE("matmul rejects mismatched shapes") {
  DenseMatrix a(2, 3);
  DenseMatrix b(2, 2);
  CHECK_THROWS_AS(raan::matmul(a, b), std::invalid_argument);
}

TEST_CASE("matmul_transposed equals matmul against the transpose") {
  DenseMatrix a(2, 3, {1, -2, 3, 0.5, 4, -1});
  DenseMatrix b(4, 3, {2, 1, 0, -1, 3, 2, 0, 0, 1, 5, -2, 4});
  DenseMatrix bt(3, 4);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 3; ++j) bt(j, i) = b(i, j);
  DenseMatrix lhs = raan::matmul_transposed(a, b);
  DenseMatrix rhs = raan::matmul(a, bt);
  REQUIRE(lhs.rows() == rhs.rows());
  REQUIRE(lhs.cols() == rhs.cols());
  for (std::size_t i = 0; i < lhs.size(); ++i)
    CHECK(lhs.data()[i] == doctest::Approx(rhs.data()[i]).epsilon(1e-14));
}

TEST_CASE("stable_softmax sums to one and orders by value") {
  std::vector<double> v{0.3, -1.2, 2.0, 0.0};
  std::vector<double> p = raan::stable_softmax(v, 0.7);
  double sum = 0.0;
  for (double x : p) {
    CHECK(x > 0.0);
    sum += x;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(p[2] > p[0]);
  CHECK(p[0] > p[3]);
  CHECK(p[3] > p[1]);
}

TEST_CASE("stable_softmax survives large magnitudes") {
  std::vector<double> v{1e4, 1e4 - 1.0};
  std::vector<double> p = raan::stable_softmax(v, 1.0);
  CHECK(std::isfinite(p[0]));
  CHECK(p[0] + p[1] == doctest::Approx(1.0));
  // ratio is exp(1) regardless of the shared offset
  CHECK(p[0] / p[1] == doctest::Approx(std::exp(1.0)).epsilon(1e-12));
}

TEST_CASE("stable_softmax temperature extremes") {
  std::vector<double> v{0.9, 0.1, 0.5};
  std::vector<double> hot = raan::stable_softmax(v, 1e9);
  for (double x : hot) CHECK(x == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
  std::vector<double> cold = raan::stable_softmax(v, 1e-6);
  CHECK(cold[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("stable_softmax input validation") {
  std::vector<double> empty;
  CHECK_THROWS_AS(raan::stable_softmax(empty, 1.0), std::invalid_argument);
  std::vector<double> v{1.0};
  CHECK_THROWS_AS(raan::stable_softmax(v, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(raan::stable_softmax(v, -1.0), std::invalid_argument);
}

TEST_CASE("l2_normalize_rows produces unit rows") {
  DenseMatrix m(3, 2, {3, 4, 1, 0, -2, 2});
  DenseMatrix z = raan::l2_normalize_rows(m);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(raan::dot(z.row(i), z.row(i)) == doctest::Approx(1.0).epsilon(1e-14));
  }
  CHECK(z(0, 0) == doctest::Approx(0.6));
  CHECK(z(0, 1) == doctest::Approx(0.8));
}

TEST_CASE("l2_normalize_rows rejects near-zero rows") {
  DenseMatrix m(2, 2, {1, 1, 0, 0});
  CHECK_THROWS_AS(raan::l2_normalize_rows(m), std::invalid_argument);
}

TEST_CASE("dot is the plain inner product") {
  std::vector<double> a{1, 2, 3}, b{4, -5, 6};
  CHECK(raan::dot(a, b) == doctest::Approx(12.0));
}
