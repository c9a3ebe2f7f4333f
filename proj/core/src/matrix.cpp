#include "raan/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace raan {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw std::invalid_argument("DenseMatrix: data length " + std::to_string(data_.size()) +
                                " does not match " + std::to_string(rows_) + "x" +
                                std::to_string(cols_));
  }
}

namespace {
std::string shape_str(const DenseMatrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}
}  // namespace

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a) + " * " +
                                shape_str(b));
  }
  DenseMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const auto brow = b.row(k);
      auto orow = out.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

DenseMatrix matmul_transposed(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.cols()) {
    throw std::invalid_argument("matmul_transposed: incompatible shapes " + shape_str(a) +
                                " * " + shape_str(b) + "^T");
  }
  DenseMatrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      out(i, j) = dot(a.row(i), b.row(j));
    }
  }
  return out;
}

std::vector<double> stable_softmax(std::span<const double> v, double temperature) {
  if (v.empty()) throw std::invalid_argument("stable_softmax: empty input");
  if (!(temperature > 0.0)) {
    throw std::invalid_argument("stable_softmax: temperature must be positive, got " +
                                std::to_string(temperature));
  }
  const double vmax = *std::max_element(v.begin(), v.end());
  std::vector<double> out(v.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp((v[i] - vmax) / temperature);
    sum += out[i];
  }
  for (double& x : out) x /= sum;
  return out;
}

DenseMatrix l2_normalize_rows(const DenseMatrix& m) {
  DenseMatrix out = m;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double norm = std::sqrt(dot(m.row(i), m.row(i)));
    if (norm < 1e-12) {
      throw std::invalid_argument("l2_normalize_rows: row " + std::to_string(i) +
                                  " has near-zero norm " + std::to_string(norm));
    }
    auto row = out.row(i);
    for (double& x : row) x /= norm;
  }
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace raan
