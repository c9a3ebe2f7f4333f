#ifndef RAAN_MATRIX_HPP_
#define RAAN_MATRIX_HPP_

#include <cstddef>
#include <span>
#include <vector>

namespace raan {

/// Dense row-major matrix of doubles. The only storage type used across the
/// library; no view/stride machinery, shapes are checked at operation
/// boundaries.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool operator==(const DenseMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// a * b. Throws std::invalid_argument naming both shapes on a.cols != b.rows.
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);

/// a * b^T without materializing the transpose.
DenseMatrix matmul_transposed(const DenseMatrix& a, const DenseMatrix& b);

/// softmax(v / temperature), computed with the max subtracted before
/// exponentiation. Entries in (0,1], sum 1.
std::vector<double> stable_softmax(std::span<const double> v, double temperature);

/// Scale every row to unit Euclidean norm. Throws on a row with norm < 1e-12,
/// identifying the row index.
DenseMatrix l2_normalize_rows(const DenseMatrix& m);

double dot(std::span<const double> a, std::span<const double> b);

}  // namespace raan

#endif  // RAAN_MATRIX_HPP_
