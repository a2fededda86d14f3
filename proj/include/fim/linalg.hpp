#pragma once

#include <cstddef>
#include <vector>

#include "fim/errors.hpp"

namespace fim {

// Dense row-major matrix of doubles. The single numeric carrier used across
// the project; sized for small dense work (dimensions up to a few hundred).
class Matrix {
 public:
  Matrix() = default;

  // Zero-filled rows x cols matrix.
  Matrix(std::size_t rows, std::size_t cols);

  // Takes ownership of row-major data; validates length and finiteness.
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  double* row(std::size_t r) { return data_.data() + r * cols_; }
  const double* row(std::size_t r) const { return data_.data() + r * cols_; }

  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  bool all_finite() const;

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Thin SVD A = U diag(sigma) V^T with r = min(rows, cols) columns.
// sigma is sorted descending (ties broken by original column order) and
// nonnegative; U and V have orthonormal columns even for rank-deficient
// input (missing directions are completed from the standard basis).
struct SvdResult {
  Matrix u;                   // m x r
  std::vector<double> sigma;  // length r
  Matrix v;                   // n x r
};

double frobenius_norm(const Matrix& a);
Matrix transpose(const Matrix& a);

// Standard product; throws DimensionError when inner dimensions disagree.
Matrix matmul(const Matrix& a, const Matrix& b);

// Biased sample covariance (1/B) sum_i (z_i - mean)(z_i - mean)^T over the
// rows of z. Requires at least two rows.
Matrix covariance(const Matrix& z);

// One-sided Jacobi SVD. Deterministic cyclic pair order, capped at 100
// sweeps; throws ConvergenceError (with the sweep count) past the cap and
// NumericError on non-finite input.
SvdResult svd(const Matrix& a);

}  // namespace fim
