#include "fim/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace fim {

namespace {

constexpr std::size_t kMaxSweeps = 100;
constexpr double kJacobiTol = 1e-12;  // relative off-diagonal threshold

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {
  if (rows == 0 || cols == 0) {
    throw DimensionError("Matrix dimensions must be positive, got " +
                         std::to_string(rows) + "x" + std::to_string(cols));
  }
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (rows == 0 || cols == 0) {
    throw DimensionError("Matrix dimensions must be positive, got " +
                         std::to_string(rows) + "x" + std::to_string(cols));
  }
  if (data_.size() != rows * cols) {
    throw DimensionError("Matrix data length " + std::to_string(data_.size()) +
                         " does not match " + std::to_string(rows) + "x" +
                         std::to_string(cols));
  }
  if (!all_finite()) {
    throw NumericError("Matrix construction saw a non-finite entry");
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

bool Matrix::all_finite() const {
  for (double x : data_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

double frobenius_norm(const Matrix& a) {
  double s = 0.0;
  for (double x : a.values()) s += x * x;
  return std::sqrt(s);
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) t(c, r) = a(r, c);
  }
  return t;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul shape mismatch: " + shape_str(a) + " * " +
                         shape_str(b));
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* arow = a.row(i);
    double* orow = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = arow[k];
      if (aik == 0.0) continue;
      const double* brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

Matrix covariance(const Matrix& z) {
  if (z.rows() < 2) {
    throw DegenerateInputError(
        "covariance needs at least 2 rows, got " + std::to_string(z.rows()));
  }
  const std::size_t n = z.rows();
  const std::size_t d = z.cols();

  std::vector<double> mean(d, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    const double* row = z.row(r);
    for (std::size_t c = 0; c < d; ++c) mean[c] += row[c];
  }
  for (double& m : mean) m /= static_cast<double>(n);

  // C[i][j] and C[j][i] accumulate in the same order, so the result is
  // bitwise symmetric.
  Matrix c(d, d);
  std::vector<double> centered(d);
  for (std::size_t r = 0; r < n; ++r) {
    const double* row = z.row(r);
    for (std::size_t k = 0; k < d; ++k) centered[k] = row[k] - mean[k];
    for (std::size_t i = 0; i < d; ++i) {
      const double ci = centered[i];
      double* crow = c.row(i);
      for (std::size_t j = 0; j < d; ++j) crow[j] += ci * centered[j];
    }
  }
  for (double& x : c.values()) x /= static_cast<double>(n);
  return c;
}

namespace {

// Orthogonalizes the rows of `wt` (the columns of the original matrix,
// stored contiguously) by cyclic Hestenes rotations, accumulating them
// into the rows of `vt`. Returns false when the sweep cap is hit before a
// full rotation-free sweep.
bool jacobi_orthogonalize(Matrix& wt, Matrix& vt, std::size_t& sweeps_used) {
  const std::size_t n = wt.rows();
  const std::size_t m = wt.cols();

  // Row Gram diagonals are cached per sweep and updated after each
  // rotation; the off-diagonal dot is computed fresh per pair.
  std::vector<double> rowsq(n, 0.0);

  for (std::size_t sweep = 0; sweep < kMaxSweeps; ++sweep) {
    sweeps_used = sweep + 1;
    for (std::size_t j = 0; j < n; ++j) {
      const double* row = wt.row(j);
      double s = 0.0;
      for (std::size_t r = 0; r < m; ++r) s += row[r] * row[r];
      rowsq[j] = s;
    }

    bool rotated = false;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double aii = rowsq[i];
        const double ajj = rowsq[j];
        if (aii == 0.0 || ajj == 0.0) continue;

        double* wi = wt.row(i);
        double* wj = wt.row(j);
        double aij = 0.0;
        for (std::size_t r = 0; r < m; ++r) aij += wi[r] * wj[r];
        if (std::abs(aij) <= kJacobiTol * std::sqrt(aii * ajj)) continue;

        const double tau = (ajj - aii) / (2.0 * aij);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;

        for (std::size_t r = 0; r < m; ++r) {
          const double x = wi[r];
          const double y = wj[r];
          wi[r] = c * x - s * y;
          wj[r] = s * x + c * y;
        }
        double* vi = vt.row(i);
        double* vj = vt.row(j);
        for (std::size_t r = 0; r < n; ++r) {
          const double x = vi[r];
          const double y = vj[r];
          vi[r] = c * x - s * y;
          vj[r] = s * x + c * y;
        }

        rowsq[i] = c * c * aii - 2.0 * c * s * aij + s * s * ajj;
        rowsq[j] = s * s * aii + 2.0 * c * s * aij + c * c * ajj;
        rotated = true;
      }
    }
    if (!rotated) return true;
  }
  return false;
}

// Fills columns of u whose singular value vanished with unit vectors
// orthogonal to the columns already present: for each missing column the
// standard-basis axis with the largest residual after projection is
// normalized and inserted (two projection passes for orthogonality).
void complete_basis(Matrix& u, std::vector<bool>& filled) {
  const std::size_t m = u.rows();
  const std::size_t r = u.cols();

  auto project_out_filled = [&](std::vector<double>& cand) {
    for (std::size_t other = 0; other < r; ++other) {
      if (!filled[other]) continue;
      double dot = 0.0;
      for (std::size_t rr = 0; rr < m; ++rr) dot += cand[rr] * u(rr, other);
      for (std::size_t rr = 0; rr < m; ++rr) cand[rr] -= dot * u(rr, other);
    }
  };

  for (std::size_t j = 0; j < r; ++j) {
    if (filled[j]) continue;
    std::vector<double> best;
    double best_norm = -1.0;
    for (std::size_t axis = 0; axis < m; ++axis) {
      std::vector<double> cand(m, 0.0);
      cand[axis] = 1.0;
      project_out_filled(cand);
      double norm = 0.0;
      for (double x : cand) norm += x * x;
      norm = std::sqrt(norm);
      if (norm > best_norm) {
        best_norm = norm;
        best = std::move(cand);
      }
    }
    project_out_filled(best);
    double norm = 0.0;
    for (double x : best) norm += x * x;
    norm = std::sqrt(norm);
    for (std::size_t rr = 0; rr < m; ++rr) u(rr, j) = best[rr] / norm;
    filled[j] = true;
  }
}

}  // namespace

SvdResult svd(const Matrix& a) {
  if (a.empty()) {
    throw DimensionError("svd requires a nonempty matrix");
  }
  if (!a.all_finite()) {
    throw NumericError("svd input has a non-finite entry");
  }

  // Work on the tall orientation; swap factors back at the end. The
  // working buffer holds the columns of A as contiguous rows.
  const bool transposed = a.rows() < a.cols();
  Matrix wt = transposed ? a : transpose(a);
  const std::size_t n = wt.rows();
  const std::size_t m = wt.cols();
  Matrix vt = Matrix::identity(n);

  std::size_t sweeps = 0;
  if (!jacobi_orthogonalize(wt, vt, sweeps)) {
    throw ConvergenceError(
        "svd did not converge within " + std::to_string(sweeps) + " sweeps",
        sweeps);
  }

  std::vector<double> norms(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const double* row = wt.row(j);
    double s = 0.0;
    for (std::size_t r = 0; r < m; ++r) s += row[r] * row[r];
    norms[j] = std::sqrt(s);
  }

  // Descending stable order; ties keep the original column index.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return norms[x] > norms[y];
  });

  const double fro = frobenius_norm(a);
  const double zero_tol = fro * 1e-14;

  Matrix u(m, n);
  Matrix vperm(n, n);
  std::vector<double> sigma(n);
  std::vector<bool> filled(n, false);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t src = order[j];
    sigma[j] = std::max(norms[src], 0.0);  // clamp round-off negatives
    for (std::size_t r = 0; r < n; ++r) vperm(r, j) = vt(src, r);
    if (norms[src] > zero_tol && norms[src] > 0.0) {
      const double* row = wt.row(src);
      for (std::size_t r = 0; r < m; ++r) u(r, j) = row[r] / norms[src];
      filled[j] = true;
    }
  }
  complete_basis(u, filled);

  SvdResult result;
  if (transposed) {
    result.u = std::move(vperm);
    result.v = std::move(u);
  } else {
    result.u = std::move(u);
    result.v = std::move(vperm);
  }
  result.sigma = std::move(sigma);
  return result;
}

}  // namespace fim
