// Test-only oracles, kept independent of the library's computation paths:
// a cyclic two-sided Jacobi eigensolver for symmetric matrices, the
// double-loop covariance definition, and naive matrix helpers.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "fim/linalg.hpp"
#include "fim/rng.hpp"

namespace oracle {

// Eigenvalues of a symmetric matrix by classic two-sided Jacobi sweeps,
// returned in descending order.
inline std::vector<double> symmetric_eigenvalues(fim::Matrix s) {
  const std::size_t n = s.rows();
  for (std::size_t sweep = 0; sweep < 200; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) off += s(i, j) * s(i, j);
    }
    if (off < 1e-28 * (1.0 + fim::frobenius_norm(s))) break;

    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = s(p, q);
        if (apq == 0.0) continue;
        const double app = s(p, p);
        const double aqq = s(q, q);
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(1.0 + theta * theta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double sn = c * t;
        for (std::size_t k = 0; k < n; ++k) {
          const double skp = s(k, p);
          const double skq = s(k, q);
          s(k, p) = c * skp - sn * skq;
          s(k, q) = sn * skp + c * skq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double spk = s(p, k);
          const double sqk = s(q, k);
          s(p, k) = c * spk - sn * sqk;
          s(q, k) = sn * spk + c * sqk;
        }
      }
    }
  }
  std::vector<double> eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = s(i, i);
  std::sort(eig.begin(), eig.end(), std::greater<double>());
  return eig;
}

// Covariance straight from the definition, one pair of rows at a time.
inline fim::Matrix covariance_double_loop(const fim::Matrix& z) {
  const std::size_t b = z.rows();
  const std::size_t d = z.cols();
  std::vector<double> mean(d, 0.0);
  for (std::size_t r = 0; r < b; ++r) {
    for (std::size_t c = 0; c < d; ++c) mean[c] += z(r, c) / double(b);
  }
  fim::Matrix cov(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      double acc = 0.0;
      for (std::size_t r = 0; r < b; ++r) {
        acc += (z(r, i) - mean[i]) * (z(r, j) - mean[j]);
      }
      cov(i, j) = acc / double(b);
    }
  }
  return cov;
}

inline fim::Matrix random_matrix(std::size_t rows, std::size_t cols,
                                 fim::Rng& rng, double scale = 1.0) {
  fim::Matrix m(rows, cols);
  for (double& x : m.values()) x = rng.normal(0.0, scale);
  return m;
}

// Orthogonal matrix from Gram-Schmidt over random Gaussian columns.
inline fim::Matrix random_orthogonal(std::size_t n, fim::Rng& rng) {
  fim::Matrix q(n, n);
  for (std::size_t col = 0; col < n; ++col) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.normal();
    for (std::size_t prev = 0; prev < col; ++prev) {
      double dot = 0.0;
      for (std::size_t r = 0; r < n; ++r) dot += v[r] * q(r, prev);
      for (std::size_t r = 0; r < n; ++r) v[r] -= dot * q(r, prev);
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    for (std::size_t r = 0; r < n; ++r) q(r, col) = v[r] / norm;
  }
  return q;
}

// Pairwise-sum FM logit, the O(F^2 k) route.
inline double fm_logit_pairwise(const std::vector<std::vector<double>>& v) {
  double acc = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (std::size_t j = i + 1; j < v.size(); ++j) {
      for (std::size_t c = 0; c < v[i].size(); ++c) acc += v[i][c] * v[j][c];
    }
  }
  return acc;
}

inline double max_abs_diff(const fim::Matrix& a, const fim::Matrix& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.values().size(); ++i) {
    worst = std::max(worst, std::abs(a.values()[i] - b.values()[i]));
  }
  return worst;
}

}  // namespace oracle
