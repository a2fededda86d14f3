#pragma once

#include <cstddef>
#include <vector>

#include "fim/linalg.hpp"

namespace fim::closedform {

// One-hidden-layer ReLU network used by the analytic embedding-gradient
// formulas: w_in is H x (fields*dim) for the parallel form and H x dim for
// the stacked form; bias and w_out have length H.
struct OneHiddenConfig {
  Matrix w_in;
  std::vector<double> bias;
  std::vector<double> w_out;
  std::size_t fields = 0;
  std::size_t dim = 0;
};

// d(Phi_FM)/dv_i = sum_{j != i} v_j, summed term by term (kept independent
// of the identity-based route the trained model uses).
std::vector<double> fm_grad(const std::vector<std::vector<double>>& embeddings,
                            std::size_t i);

// Parallel head: fm_grad plus the block of w_out^T D W_in belonging to
// field i, where D masks rows by the sign of W_in concat{v} + b.
std::vector<double> pdnn_grad(
    const std::vector<std::vector<double>>& embeddings, std::size_t i,
    const OneHiddenConfig& cfg);

// Stacked head: the dimension-wise weighting vector w_out^T D W_in applied
// elementwise to sum_{j != i} v_j, with D evaluated at the bi-interaction
// vector.
std::vector<double> sdnn_grad(
    const std::vector<std::vector<double>>& embeddings, std::size_t i,
    const OneHiddenConfig& cfg);

// Norm of grad's component orthogonal to span(basis); rank-revealing
// Gram-Schmidt, so degenerate bases are handled.
double span_check(const std::vector<double>& grad,
                  const std::vector<std::vector<double>>& basis);

}  // namespace fim::closedform
