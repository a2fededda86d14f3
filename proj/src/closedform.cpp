#include "fim/closedform.hpp"

#include <cmath>
#include <string>

#include "fim/errors.hpp"

namespace fim::closedform {

namespace {

void check_field_index(const std::vector<std::vector<double>>& embeddings,
                       std::size_t i) {
  if (embeddings.size() < 2) {
    throw ArityError("closed-form gradients need at least 2 fields");
  }
  if (i >= embeddings.size()) {
    throw DimensionError("field index " + std::to_string(i) +
                         " out of range for " +
                         std::to_string(embeddings.size()) + " fields");
  }
}

// Row vector w_out^T diag(1(pre > 0)) W_in for the given pre-activations.
std::vector<double> masked_row(const OneHiddenConfig& cfg,
                               const std::vector<double>& pre) {
  std::vector<double> row(cfg.w_in.cols(), 0.0);
  for (std::size_t h = 0; h < cfg.w_in.rows(); ++h) {
    if (pre[h] <= 0.0) continue;
    const double wh = cfg.w_out[h];
    const double* wrow = cfg.w_in.row(h);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += wh * wrow[c];
  }
  return row;
}

std::vector<double> preactivations(const OneHiddenConfig& cfg,
                                   const std::vector<double>& x) {
  if (cfg.w_in.cols() != x.size() || cfg.bias.size() != cfg.w_in.rows() ||
      cfg.w_out.size() != cfg.w_in.rows()) {
    throw DimensionError("one-hidden-layer config shapes do not chain");
  }
  std::vector<double> pre(cfg.w_in.rows());
  for (std::size_t h = 0; h < cfg.w_in.rows(); ++h) {
    const double* wrow = cfg.w_in.row(h);
    double acc = cfg.bias[h];
    for (std::size_t c = 0; c < x.size(); ++c) acc += wrow[c] * x[c];
    pre[h] = acc;
  }
  return pre;
}

}  // namespace

std::vector<double> fm_grad(const std::vector<std::vector<double>>& embeddings,
                            std::size_t i) {
  check_field_index(embeddings, i);
  const std::size_t k = embeddings[i].size();
  std::vector<double> grad(k, 0.0);
  for (std::size_t j = 0; j < embeddings.size(); ++j) {
    if (j == i) continue;
    if (embeddings[j].size() != k) {
      throw DimensionError("embeddings must share one dimension");
    }
    for (std::size_t c = 0; c < k; ++c) grad[c] += embeddings[j][c];
  }
  return grad;
}

std::vector<double> pdnn_grad(
    const std::vector<std::vector<double>>& embeddings, std::size_t i,
    const OneHiddenConfig& cfg) {
  check_field_index(embeddings, i);
  const std::size_t f = embeddings.size();
  const std::size_t k = embeddings[i].size();
  if (cfg.w_in.cols() != f * k) {
    throw DimensionError("parallel w_in must have fields*dim columns");
  }

  std::vector<double> concat;
  concat.reserve(f * k);
  for (const auto& v : embeddings) concat.insert(concat.end(), v.begin(), v.end());

  const std::vector<double> pre = preactivations(cfg, concat);
  const std::vector<double> row = masked_row(cfg, pre);

  std::vector<double> grad = fm_grad(embeddings, i);
  for (std::size_t c = 0; c < k; ++c) grad[c] += row[i * k + c];
  return grad;
}

std::vector<double> sdnn_grad(
    const std::vector<std::vector<double>>& embeddings, std::size_t i,
    const OneHiddenConfig& cfg) {
  check_field_index(embeddings, i);
  const std::size_t f = embeddings.size();
  const std::size_t k = embeddings[i].size();
  if (cfg.w_in.cols() != k) {
    throw DimensionError("stacked w_in must have dim columns");
  }

  // Bi-interaction evaluated pairwise, independently of the model path.
  std::vector<double> bi(k, 0.0);
  for (std::size_t a = 0; a < f; ++a) {
    for (std::size_t b = a + 1; b < f; ++b) {
      for (std::size_t c = 0; c < k; ++c) bi[c] += embeddings[a][c] * embeddings[b][c];
    }
  }

  const std::vector<double> pre = preactivations(cfg, bi);
  const std::vector<double> weighting = masked_row(cfg, pre);

  std::vector<double> others(k, 0.0);
  for (std::size_t j = 0; j < f; ++j) {
    if (j == i) continue;
    for (std::size_t c = 0; c < k; ++c) others[c] += embeddings[j][c];
  }

  std::vector<double> grad(k);
  for (std::size_t c = 0; c < k; ++c) grad[c] = weighting[c] * others[c];
  return grad;
}

double span_check(const std::vector<double>& grad,
                  const std::vector<std::vector<double>>& basis) {
  if (basis.empty()) {
    throw ArityError("span_check needs a nonempty basis");
  }

  double max_norm = 0.0;
  for (const auto& v : basis) {
    double n = 0.0;
    for (double x : v) n += x * x;
    max_norm = std::max(max_norm, std::sqrt(n));
  }

  // Modified Gram-Schmidt; vectors that vanish after projection are
  // dropped, which handles linearly dependent bases.
  std::vector<std::vector<double>> q;
  const double drop_tol = 1e-12 * std::max(max_norm, 1.0);
  for (const auto& v : basis) {
    if (v.size() != grad.size()) {
      throw DimensionError("basis vectors must match gradient length");
    }
    std::vector<double> w = v;
    for (const auto& qv : q) {
      double dot = 0.0;
      for (std::size_t c = 0; c < w.size(); ++c) dot += w[c] * qv[c];
      for (std::size_t c = 0; c < w.size(); ++c) w[c] -= dot * qv[c];
    }
    double n = 0.0;
    for (double x : w) n += x * x;
    n = std::sqrt(n);
    if (n <= drop_tol) continue;
    for (double& x : w) x /= n;
    q.push_back(std::move(w));
  }

  std::vector<double> resid = grad;
  for (const auto& qv : q) {
    double dot = 0.0;
    for (std::size_t c = 0; c < resid.size(); ++c) dot += resid[c] * qv[c];
    for (std::size_t c = 0; c < resid.size(); ++c) resid[c] -= dot * qv[c];
  }
  double n = 0.0;
  for (double x : resid) n += x * x;
  return std::sqrt(n);
}

}  // namespace fim::closedform
