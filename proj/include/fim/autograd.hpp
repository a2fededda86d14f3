#pragma once

#include <cstdint>
#include <vector>

#include "fim/model.hpp"

namespace fim {

// Gradients for every parameter tensor (shapes mirror ModelParams) plus the
// per-sample per-field embedding gradients dL/dv_i, one F*dim row per
// sample, which feed the gradient spectrum diagnostics.
struct GradBundle {
  ModelParams tensors;
  Matrix per_sample_field;  // B x F*dim; empty for finite-difference bundles
};

// Gradients of the mean-batch BCE loss. The trace must come from
// model_forward on the same params revision and batch, otherwise a
// StalenessError is thrown.
GradBundle backward(const ModelSpec& spec, const ModelParams& params,
                    const ForwardTrace& trace, const Batch& batch);

// d(Phi)/d(v_i) for one sample of the trace, one vector per field.
// Independent of any loss; used against the closed-form oracle.
std::vector<std::vector<double>> logit_embedding_grads(
    const ModelSpec& spec, const ModelParams& params,
    const ForwardTrace& trace, const Batch& batch, std::size_t sample);

// (f(x+h) - f(x-h)) / 2h; the primitive finite_diff applies per coordinate.
double central_difference(const std::function<double(double)>& f, double x,
                          double h);

// Central-difference gradient of the mean-batch BCE for every parameter
// coordinate. Slow by construction; verification only.
GradBundle finite_diff(const ModelSpec& spec, const ModelParams& params,
                       const Batch& batch, double h);

struct OptimState {
  enum class Algo { sgd, adam };
  Algo algo = Algo::sgd;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t t = 0;
  ModelParams m;  // first moments, shaped lazily on the first step
  ModelParams v;  // second moments

  static OptimState sgd(double lr);
  static OptimState adam(double lr);
};

// One optimizer step in place; bumps params.revision.
void step(ModelParams& params, const GradBundle& grads, OptimState& opt);

}  // namespace fim
