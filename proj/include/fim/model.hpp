#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fim/data.hpp"
#include "fim/linalg.hpp"

namespace fim {

enum class Backbone { fm, crossnet };

enum class Head { none, p_dnn, s_dnn, linear_p_dnn, linear_s_dnn };

enum class Activation { relu, identity };

bool head_is_parallel(Head h);
bool head_is_stacked(Head h);
Activation head_activation(Head h);

std::string to_string(Backbone b);
std::string to_string(Head h);
Backbone backbone_from_string(const std::string& s);
Head head_from_string(const std::string& s);

// Variant selector plus every shape the parameter tensors derive from.
struct ModelSpec {
  Backbone backbone = Backbone::fm;
  Head head = Head::none;
  std::size_t embed_dim = 8;
  std::vector<std::size_t> mlp_hidden = {64, 64};
  std::size_t cross_depth = 2;
  std::uint64_t init_seed = 1;

  std::string variant_name() const;
};

// Per-field embedding matrices, each vocab_size x dim.
struct EmbeddingTable {
  std::vector<Matrix> field;
  std::size_t dim = 0;
};

// MLP head: hidden layers w[l] (width_l x in_l) with biases b[l] (1 x
// width_l), then a scalar readout out_w (1 x width_L) + out_b (1 x 1).
struct MlpParams {
  std::vector<Matrix> w;
  std::vector<Matrix> b;
  Matrix out_w;
  Matrix out_b;
  Activation act = Activation::relu;
};

// Cross layers x_{l+1} = x0 .* (W_l x_l + b_l) + x_l over the concatenated
// embedding vector (d = fields * dim); readout_w/b produce the scalar logit
// when the cross output is not consumed by a stacked head.
struct CrossParams {
  std::vector<Matrix> w;  // d x d
  std::vector<Matrix> b;  // 1 x d
  Matrix readout_w;       // 1 x d, absent for stacked heads
  Matrix readout_b;       // 1 x 1
};

// All learnable state. `revision` is bumped by optimizer steps so stale
// forward traces can be detected.
struct ModelParams {
  EmbeddingTable embeddings;
  CrossParams cross;
  MlpParams mlp;
  std::uint64_t revision = 0;
};

// Embeddings ~ N(0, 0.01^2), linear weights ~ U(+-sqrt(6/(fan_in+fan_out))),
// biases zero. Draw order is fixed so a seed pins every tensor.
ModelParams init_params(const ModelSpec& spec,
                        const std::vector<std::size_t>& vocab_sizes);

// Named tensors in a fixed order shared by checkpoints, optimizers and
// gradient bundles.
struct TensorRef {
  std::string name;
  Matrix* tensor;
};
struct ConstTensorRef {
  std::string name;
  const Matrix* tensor;
};
std::vector<TensorRef> named_tensors(ModelParams& p);
std::vector<ConstTensorRef> named_tensors(const ModelParams& p);

// Everything backward needs, cached per batch. Re-running forward on the
// same params and batch reproduces the trace bit for bit.
struct ForwardTrace {
  std::uint64_t params_revision = 0;
  std::size_t batch = 0;
  std::size_t fields = 0;
  std::size_t dim = 0;

  Matrix concat;     // B x F*dim, concatenated field embeddings
  Matrix field_sum;  // B x dim (FM backbone only)
  Matrix interaction;  // B x dim (FM bi-interaction) or B x d (cross output)

  std::vector<Matrix> cross_x;    // L+1 states, each B x d
  std::vector<Matrix> cross_pre;  // L pre-products W x_l + b, each B x d

  Matrix mlp_in;                  // B x mlp input width
  std::vector<Matrix> mlp_pre;    // per hidden layer, B x width

  std::vector<double> backbone_logit;  // B, absent for stacked heads
  std::vector<double> logit;           // Phi
  std::vector<double> p;               // sigmoid(Phi)
};

// Pairwise dot-product logit over F >= 2 field embeddings, computed via the
// O(F k) identity 0.5 (|sum v|^2 - sum |v|^2).
double fm_logit(const std::vector<std::vector<double>>& embeddings);

// Elementwise pairwise Hadamard sum; its component sum equals fm_logit.
std::vector<double> bi_interaction(
    const std::vector<std::vector<double>>& embeddings);

std::vector<double> cross_forward(const std::vector<double>& x0,
                                  const CrossParams& params);

double mlp_forward(const std::vector<double>& x, const MlpParams& params);

ForwardTrace model_forward(const ModelSpec& spec, const ModelParams& params,
                           const Batch& batch);

double sigmoid(double x);

// Binary cross-entropy with the probability clamped to [1e-12, 1 - 1e-12].
double bce_loss(double p, int y);

double mean_bce(const ForwardTrace& trace,
                const std::vector<std::uint8_t>& labels);

}  // namespace fim
