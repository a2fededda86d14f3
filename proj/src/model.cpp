#include "fim/model.hpp"

#include <cmath>

#include "fim/rng.hpp"

namespace fim {

bool head_is_parallel(Head h) {
  return h == Head::p_dnn || h == Head::linear_p_dnn;
}

bool head_is_stacked(Head h) {
  return h == Head::s_dnn || h == Head::linear_s_dnn;
}

Activation head_activation(Head h) {
  return (h == Head::linear_p_dnn || h == Head::linear_s_dnn)
             ? Activation::identity
             : Activation::relu;
}

std::string to_string(Backbone b) {
  return b == Backbone::fm ? "fm" : "crossnet";
}

std::string to_string(Head h) {
  switch (h) {
    case Head::none: return "none";
    case Head::p_dnn: return "p_dnn";
    case Head::s_dnn: return "s_dnn";
    case Head::linear_p_dnn: return "linear_p_dnn";
    case Head::linear_s_dnn: return "linear_s_dnn";
  }
  return "none";
}

Backbone backbone_from_string(const std::string& s) {
  if (s == "fm") return Backbone::fm;
  if (s == "crossnet") return Backbone::crossnet;
  throw ConfigError("unknown backbone '" + s + "' (fm | crossnet)");
}

Head head_from_string(const std::string& s) {
  if (s == "none") return Head::none;
  if (s == "p_dnn") return Head::p_dnn;
  if (s == "s_dnn") return Head::s_dnn;
  if (s == "linear_p_dnn") return Head::linear_p_dnn;
  if (s == "linear_s_dnn") return Head::linear_s_dnn;
  throw ConfigError(
      "unknown head '" + s +
      "' (none | p_dnn | s_dnn | linear_p_dnn | linear_s_dnn)");
}

std::string ModelSpec::variant_name() const {
  return to_string(backbone) +
         (head == Head::none ? "" : "+" + to_string(head));
}

namespace {

Matrix glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  const double limit =
      std::sqrt(6.0 / static_cast<double>(rows + cols));
  for (double& x : m.values()) x = rng.uniform(-limit, limit);
  return m;
}

}  // namespace

ModelParams init_params(const ModelSpec& spec,
                        const std::vector<std::size_t>& vocab_sizes) {
  if (vocab_sizes.empty()) {
    throw DimensionError("init_params needs at least one field");
  }
  Rng rng(spec.init_seed);
  ModelParams params;
  params.embeddings.dim = spec.embed_dim;
  for (std::size_t vocab : vocab_sizes) {
    Matrix m(vocab, spec.embed_dim);
    for (double& x : m.values()) x = rng.normal(0.0, 0.01);
    params.embeddings.field.push_back(std::move(m));
  }

  const std::size_t d = vocab_sizes.size() * spec.embed_dim;
  if (spec.backbone == Backbone::crossnet) {
    for (std::size_t l = 0; l < spec.cross_depth; ++l) {
      params.cross.w.push_back(glorot_uniform(d, d, rng));
      params.cross.b.push_back(Matrix(1, d));
    }
    if (!head_is_stacked(spec.head)) {
      params.cross.readout_w = glorot_uniform(1, d, rng);
      params.cross.readout_b = Matrix(1, 1);
    }
  }

  if (spec.head != Head::none) {
    const std::size_t in = head_is_parallel(spec.head)
                               ? d
                               : (spec.backbone == Backbone::fm ? spec.embed_dim
                                                                : d);
    std::size_t prev = in;
    for (std::size_t width : spec.mlp_hidden) {
      params.mlp.w.push_back(glorot_uniform(width, prev, rng));
      params.mlp.b.push_back(Matrix(1, width));
      prev = width;
    }
    params.mlp.out_w = glorot_uniform(1, prev, rng);
    params.mlp.out_b = Matrix(1, 1);
    params.mlp.act = head_activation(spec.head);
  }
  return params;
}

namespace {

template <class Params, class Ref>
std::vector<Ref> collect_tensors(Params& p) {
  std::vector<Ref> out;
  for (std::size_t f = 0; f < p.embeddings.field.size(); ++f) {
    out.push_back({"embed.f" + std::to_string(f), &p.embeddings.field[f]});
  }
  for (std::size_t l = 0; l < p.cross.w.size(); ++l) {
    out.push_back({"cross.w" + std::to_string(l), &p.cross.w[l]});
    out.push_back({"cross.b" + std::to_string(l), &p.cross.b[l]});
  }
  if (!p.cross.readout_w.empty()) {
    out.push_back({"cross.readout_w", &p.cross.readout_w});
    out.push_back({"cross.readout_b", &p.cross.readout_b});
  }
  for (std::size_t l = 0; l < p.mlp.w.size(); ++l) {
    out.push_back({"mlp.w" + std::to_string(l), &p.mlp.w[l]});
    out.push_back({"mlp.b" + std::to_string(l), &p.mlp.b[l]});
  }
  if (!p.mlp.out_w.empty()) {
    out.push_back({"mlp.out_w", &p.mlp.out_w});
    out.push_back({"mlp.out_b", &p.mlp.out_b});
  }
  return out;
}

}  // namespace

std::vector<TensorRef> named_tensors(ModelParams& p) {
  return collect_tensors<ModelParams, TensorRef>(p);
}

std::vector<ConstTensorRef> named_tensors(const ModelParams& p) {
  return collect_tensors<const ModelParams, ConstTensorRef>(p);
}

double fm_logit(const std::vector<std::vector<double>>& embeddings) {
  if (embeddings.size() < 2) {
    throw ArityError("fm_logit needs at least 2 fields, got " +
                     std::to_string(embeddings.size()));
  }
  const std::size_t k = embeddings.front().size();
  double sum_sq = 0.0;   // |sum v|^2, accumulated per component
  double sq_sum = 0.0;   // sum |v|^2
  for (std::size_t c = 0; c < k; ++c) {
    double s = 0.0;
    for (const auto& v : embeddings) {
      if (v.size() != k) {
        throw DimensionError("fm_logit embeddings must share one dimension");
      }
      s += v[c];
      sq_sum += v[c] * v[c];
    }
    sum_sq += s * s;
  }
  return 0.5 * (sum_sq - sq_sum);
}

std::vector<double> bi_interaction(
    const std::vector<std::vector<double>>& embeddings) {
  if (embeddings.size() < 2) {
    throw ArityError("bi_interaction needs at least 2 fields, got " +
                     std::to_string(embeddings.size()));
  }
  const std::size_t k = embeddings.front().size();
  std::vector<double> out(k);
  for (std::size_t c = 0; c < k; ++c) {
    double s = 0.0;
    double sq = 0.0;
    for (const auto& v : embeddings) {
      if (v.size() != k) {
        throw DimensionError("bi_interaction embeddings must share one dimension");
      }
      s += v[c];
      sq += v[c] * v[c];
    }
    out[c] = 0.5 * (s * s - sq);
  }
  return out;
}

namespace {

// Shared by the public op and the traced batch forward.
void cross_layers(const std::vector<double>& x0, const CrossParams& params,
                  std::vector<std::vector<double>>* states,
                  std::vector<std::vector<double>>* pres,
                  std::vector<double>& out) {
  const std::size_t d = x0.size();
  std::vector<double> x = x0;
  if (states) states->push_back(x);
  for (std::size_t l = 0; l < params.w.size(); ++l) {
    const Matrix& w = params.w[l];
    const Matrix& b = params.b[l];
    if (w.rows() != d || w.cols() != d || b.cols() != d) {
      throw DimensionError("cross layer " + std::to_string(l) +
                           " does not match input width " + std::to_string(d));
    }
    std::vector<double> pre(d);  // W x_l + b
    for (std::size_t r = 0; r < d; ++r) {
      const double* wrow = w.row(r);
      double acc = b(0, r);
      for (std::size_t c = 0; c < d; ++c) acc += wrow[c] * x[c];
      pre[r] = acc;
    }
    std::vector<double> next(d);
    for (std::size_t r = 0; r < d; ++r) next[r] = x0[r] * pre[r] + x[r];
    if (pres) pres->push_back(std::move(pre));
    x = std::move(next);
    if (states) states->push_back(x);
  }
  out = std::move(x);
}

double mlp_run(const std::vector<double>& x, const MlpParams& params,
               std::vector<std::vector<double>>* pres) {
  std::vector<double> h = x;
  for (std::size_t l = 0; l < params.w.size(); ++l) {
    const Matrix& w = params.w[l];
    const Matrix& b = params.b[l];
    if (w.cols() != h.size()) {
      throw DimensionError("mlp layer " + std::to_string(l) + " expects " +
                           std::to_string(w.cols()) + " inputs, got " +
                           std::to_string(h.size()));
    }
    std::vector<double> pre(w.rows());
    for (std::size_t r = 0; r < w.rows(); ++r) {
      const double* wrow = w.row(r);
      double acc = b(0, r);
      for (std::size_t c = 0; c < w.cols(); ++c) acc += wrow[c] * h[c];
      pre[r] = acc;
    }
    if (pres) pres->push_back(pre);
    if (params.act == Activation::relu) {
      for (double& z : pre) z = z > 0.0 ? z : 0.0;
    }
    h = std::move(pre);
  }
  if (params.out_w.cols() != h.size()) {
    throw DimensionError("mlp readout expects " +
                         std::to_string(params.out_w.cols()) +
                         " inputs, got " + std::to_string(h.size()));
  }
  double out = params.out_b(0, 0);
  for (std::size_t c = 0; c < h.size(); ++c) out += params.out_w(0, c) * h[c];
  return out;
}

}  // namespace

std::vector<double> cross_forward(const std::vector<double>& x0,
                                  const CrossParams& params) {
  std::vector<double> out;
  cross_layers(x0, params, nullptr, nullptr, out);
  return out;
}

double mlp_forward(const std::vector<double>& x, const MlpParams& params) {
  return mlp_run(x, params, nullptr);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double bce_loss(double p, int y) {
  const double lo = 1e-12;
  const double hi = 1.0 - 1e-12;
  const double q = p < lo ? lo : (p > hi ? hi : p);
  return y == 1 ? -std::log(q) : -std::log(1.0 - q);
}

double mean_bce(const ForwardTrace& trace,
                const std::vector<std::uint8_t>& labels) {
  if (labels.size() != trace.batch) {
    throw DimensionError("label count does not match trace batch");
  }
  double total = 0.0;
  for (std::size_t s = 0; s < labels.size(); ++s) {
    total += bce_loss(trace.p[s], labels[s]);
  }
  return total / static_cast<double>(labels.size());
}

ForwardTrace model_forward(const ModelSpec& spec, const ModelParams& params,
                           const Batch& batch) {
  const std::size_t f = batch.num_fields;
  const std::size_t k = spec.embed_dim;
  const std::size_t b = batch.size();
  const std::size_t d = f * k;
  if (f != params.embeddings.field.size()) {
    throw DimensionError("batch fields do not match embedding table");
  }
  if (b == 0) {
    throw DimensionError("model_forward needs a nonempty batch");
  }

  ForwardTrace trace;
  trace.params_revision = params.revision;
  trace.batch = b;
  trace.fields = f;
  trace.dim = k;
  trace.concat = Matrix(b, d);

  const bool stacked = head_is_stacked(spec.head);
  const bool parallel = head_is_parallel(spec.head);
  const bool fm_backbone = spec.backbone == Backbone::fm;

  if (fm_backbone) {
    trace.field_sum = Matrix(b, k);
    trace.interaction = Matrix(b, k);
  } else {
    trace.cross_x.assign(params.cross.w.size() + 1, Matrix(b, d));
    trace.cross_pre.assign(params.cross.w.size(), Matrix(b, d));
    trace.interaction = Matrix(b, d);
  }
  if (spec.head != Head::none) {
    const std::size_t mlp_in_width = parallel ? d : (fm_backbone ? k : d);
    trace.mlp_in = Matrix(b, mlp_in_width);
    for (const Matrix& w : params.mlp.w) {
      trace.mlp_pre.push_back(Matrix(b, w.rows()));
    }
  }
  if (!stacked) trace.backbone_logit.resize(b);
  trace.logit.resize(b);
  trace.p.resize(b);

  std::vector<std::vector<double>> embs(f, std::vector<double>(k));
  for (std::size_t s = 0; s < b; ++s) {
    const std::uint32_t* idx = batch.sample(s);
    for (std::size_t i = 0; i < f; ++i) {
      const Matrix& table = params.embeddings.field[i];
      if (idx[i] >= table.rows()) {
        throw DimensionError("embedding index out of range in field " +
                             std::to_string(i));
      }
      const double* row = table.row(idx[i]);
      for (std::size_t c = 0; c < k; ++c) {
        embs[i][c] = row[c];
        trace.concat(s, i * k + c) = row[c];
      }
    }

    double backbone = 0.0;
    if (fm_backbone) {
      for (std::size_t c = 0; c < k; ++c) {
        double sum = 0.0;
        for (std::size_t i = 0; i < f; ++i) sum += embs[i][c];
        trace.field_sum(s, c) = sum;
      }
      if (stacked) {
        const std::vector<double> bi = bi_interaction(embs);
        for (std::size_t c = 0; c < k; ++c) trace.interaction(s, c) = bi[c];
      } else {
        backbone = fm_logit(embs);
      }
    } else {
      std::vector<double> x0(trace.concat.row(s), trace.concat.row(s) + d);
      std::vector<std::vector<double>> states;
      std::vector<std::vector<double>> pres;
      std::vector<double> out;
      cross_layers(x0, params.cross, &states, &pres, out);
      for (std::size_t l = 0; l < states.size(); ++l) {
        for (std::size_t c = 0; c < d; ++c) trace.cross_x[l](s, c) = states[l][c];
      }
      for (std::size_t l = 0; l < pres.size(); ++l) {
        for (std::size_t c = 0; c < d; ++c) trace.cross_pre[l](s, c) = pres[l][c];
      }
      for (std::size_t c = 0; c < d; ++c) trace.interaction(s, c) = out[c];
      if (!stacked) {
        double acc = params.cross.readout_b(0, 0);
        for (std::size_t c = 0; c < d; ++c) acc += params.cross.readout_w(0, c) * out[c];
        backbone = acc;
      }
    }

    double logit = 0.0;
    if (spec.head == Head::none) {
      logit = backbone;
    } else {
      const double* head_in = parallel ? trace.concat.row(s)
                                       : trace.interaction.row(s);
      const std::size_t in_width = trace.mlp_in.cols();
      std::vector<double> x(head_in, head_in + in_width);
      for (std::size_t c = 0; c < in_width; ++c) trace.mlp_in(s, c) = x[c];
      std::vector<std::vector<double>> pres;
      const double head_out = mlp_run(x, params.mlp, &pres);
      for (std::size_t l = 0; l < pres.size(); ++l) {
        for (std::size_t c = 0; c < pres[l].size(); ++c) {
          trace.mlp_pre[l](s, c) = pres[l][c];
        }
      }
      logit = stacked ? head_out : backbone + head_out;
    }
    if (!stacked) trace.backbone_logit[s] = backbone;
    trace.logit[s] = logit;
    trace.p[s] = sigmoid(logit);
  }
  return trace;
}

}  // namespace fim
