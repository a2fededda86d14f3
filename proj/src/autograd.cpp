#include "fim/autograd.hpp"

#include <cmath>
#include <string>

namespace fim {

namespace {

ModelParams zeros_like(const ModelParams& p) {
  ModelParams z;
  z.embeddings.dim = p.embeddings.dim;
  for (const Matrix& m : p.embeddings.field) {
    z.embeddings.field.emplace_back(m.rows(), m.cols());
  }
  for (const Matrix& m : p.cross.w) z.cross.w.emplace_back(m.rows(), m.cols());
  for (const Matrix& m : p.cross.b) z.cross.b.emplace_back(m.rows(), m.cols());
  if (!p.cross.readout_w.empty()) {
    z.cross.readout_w = Matrix(1, p.cross.readout_w.cols());
    z.cross.readout_b = Matrix(1, 1);
  }
  for (const Matrix& m : p.mlp.w) z.mlp.w.emplace_back(m.rows(), m.cols());
  for (const Matrix& m : p.mlp.b) z.mlp.b.emplace_back(m.rows(), m.cols());
  if (!p.mlp.out_w.empty()) {
    z.mlp.out_w = Matrix(1, p.mlp.out_w.cols());
    z.mlp.out_b = Matrix(1, 1);
  }
  z.mlp.act = p.mlp.act;
  return z;
}

void check_trace(const ModelParams& params, const ForwardTrace& trace,
                 const Batch& batch) {
  if (trace.params_revision != params.revision) {
    throw StalenessError(
        "trace was built for params revision " +
        std::to_string(trace.params_revision) + ", params are at " +
        std::to_string(params.revision));
  }
  if (trace.batch != batch.size() || trace.fields != batch.num_fields) {
    throw StalenessError("trace does not match the given batch");
  }
}

// Reverse pass for one sample. `seed` is the upstream d/dPhi scalar; the
// per-field gradient blocks land in `gx` (length F*dim) and, when `out` is
// given, parameter gradients accumulate into it (including the embedding
// scatter-add).
void backward_one_sample(const ModelSpec& spec, const ModelParams& params,
                         const ForwardTrace& trace, const Batch& batch,
                         std::size_t s, double seed, ModelParams* out,
                         std::vector<double>& gx) {
  const std::size_t f = trace.fields;
  const std::size_t k = trace.dim;
  const std::size_t d = f * k;
  const bool stacked = head_is_stacked(spec.head);
  const bool parallel = head_is_parallel(spec.head);

  gx.assign(d, 0.0);

  // MLP head; leaves g = d(Phi)/d(mlp input).
  std::vector<double> g;
  if (spec.head != Head::none) {
    const MlpParams& mlp = params.mlp;
    const std::size_t layers = mlp.w.size();
    auto layer_input = [&](std::size_t l, std::vector<double>& h) {
      if (l == 0) {
        h.assign(trace.mlp_in.row(s), trace.mlp_in.row(s) + trace.mlp_in.cols());
        return;
      }
      const Matrix& pre = trace.mlp_pre[l - 1];
      h.resize(pre.cols());
      for (std::size_t c = 0; c < pre.cols(); ++c) {
        const double z = pre(s, c);
        h[c] = (mlp.act == Activation::relu && z <= 0.0) ? 0.0 : z;
      }
    };

    std::vector<double> h_last;
    layer_input(layers, h_last);
    if (out) {
      for (std::size_t c = 0; c < h_last.size(); ++c) {
        out->mlp.out_w(0, c) += seed * h_last[c];
      }
      out->mlp.out_b(0, 0) += seed;
    }

    g.resize(mlp.out_w.cols());
    for (std::size_t c = 0; c < g.size(); ++c) g[c] = seed * mlp.out_w(0, c);

    std::vector<double> h_prev;
    for (std::size_t l = layers; l-- > 0;) {
      if (mlp.act == Activation::relu) {
        for (std::size_t c = 0; c < g.size(); ++c) {
          if (trace.mlp_pre[l](s, c) <= 0.0) g[c] = 0.0;
        }
      }
      layer_input(l, h_prev);
      const Matrix& w = mlp.w[l];
      if (out) {
        for (std::size_t r = 0; r < w.rows(); ++r) {
          if (g[r] == 0.0) continue;
          double* wrow = out->mlp.w[l].row(r);
          for (std::size_t c = 0; c < w.cols(); ++c) wrow[c] += g[r] * h_prev[c];
          out->mlp.b[l](0, r) += g[r];
        }
      }
      std::vector<double> g_prev(w.cols(), 0.0);
      for (std::size_t r = 0; r < w.rows(); ++r) {
        if (g[r] == 0.0) continue;
        const double* wrow = w.row(r);
        for (std::size_t c = 0; c < w.cols(); ++c) g_prev[c] += wrow[c] * g[r];
      }
      g = std::move(g_prev);
    }
    if (parallel) {
      for (std::size_t c = 0; c < d; ++c) gx[c] += g[c];
    }
  }

  if (spec.backbone == Backbone::fm) {
    // d(Phi)/dv_i = S - v_i, scaled by the scalar path or weighted
    // per-component by the stacked head's gradient.
    for (std::size_t i = 0; i < f; ++i) {
      for (std::size_t c = 0; c < k; ++c) {
        const double others = trace.field_sum(s, c) - trace.concat(s, i * k + c);
        gx[i * k + c] += (stacked ? g[c] : seed) * others;
      }
    }
  } else {
    std::vector<double> u(d);
    if (stacked) {
      u = g;
    } else {
      for (std::size_t c = 0; c < d; ++c) u[c] = seed * params.cross.readout_w(0, c);
      if (out) {
        for (std::size_t c = 0; c < d; ++c) {
          out->cross.readout_w(0, c) += seed * trace.interaction(s, c);
        }
        out->cross.readout_b(0, 0) += seed;
      }
    }

    const double* x0 = trace.cross_x[0].row(s);
    std::vector<double> gx0_extra(d, 0.0);
    std::vector<double> t(d);
    for (std::size_t l = params.cross.w.size(); l-- > 0;) {
      const double* xl = trace.cross_x[l].row(s);
      const double* ql = trace.cross_pre[l].row(s);
      for (std::size_t c = 0; c < d; ++c) t[c] = u[c] * x0[c];
      if (out) {
        for (std::size_t r = 0; r < d; ++r) {
          if (t[r] == 0.0) continue;
          double* wrow = out->cross.w[l].row(r);
          for (std::size_t c = 0; c < d; ++c) wrow[c] += t[r] * xl[c];
          out->cross.b[l](0, r) += t[r];
        }
      }
      for (std::size_t c = 0; c < d; ++c) gx0_extra[c] += u[c] * ql[c];
      const Matrix& w = params.cross.w[l];
      std::vector<double> u_prev(d, 0.0);
      for (std::size_t r = 0; r < d; ++r) {
        if (t[r] == 0.0) continue;
        const double* wrow = w.row(r);
        for (std::size_t c = 0; c < d; ++c) u_prev[c] += wrow[c] * t[r];
      }
      for (std::size_t c = 0; c < d; ++c) u[c] = u_prev[c] + u[c];
    }
    for (std::size_t c = 0; c < d; ++c) gx[c] += u[c] + gx0_extra[c];
  }

  if (out) {
    const std::uint32_t* idx = batch.sample(s);
    for (std::size_t i = 0; i < f; ++i) {
      double* row = out->embeddings.field[i].row(idx[i]);
      for (std::size_t c = 0; c < k; ++c) row[c] += gx[i * k + c];
    }
  }
}

}  // namespace

GradBundle backward(const ModelSpec& spec, const ModelParams& params,
                    const ForwardTrace& trace, const Batch& batch) {
  check_trace(params, trace, batch);
  const std::size_t b = trace.batch;
  GradBundle bundle;
  bundle.tensors = zeros_like(params);
  bundle.per_sample_field = Matrix(b, trace.fields * trace.dim);

  std::vector<double> gx;
  for (std::size_t s = 0; s < b; ++s) {
    const double seed =
        (trace.p[s] - static_cast<double>(batch.labels[s])) /
        static_cast<double>(b);
    backward_one_sample(spec, params, trace, batch, s, seed, &bundle.tensors,
                        gx);
    double* row = bundle.per_sample_field.row(s);
    for (std::size_t c = 0; c < gx.size(); ++c) row[c] = gx[c];
  }

  for (const TensorRef& ref : named_tensors(bundle.tensors)) {
    if (!ref.tensor->all_finite()) {
      throw NumericError("non-finite gradient in " + ref.name);
    }
  }
  return bundle;
}

std::vector<std::vector<double>> logit_embedding_grads(
    const ModelSpec& spec, const ModelParams& params,
    const ForwardTrace& trace, const Batch& batch, std::size_t sample) {
  check_trace(params, trace, batch);
  if (sample >= trace.batch) {
    throw DimensionError("sample index out of range");
  }
  std::vector<double> gx;
  backward_one_sample(spec, params, trace, batch, sample, 1.0, nullptr, gx);
  std::vector<std::vector<double>> per_field(trace.fields);
  for (std::size_t i = 0; i < trace.fields; ++i) {
    per_field[i].assign(gx.begin() + i * trace.dim,
                        gx.begin() + (i + 1) * trace.dim);
  }
  return per_field;
}

GradBundle finite_diff(const ModelSpec& spec, const ModelParams& params,
                       const Batch& batch, double h) {
  if (!(h > 0.0)) {
    throw NumericError("finite_diff step h must be positive");
  }
  ModelParams work = params;
  GradBundle bundle;
  bundle.tensors = zeros_like(params);

  auto loss_at = [&]() {
    const ForwardTrace trace = model_forward(spec, work, batch);
    return mean_bce(trace, batch.labels);
  };

  std::vector<TensorRef> work_refs = named_tensors(work);
  std::vector<TensorRef> grad_refs = named_tensors(bundle.tensors);
  for (std::size_t t = 0; t < work_refs.size(); ++t) {
    Matrix& tensor = *work_refs[t].tensor;
    Matrix& grad = *grad_refs[t].tensor;
    for (std::size_t i = 0; i < tensor.values().size(); ++i) {
      const double saved = tensor.values()[i];
      tensor.values()[i] = saved + h;
      const double up = loss_at();
      tensor.values()[i] = saved - h;
      const double down = loss_at();
      tensor.values()[i] = saved;
      grad.values()[i] = (up - down) / (2.0 * h);
    }
  }
  return bundle;
}

OptimState OptimState::sgd(double lr) {
  OptimState s;
  s.algo = Algo::sgd;
  s.lr = lr;
  return s;
}

OptimState OptimState::adam(double lr) {
  OptimState s;
  s.algo = Algo::adam;
  s.lr = lr;
  return s;
}

void step(ModelParams& params, const GradBundle& grads, OptimState& opt) {
  std::vector<TensorRef> p_refs = named_tensors(params);
  std::vector<ConstTensorRef> g_refs = named_tensors(grads.tensors);
  if (p_refs.size() != g_refs.size()) {
    throw DimensionError("gradient bundle does not match parameter layout");
  }

  if (opt.algo == OptimState::Algo::adam && opt.t == 0) {
    opt.m = zeros_like(params);
    opt.v = zeros_like(params);
  }
  opt.t += 1;

  std::vector<TensorRef> m_refs;
  std::vector<TensorRef> v_refs;
  if (opt.algo == OptimState::Algo::adam) {
    m_refs = named_tensors(opt.m);
    v_refs = named_tensors(opt.v);
  }

  for (std::size_t t = 0; t < p_refs.size(); ++t) {
    Matrix& p = *p_refs[t].tensor;
    const Matrix& g = *g_refs[t].tensor;
    if (p_refs[t].name != g_refs[t].name || p.rows() != g.rows() ||
        p.cols() != g.cols()) {
      throw DimensionError("gradient shape mismatch for " + p_refs[t].name);
    }
    if (opt.algo == OptimState::Algo::sgd) {
      for (std::size_t i = 0; i < p.values().size(); ++i) {
        p.values()[i] -= opt.lr * g.values()[i];
      }
    } else {
      Matrix& m = *m_refs[t].tensor;
      Matrix& v = *v_refs[t].tensor;
      const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.t));
      const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.t));
      for (std::size_t i = 0; i < p.values().size(); ++i) {
        const double gi = g.values()[i];
        m.values()[i] = opt.beta1 * m.values()[i] + (1.0 - opt.beta1) * gi;
        v.values()[i] = opt.beta2 * v.values()[i] + (1.0 - opt.beta2) * gi * gi;
        const double mhat = m.values()[i] / bc1;
        const double vhat = v.values()[i] / bc2;
        p.values()[i] -= opt.lr * mhat / (std::sqrt(vhat) + opt.eps);
      }
    }
  }
  params.revision += 1;
}

}  // namespace fim
