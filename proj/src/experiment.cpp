#include "fim/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "fim/checkpoint.hpp"
#include "fim/closedform.hpp"
#include "fim/rng.hpp"

namespace fs = std::filesystem;

namespace fim {

namespace {

// All run randomness branches off the one config seed through these tags.
constexpr std::uint64_t kSeedData = 1;
constexpr std::uint64_t kSeedSplit = 2;
constexpr std::uint64_t kSeedInit = 3;
constexpr std::uint64_t kSeedEpoch = 4;
constexpr std::uint64_t kSeedSpectrum = 5;

Dataset build_dataset(const ExperimentConfig& config) {
  if (config.data_source == "csv") {
    return load_csv(config.csv_path, config.label_column, config.hash_buckets);
  }
  SyntheticSpec spec = config.synth;
  spec.seed = derive_seed(config.seed, kSeedData);
  return gen_synthetic(spec);
}

std::vector<std::size_t> vocab_sizes_of(const Dataset& ds) {
  std::vector<std::size_t> out;
  out.reserve(ds.schemas.size());
  for (const FieldSchema& schema : ds.schemas) out.push_back(schema.vocab_size);
  return out;
}

// Rows of Z are validation samples (deterministically subsampled), columns
// the concatenation of all field embeddings.
Matrix collect_z(const ModelParams& params, const Dataset& val,
                 std::size_t max_samples, std::uint64_t seed) {
  const std::size_t f = val.num_fields();
  const std::size_t k = params.embeddings.dim;
  std::vector<std::size_t> order(val.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  shuffle(order, rng);
  const std::size_t n = std::min(max_samples, order.size());

  Matrix z(n, f * k);
  for (std::size_t r = 0; r < n; ++r) {
    const std::uint32_t* idx = val.sample(order[r]);
    for (std::size_t i = 0; i < f; ++i) {
      const double* row = params.embeddings.field[i].row(idx[i]);
      for (std::size_t c = 0; c < k; ++c) z(r, i * k + c) = row[c];
    }
  }
  return z;
}

double validation_auc(const ModelSpec& spec, const ModelParams& params,
                      const Dataset& val, std::size_t batch_size) {
  std::vector<std::uint8_t> labels;
  std::vector<double> scores;
  labels.reserve(val.size());
  scores.reserve(val.size());

  const std::size_t f = val.num_fields();
  Batch batch;
  batch.num_fields = f;
  for (std::size_t start = 0; start < val.size(); start += batch_size) {
    const std::size_t end = std::min(start + batch_size, val.size());
    batch.labels.assign(val.labels.begin() + start, val.labels.begin() + end);
    batch.indices.assign(val.indices.begin() + start * f,
                         val.indices.begin() + end * f);
    const ForwardTrace trace = model_forward(spec, params, batch);
    labels.insert(labels.end(), batch.labels.begin(), batch.labels.end());
    scores.insert(scores.end(), trace.p.begin(), trace.p.end());
  }
  return auc(labels, scores);
}

Matrix stack_per_field(const Matrix& concat, std::size_t fields) {
  const std::size_t k = concat.cols() / fields;
  Matrix out(concat.rows() * fields, k);
  for (std::size_t s = 0; s < concat.rows(); ++s) {
    for (std::size_t i = 0; i < fields; ++i) {
      for (std::size_t c = 0; c < k; ++c) {
        out(s * fields + i, c) = concat(s, i * k + c);
      }
    }
  }
  return out;
}

}  // namespace

RunReport cmd_train(const ExperimentConfig& config) {
  config.validate();
  fs::create_directories(config.out_dir);

  const Dataset dataset = build_dataset(config);
  auto [train, val] =
      train_val_split(dataset, derive_seed(config.seed, kSeedSplit),
                      config.val_fraction);
  if (train.size() == 0 || val.size() == 0) {
    throw ConfigError("dataset too small for a train/validation split");
  }

  ModelSpec spec = config.model;
  spec.init_seed = derive_seed(config.seed, kSeedInit);
  const std::vector<std::size_t> vocab = vocab_sizes_of(dataset);
  ModelParams params = init_params(spec, vocab);
  OptimState optim = config.optimizer == "sgd"
                         ? OptimState::sgd(config.learning_rate)
                         : OptimState::adam(config.learning_rate);

  const bool want_concat = config.snapshot_layout != SnapshotLayout::stacked;
  const bool want_stacked = config.snapshot_layout != SnapshotLayout::concat;
  std::vector<GradSnapshot> snaps_concat;
  std::vector<GradSnapshot> snaps_stacked;

  RunReport report;
  report.resolved = config;
  report.metrics_path = (fs::path(config.out_dir) / "metrics.jsonl").string();
  std::ofstream metrics(report.metrics_path, std::ios::binary);
  if (!metrics) {
    throw ConfigError("cannot write metrics file: " + report.metrics_path);
  }

  std::size_t global_step = 0;
  Batch batch;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    BatchIterator it(train, config.batch_size,
                     derive_seed(config.seed, kSeedEpoch, epoch));
    double loss_sum = 0.0;
    std::size_t seen = 0;
    while (it.next(batch)) {
      const ForwardTrace trace = model_forward(spec, params, batch);
      const double loss = mean_bce(trace, batch.labels);
      if (!std::isfinite(loss)) {
        throw NumericError("training loss is not finite at step " +
                           std::to_string(global_step));
      }
      loss_sum += loss * static_cast<double>(batch.size());
      seen += batch.size();

      const GradBundle grads = backward(spec, params, trace, batch);
      if (global_step % config.snapshot_interval == 0) {
        if (want_concat) {
          snaps_concat.push_back({global_step, grads.per_sample_field});
        }
        if (want_stacked) {
          snaps_stacked.push_back(
              {global_step,
               stack_per_field(grads.per_sample_field, batch.num_fields)});
        }
      }
      step(params, grads, optim);
      ++global_step;
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = loss_sum / static_cast<double>(seen);
    m.val_auc = validation_auc(spec, params, val, config.batch_size);
    const Matrix z = collect_z(params, val, config.spectrum_samples,
                               derive_seed(config.seed, kSeedSpectrum));
    m.embedding_rankme = rankme(z).value;
    report.epochs.push_back(m);

    const nlohmann::json line = {{"epoch", m.epoch},
                                 {"loss", m.train_loss},
                                 {"auc", m.val_auc},
                                 {"rankme", m.embedding_rankme}};
    metrics << line.dump() << '\n';
  }
  report.final_rankme = report.epochs.back().embedding_rankme;

  report.checkpoint_path =
      (fs::path(config.out_dir) / "checkpoint.txt").string();
  save_checkpoint(report.checkpoint_path, spec, vocab, params);

  const Matrix z = collect_z(params, val, config.spectrum_samples,
                             derive_seed(config.seed, kSeedSpectrum));
  report.spectrum_cov_path =
      (fs::path(config.out_dir) / "spectrum_cov.csv").string();
  report.spectrum_z_path =
      (fs::path(config.out_dir) / "spectrum_z.csv").string();
  write_spectrum_csv(report.spectrum_cov_path, embedding_spectrum(z));
  write_spectrum_csv(report.spectrum_z_path, singular_spectrum(z));

  report.grad_timeline_path =
      (fs::path(config.out_dir) / "grad_rankme.csv").string();
  if (want_concat) {
    report.grad_timeline = grad_rank_timeline(snaps_concat);
    write_timeline_csv(report.grad_timeline_path, report.grad_timeline);
  }
  if (want_stacked) {
    const std::vector<TimelinePoint> stacked_timeline =
        grad_rank_timeline(snaps_stacked);
    const std::string path =
        want_concat
            ? (fs::path(config.out_dir) / "grad_rankme_stacked.csv").string()
            : report.grad_timeline_path;
    write_timeline_csv(path, stacked_timeline);
    if (!want_concat) report.grad_timeline = stacked_timeline;
  }

  report.config_echo_path =
      (fs::path(config.out_dir) / "config.resolved").string();
  std::ofstream echo(report.config_echo_path, std::ios::binary);
  echo << render_config(config);

  return report;
}

GradDiff compare_bundles(const GradBundle& analytic,
                         const GradBundle& reference, double rel_tol,
                         double abs_tol, double small) {
  const std::vector<ConstTensorRef> a_refs = named_tensors(analytic.tensors);
  const std::vector<ConstTensorRef> r_refs = named_tensors(reference.tensors);
  if (a_refs.size() != r_refs.size()) {
    throw DimensionError("gradient bundles have different tensor sets");
  }

  GradDiff diff;
  for (std::size_t t = 0; t < a_refs.size(); ++t) {
    const Matrix& a = *a_refs[t].tensor;
    const Matrix& r = *r_refs[t].tensor;
    if (a.rows() != r.rows() || a.cols() != r.cols()) {
      throw DimensionError("gradient shape mismatch for " + a_refs[t].name);
    }
    for (std::size_t i = 0; i < a.values().size(); ++i) {
      const double av = a.values()[i];
      const double rv = r.values()[i];
      ++diff.coordinates;
      double err;
      bool ok;
      if (std::abs(rv) < small) {
        err = std::abs(av - rv);
        ok = err <= abs_tol;
      } else {
        err = std::abs(av - rv) / std::abs(rv);
        ok = err <= rel_tol;
      }
      if (err > diff.max_err) {
        diff.max_err = err;
        diff.worst_tensor = a_refs[t].name;
        diff.worst_index = i;
      }
      if (!ok) diff.pass = false;
    }
  }
  return diff;
}

namespace {

// Shapes for the verification suite: small enough to finite-difference
// every coordinate, large enough that each variant has well over 100.
constexpr std::size_t kCheckFields = 4;
constexpr std::size_t kCheckDim = 4;
constexpr std::size_t kCheckBatch = 8;
const std::vector<std::size_t> kCheckVocab = {11, 7, 13, 9};

void randomize_params(ModelParams& params, Rng& rng) {
  for (TensorRef& ref : named_tensors(params)) {
    double scale = 0.5;
    if (ref.name.rfind("embed.", 0) == 0) scale = 1.0;
    if (ref.name.rfind("cross.w", 0) == 0) scale = 0.15;
    if (ref.name.rfind("cross.b", 0) == 0) scale = 0.15;
    if (ref.name == "cross.readout_w") scale = 0.3;
    for (double& x : ref.tensor->values()) x = rng.normal(0.0, scale);
  }
}

Batch random_batch(Rng& rng) {
  Batch batch;
  batch.num_fields = kCheckFields;
  for (std::size_t s = 0; s < kCheckBatch; ++s) {
    batch.labels.push_back(rng.below(2) ? 1 : 0);
    for (std::size_t i = 0; i < kCheckFields; ++i) {
      batch.indices.push_back(
          static_cast<std::uint32_t>(rng.below(kCheckVocab[i])));
    }
  }
  return batch;
}

// Smallest |pre-activation| across the batch; finite differencing near a
// ReLU kink is meaningless, so instances below the margin are redrawn.
double kink_margin(const ForwardTrace& trace) {
  double margin = std::numeric_limits<double>::infinity();
  for (const Matrix& pre : trace.mlp_pre) {
    for (double z : pre.values()) margin = std::min(margin, std::abs(z));
  }
  return margin;
}

}  // namespace

GradcheckReport cmd_gradcheck(const ExperimentConfig& config) {
  if (!config.seed_set) {
    throw ConfigError("gradcheck needs a seed");
  }
  GradcheckReport report;

  const Backbone backbones[] = {Backbone::fm, Backbone::crossnet};
  const Head heads[] = {Head::none, Head::p_dnn, Head::s_dnn,
                        Head::linear_p_dnn, Head::linear_s_dnn};

  std::size_t variant_index = 0;
  for (Backbone backbone : backbones) {
    for (Head head : heads) {
      ModelSpec spec;
      spec.backbone = backbone;
      spec.head = head;
      spec.embed_dim = kCheckDim;
      spec.mlp_hidden = {8};
      spec.cross_depth = 2;
      spec.init_seed = 1;

      const bool has_relu = head_activation(head) == Activation::relu &&
                            head != Head::none;
      ModelParams params = init_params(spec, kCheckVocab);
      Batch batch;
      ForwardTrace trace;
      for (std::size_t attempt = 0;; ++attempt) {
        Rng rng(derive_seed(config.seed, 0xc4ec + variant_index, attempt));
        randomize_params(params, rng);
        batch = random_batch(rng);
        trace = model_forward(spec, params, batch);
        if (!has_relu || kink_margin(trace) > 1e-3 || attempt > 50) break;
      }

      const GradBundle analytic = backward(spec, params, trace, batch);
      const GradBundle fd = finite_diff(spec, params, batch, 1e-4);
      const GradDiff diff = compare_bundles(analytic, fd, 1e-4, 1e-6);

      GradcheckVariant entry;
      entry.variant = spec.variant_name();
      entry.max_err = diff.max_err;
      entry.coordinates = diff.coordinates;
      entry.worst = diff.worst_tensor + "[" +
                    std::to_string(diff.worst_index) + "]";
      entry.pass = diff.pass && diff.coordinates >= 100;
      report.fd.push_back(entry);
      if (!entry.pass) report.pass = false;
      ++variant_index;
    }
  }

  // Closed-form oracle vs autograd on the one-hidden-layer setting.
  const double cf_tol = 1e-10;
  struct CfCase {
    Head head;
    const char* name;
  };
  const CfCase cases[] = {{Head::none, "fm_grad"},
                          {Head::p_dnn, "pdnn_grad"},
                          {Head::s_dnn, "sdnn_grad"}};
  for (const CfCase& cf_case : cases) {
    ModelSpec spec;
    spec.backbone = Backbone::fm;
    spec.head = cf_case.head;
    spec.embed_dim = kCheckDim;
    spec.mlp_hidden = {8};
    spec.init_seed = 1;

    ClosedformCheck check;
    check.name = cf_case.name;
    for (std::size_t trial = 0; trial < 20; ++trial) {
      Rng rng(derive_seed(config.seed, 0xcf00 + trial, cf_case.head == Head::none
                                                            ? 0
                                                            : (cf_case.head == Head::p_dnn ? 1 : 2)));
      ModelParams params = init_params(spec, kCheckVocab);
      randomize_params(params, rng);
      Batch batch = random_batch(rng);
      const ForwardTrace trace = model_forward(spec, params, batch);

      std::vector<std::vector<double>> embs(kCheckFields);
      const std::uint32_t* idx = batch.sample(0);
      for (std::size_t i = 0; i < kCheckFields; ++i) {
        const double* row = params.embeddings.field[i].row(idx[i]);
        embs[i].assign(row, row + kCheckDim);
      }

      closedform::OneHiddenConfig cfg;
      if (cf_case.head != Head::none) {
        cfg.w_in = params.mlp.w[0];
        cfg.bias.assign(params.mlp.b[0].values().begin(),
                        params.mlp.b[0].values().end());
        cfg.w_out.assign(params.mlp.out_w.values().begin(),
                         params.mlp.out_w.values().end());
        cfg.fields = kCheckFields;
        cfg.dim = kCheckDim;
      }

      const std::vector<std::vector<double>> auto_grads =
          logit_embedding_grads(spec, params, trace, batch, 0);
      for (std::size_t i = 0; i < kCheckFields; ++i) {
        std::vector<double> cf;
        if (cf_case.head == Head::none) {
          cf = closedform::fm_grad(embs, i);
        } else if (cf_case.head == Head::p_dnn) {
          cf = closedform::pdnn_grad(embs, i, cfg);
        } else {
          cf = closedform::sdnn_grad(embs, i, cfg);
        }
        for (std::size_t c = 0; c < kCheckDim; ++c) {
          const double a = auto_grads[i][c];
          const double b = cf[c];
          const double err =
              a == b ? 0.0
                     : std::abs(a - b) / std::max({std::abs(a), std::abs(b)});
          check.max_err = std::max(check.max_err, err);
        }
      }
    }
    check.pass = check.max_err <= cf_tol;
    report.closedform.push_back(check);
    if (!check.pass) report.pass = false;
  }

  return report;
}

SpectrumResult cmd_spectrum(const std::string& checkpoint_path,
                            const ExperimentConfig& config) {
  config.validate();
  fs::create_directories(config.out_dir);

  const Dataset dataset = build_dataset(config);
  auto [train, val] =
      train_val_split(dataset, derive_seed(config.seed, kSeedSplit),
                      config.val_fraction);
  if (val.size() < 2) {
    throw ConfigError("validation split too small for a spectrum");
  }

  ModelSpec spec = config.model;
  spec.init_seed = derive_seed(config.seed, kSeedInit);
  const ModelParams params =
      load_checkpoint(checkpoint_path, spec, vocab_sizes_of(dataset));

  const Matrix z = collect_z(params, val, config.spectrum_samples,
                             derive_seed(config.seed, kSeedSpectrum));
  SpectrumResult result;
  result.score = rankme(z);
  result.spectrum_cov_path =
      (fs::path(config.out_dir) / "spectrum_cov.csv").string();
  result.spectrum_z_path =
      (fs::path(config.out_dir) / "spectrum_z.csv").string();
  result.rankme_path = (fs::path(config.out_dir) / "rankme.txt").string();
  write_spectrum_csv(result.spectrum_cov_path, embedding_spectrum(z));
  write_spectrum_csv(result.spectrum_z_path, singular_spectrum(z));

  std::ofstream rank_out(result.rankme_path, std::ios::binary);
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", result.score.value);
  rank_out << buf << '\n';
  return result;
}

std::string cmd_synth(const ExperimentConfig& config) {
  if (!config.seed_set) {
    throw ConfigError("synth needs a seed");
  }
  fs::create_directories(config.out_dir);
  SyntheticSpec spec = config.synth;
  spec.seed = derive_seed(config.seed, kSeedData);
  const Dataset ds = gen_synthetic(spec);
  const std::string path =
      (fs::path(config.out_dir) / "synthetic.csv").string();
  write_csv(ds, path);
  return path;
}

}  // namespace fim
