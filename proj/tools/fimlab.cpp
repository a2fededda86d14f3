#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "fim/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNumeric = 2;
constexpr int kExitTolerance = 3;

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  std::string preset;
  std::int64_t seed = -1;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "experiment config file");
  cmd->add_option("--out", opts.out_dir, "output directory (overrides config)");
  cmd->add_option("--seed", opts.seed, "seed (overrides config)");
  cmd->add_option("--preset", opts.preset, "preset: desk | avazu-like");
}

fim::ExperimentConfig resolve(const CommonOpts& opts) {
  fim::ExperimentConfig config;
  if (!opts.config_path.empty()) {
    config = fim::parse_config_file(opts.config_path);
  }
  if (!opts.preset.empty()) {
    fim::apply_preset(config, opts.preset);
  }
  if (opts.seed >= 0) {
    config.seed = static_cast<std::uint64_t>(opts.seed);
    config.seed_set = true;
  }
  if (!opts.out_dir.empty()) {
    config.out_dir = opts.out_dir;
  }
  return config;
}

int run_train(const CommonOpts& opts) {
  const fim::RunReport report = fim::cmd_train(resolve(opts));
  for (const fim::EpochMetrics& m : report.epochs) {
    std::printf("epoch %zu  loss %.6f  auc %.6f  rankme %.4f\n", m.epoch,
                m.train_loss, m.val_auc, m.embedding_rankme);
  }
  std::printf("checkpoint: %s\n", report.checkpoint_path.c_str());
  std::printf("metrics:    %s\n", report.metrics_path.c_str());
  std::printf("spectra:    %s, %s\n", report.spectrum_cov_path.c_str(),
              report.spectrum_z_path.c_str());
  std::printf("timeline:   %s\n", report.grad_timeline_path.c_str());
  return kExitOk;
}

int run_gradcheck(const CommonOpts& opts) {
  const fim::GradcheckReport report = fim::cmd_gradcheck(resolve(opts));
  for (const fim::GradcheckVariant& entry : report.fd) {
    std::printf("%-24s fd max err %.3e over %zu coords  worst %-16s %s\n",
                entry.variant.c_str(), entry.max_err, entry.coordinates,
                entry.worst.c_str(), entry.pass ? "ok" : "FAIL");
  }
  for (const fim::ClosedformCheck& check : report.closedform) {
    std::printf("closedform %-12s max err %.3e  %s\n", check.name.c_str(),
                check.max_err, check.pass ? "ok" : "FAIL");
  }
  if (!report.pass) {
    std::fprintf(stderr, "gradcheck: tolerance exceeded\n");
    return kExitTolerance;
  }
  std::printf("gradcheck: all variants within tolerance\n");
  return kExitOk;
}

int run_spectrum(const CommonOpts& opts, const std::string& checkpoint) {
  const fim::SpectrumResult result =
      fim::cmd_spectrum(checkpoint, resolve(opts));
  std::printf("rankme %.6f over %zu singular values\n", result.score.value,
              result.score.n_singular);
  std::printf("spectra: %s, %s\n", result.spectrum_cov_path.c_str(),
              result.spectrum_z_path.c_str());
  return kExitOk;
}

int run_synth(const CommonOpts& opts) {
  const std::string path = fim::cmd_synth(resolve(opts));
  std::printf("wrote %s\n", path.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"feature-interaction model lab: train, gradcheck, spectrum"};
  app.require_subcommand(1);

  CommonOpts train_opts, grad_opts, spec_opts, synth_opts;
  std::string checkpoint;

  CLI::App* train = app.add_subcommand("train", "train a variant and emit diagnostics");
  add_common(train, train_opts);

  CLI::App* grad = app.add_subcommand("gradcheck", "verify gradients against oracles");
  add_common(grad, grad_opts);

  CLI::App* spectrum = app.add_subcommand("spectrum", "spectra + RankMe of a checkpoint");
  add_common(spectrum, spec_opts);
  spectrum->add_option("--checkpoint", checkpoint, "checkpoint file")->required();

  CLI::App* synth = app.add_subcommand("synth", "materialize the synthetic dataset as CSV");
  add_common(synth, synth_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (train->parsed()) return run_train(train_opts);
    if (grad->parsed()) return run_gradcheck(grad_opts);
    if (spectrum->parsed()) return run_spectrum(spec_opts, checkpoint);
    if (synth->parsed()) return run_synth(synth_opts);
  } catch (const fim::NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return kExitNumeric;
  } catch (const fim::ConvergenceError& e) {
    std::fprintf(stderr, "convergence failure: %s\n", e.what());
    return kExitNumeric;
  } catch (const fim::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }
  return kExitUsage;
}
