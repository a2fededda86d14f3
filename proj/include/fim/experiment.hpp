#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fim/autograd.hpp"
#include "fim/config.hpp"
#include "fim/diagnostics.hpp"
#include "fim/model.hpp"

namespace fim {

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_auc = 0.0;
  double embedding_rankme = 0.0;
};

// Everything a finished training run produced, with the artifact paths.
struct RunReport {
  ExperimentConfig resolved;
  std::vector<EpochMetrics> epochs;
  std::vector<TimelinePoint> grad_timeline;  // concat layout
  double final_rankme = 0.0;

  std::string checkpoint_path;
  std::string metrics_path;
  std::string spectrum_cov_path;
  std::string spectrum_z_path;
  std::string grad_timeline_path;
  std::string config_echo_path;
};

RunReport cmd_train(const ExperimentConfig& config);

// Result of comparing an analytic gradient bundle against a reference:
// relative error on large coordinates, absolute on coordinates where the
// reference is below `small`.
struct GradDiff {
  double max_err = 0.0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  std::size_t coordinates = 0;
  bool pass = true;
};
GradDiff compare_bundles(const GradBundle& analytic, const GradBundle& reference,
                         double rel_tol, double abs_tol, double small = 1e-6);

struct GradcheckVariant {
  std::string variant;
  double max_err = 0.0;
  std::string worst;
  std::size_t coordinates = 0;
  bool pass = true;
};
struct ClosedformCheck {
  std::string name;
  double max_err = 0.0;
  bool pass = true;
};
struct GradcheckReport {
  std::vector<GradcheckVariant> fd;
  std::vector<ClosedformCheck> closedform;
  bool pass = true;
};

// Backward-vs-central-difference over all ten variants plus the
// closed-form-vs-autograd oracle suite. Only the seed is taken from the
// config; shapes are fixed small so the whole suite runs in seconds.
GradcheckReport cmd_gradcheck(const ExperimentConfig& config);

struct SpectrumResult {
  RankMeScore score;
  std::string spectrum_cov_path;
  std::string spectrum_z_path;
  std::string rankme_path;
};

// Recomputes the spectra and RankMe of a stored checkpoint on the
// config's validation split.
SpectrumResult cmd_spectrum(const std::string& checkpoint_path,
                            const ExperimentConfig& config);

// Materializes the config's synthetic dataset as <out>/synthetic.csv.
std::string cmd_synth(const ExperimentConfig& config);

}  // namespace fim
