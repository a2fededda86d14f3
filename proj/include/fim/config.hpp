#pragma once

#include <cstdint>
#include <string>

#include "fim/data.hpp"
#include "fim/model.hpp"

namespace fim {

enum class SnapshotLayout { concat, stacked, both };

// Full experiment description. Parsed from line-oriented `key = value`
// text with `#` comments; render_config() emits the resolved form, which
// reparses to the identical configuration.
struct ExperimentConfig {
  // data.*
  std::string data_source = "synthetic";  // synthetic | csv
  std::string csv_path;
  std::string label_column = "label";
  std::size_t hash_buckets = 0;
  SyntheticSpec synth;

  // model.*
  ModelSpec model;

  // optim.*
  std::string optimizer = "adam";  // adam | sgd
  double learning_rate = 1e-3;

  // train.*
  std::size_t batch_size = 256;
  std::size_t epochs = 3;
  std::size_t snapshot_interval = 50;
  std::size_t spectrum_samples = 4096;
  double val_fraction = 0.1;

  // diagnostics.*
  SnapshotLayout snapshot_layout = SnapshotLayout::concat;

  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out_dir = "run";

  // Checks cross-field constraints and (for csv sources) path existence.
  void validate() const;
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

// `desk` keeps everything small on synthetic data; `avazu-like` mirrors the
// public-benchmark shapes (embed_dim 16, 4x2000 parallel MLP or 3x400
// stacked MLP).
void apply_preset(ExperimentConfig& config, const std::string& name);

std::string render_config(const ExperimentConfig& config);

std::string to_string(SnapshotLayout layout);

}  // namespace fim
