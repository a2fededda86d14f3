#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fim/errors.hpp"

namespace fim {

// One categorical field. Index 0 is the out-of-vocabulary slot in
// dictionary mode; in hashed mode tokens map to 1 + hash % (buckets - 1)
// and index_map stays empty.
struct FieldSchema {
  std::string name;
  std::size_t vocab_size = 0;
  std::unordered_map<std::string, std::uint32_t> index_map;
  std::size_t hash_buckets = 0;  // > 0 selects hashed mode

  std::uint32_t index_of(const std::string& token) const;
};

// Multi-field categorical samples with binary labels, stored
// structure-of-arrays: indices is row-major num_samples x num_fields.
struct Dataset {
  std::vector<FieldSchema> schemas;
  std::vector<std::uint8_t> labels;
  std::vector<std::uint32_t> indices;

  std::size_t num_fields() const { return schemas.size(); }
  std::size_t size() const { return labels.size(); }
  const std::uint32_t* sample(std::size_t s) const {
    return indices.data() + s * schemas.size();
  }
  void validate() const;  // throws on broken index bounds
};

struct Batch {
  std::vector<std::uint8_t> labels;
  std::vector<std::uint32_t> indices;  // row-major size() x num_fields
  std::size_t num_fields = 0;

  std::size_t size() const { return labels.size(); }
  const std::uint32_t* sample(std::size_t s) const {
    return indices.data() + s * num_fields;
  }
};

// Generator for collapse-prone synthetic data: every token owns a latent
// vector in R^latent_dim and labels follow a factorization-machine logit
// over those latents, so a low latent_dim confines the learnable structure
// to a low-dimensional subspace.
struct SyntheticSpec {
  std::size_t num_fields = 4;
  std::vector<std::size_t> vocab_sizes;  // one per field
  std::size_t latent_dim = 1;
  double noise_std = 0.0;
  std::size_t num_samples = 1000;
  std::uint64_t seed = 1;
};

// Strict CSV: comma separated, one header row, no quoting (cells containing
// a quote character are rejected). Label column must be 0/1. Every other
// column becomes a field; hash_buckets > 0 switches all fields to hashed
// indices bounded by hash_buckets.
Dataset load_csv(const std::string& path, const std::string& label_column,
                 std::size_t hash_buckets = 0);

Dataset gen_synthetic(const SyntheticSpec& spec);

// Writes a dataset back to the strict CSV dialect. Dictionary mode only
// (hashed fields have no token to recover).
void write_csv(const Dataset& ds, const std::string& path);

// Deterministic shuffled batches; the last partial batch is emitted.
class BatchIterator {
 public:
  BatchIterator(const Dataset& ds, std::size_t batch_size,
                std::uint64_t epoch_seed);

  // Fills `out` and returns true, or returns false at the end of the epoch.
  bool next(Batch& out);

  std::size_t num_batches() const;

 private:
  const Dataset* ds_;
  std::size_t batch_size_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

// Deterministic split by per-sample hash: a sample lands in the validation
// part when its hashed unit draw falls below val_fraction.
std::pair<Dataset, Dataset> train_val_split(const Dataset& ds,
                                            std::uint64_t seed,
                                            double val_fraction = 0.1);

}  // namespace fim
