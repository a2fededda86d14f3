#include "fim/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fim/linalg.hpp"
#include "fim/rng.hpp"

namespace fim {

std::uint32_t FieldSchema::index_of(const std::string& token) const {
  if (hash_buckets > 0) {
    return 1 + static_cast<std::uint32_t>(fnv1a64(token) %
                                          (hash_buckets - 1));
  }
  auto it = index_map.find(token);
  return it == index_map.end() ? 0 : it->second;
}

void Dataset::validate() const {
  const std::size_t f = num_fields();
  if (indices.size() != labels.size() * f) {
    throw DimensionError("Dataset index table does not match sample count");
  }
  for (std::size_t s = 0; s < size(); ++s) {
    if (labels[s] > 1) {
      throw IngestError("Dataset label out of {0,1} at sample " +
                        std::to_string(s));
    }
    const std::uint32_t* row = sample(s);
    for (std::size_t i = 0; i < f; ++i) {
      if (row[i] >= schemas[i].vocab_size) {
        throw DimensionError("Dataset index " + std::to_string(row[i]) +
                             " out of vocab for field " + schemas[i].name);
      }
    }
  }
}

namespace {

std::vector<std::string> split_line(const std::string& line, std::size_t lineno) {
  if (line.find('"') != std::string::npos) {
    throw IngestError("quoted cell at line " + std::to_string(lineno) +
                          " (quoting is not supported)",
                      lineno);
  }
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return cells;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace

Dataset load_csv(const std::string& path, const std::string& label_column,
                 std::size_t hash_buckets) {
  if (hash_buckets == 1) {
    throw IngestError("hash_buckets must be 0 (off) or >= 2");
  }
  std::ifstream in(path);
  if (!in) {
    throw IngestError("cannot open CSV file: " + path);
  }

  std::string line;
  if (!std::getline(in, line)) {
    throw IngestError("empty file (missing header): " + path);
  }
  const std::vector<std::string> header = split_line(strip_cr(line), 1);

  std::size_t label_col = header.size();
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == label_column) {
      label_col = i;
      break;
    }
  }
  if (label_col == header.size()) {
    throw IngestError("label column '" + label_column + "' not in header", 1);
  }

  Dataset ds;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i == label_col) continue;
    FieldSchema schema;
    schema.name = header[i];
    schema.hash_buckets = hash_buckets;
    schema.vocab_size = hash_buckets > 0 ? hash_buckets : 1;  // slot 0 = OOV
    ds.schemas.push_back(std::move(schema));
  }
  const std::size_t num_fields = ds.schemas.size();
  if (num_fields == 0) {
    throw IngestError("no feature columns besides the label", 1);
  }

  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_line(line, lineno);
    if (cells.size() != header.size()) {
      throw IngestError("line " + std::to_string(lineno) + " has " +
                            std::to_string(cells.size()) + " cells, expected " +
                            std::to_string(header.size()),
                        lineno);
    }

    const std::string& label_cell = cells[label_col];
    if (label_cell != "0" && label_cell != "1") {
      throw IngestError("non-binary label '" + label_cell + "' at line " +
                            std::to_string(lineno),
                        lineno);
    }
    ds.labels.push_back(label_cell == "1" ? 1 : 0);

    std::size_t field = 0;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i == label_col) continue;
      FieldSchema& schema = ds.schemas[field];
      std::uint32_t idx;
      if (hash_buckets > 0) {
        idx = schema.index_of(cells[i]);
      } else {
        auto it = schema.index_map.find(cells[i]);
        if (it == schema.index_map.end()) {
          idx = static_cast<std::uint32_t>(schema.vocab_size++);
          schema.index_map.emplace(cells[i], idx);
        } else {
          idx = it->second;
        }
      }
      ds.indices.push_back(idx);
      ++field;
    }
  }

  if (ds.labels.empty()) {
    throw IngestError("CSV has a header but no data rows: " + path);
  }
  ds.validate();
  return ds;
}

void write_csv(const Dataset& ds, const std::string& path) {
  std::vector<std::vector<std::string>> token_of(ds.num_fields());
  for (std::size_t f = 0; f < ds.num_fields(); ++f) {
    const FieldSchema& schema = ds.schemas[f];
    if (schema.hash_buckets > 0) {
      throw IngestError("cannot materialize hashed field '" + schema.name +
                        "' back to tokens");
    }
    token_of[f].assign(schema.vocab_size, std::string());
    for (const auto& [token, idx] : schema.index_map) token_of[f][idx] = token;
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IngestError("cannot open CSV for writing: " + path);
  }
  out << "label";
  for (const FieldSchema& schema : ds.schemas) out << ',' << schema.name;
  out << '\n';
  for (std::size_t s = 0; s < ds.size(); ++s) {
    out << static_cast<int>(ds.labels[s]);
    const std::uint32_t* row = ds.sample(s);
    for (std::size_t f = 0; f < ds.num_fields(); ++f) {
      out << ',' << token_of[f][row[f]];
    }
    out << '\n';
  }
}

Dataset gen_synthetic(const SyntheticSpec& spec) {
  if (spec.latent_dim < 1) {
    throw ConfigError("synthetic latent_dim must be >= 1");
  }
  if (spec.vocab_sizes.size() != spec.num_fields) {
    throw ConfigError("synthetic vocab_sizes must list one size per field");
  }
  for (std::size_t v : spec.vocab_sizes) {
    if (v < 2) throw ConfigError("synthetic vocab sizes must be >= 2");
  }

  // Latent vectors are a pure function of (seed, field, token): component
  // std r^-1/4 makes each pairwise dot product unit-variance.
  const double latent_std = std::pow(static_cast<double>(spec.latent_dim), -0.25);
  std::vector<std::vector<double>> latents(spec.num_fields);
  for (std::size_t f = 0; f < spec.num_fields; ++f) {
    latents[f].resize(spec.vocab_sizes[f] * spec.latent_dim);
    for (std::size_t t = 0; t < spec.vocab_sizes[f]; ++t) {
      Rng rng(derive_seed(spec.seed, 0x10000 + f, t));
      for (std::size_t d = 0; d < spec.latent_dim; ++d) {
        latents[f][t * spec.latent_dim + d] = rng.normal(0.0, latent_std);
      }
    }
  }

  Dataset ds;
  for (std::size_t f = 0; f < spec.num_fields; ++f) {
    FieldSchema schema;
    schema.name = "f" + std::to_string(f);
    schema.vocab_size = spec.vocab_sizes[f];
    for (std::uint32_t t = 0; t < spec.vocab_sizes[f]; ++t) {
      schema.index_map.emplace(std::to_string(t), t);
    }
    ds.schemas.push_back(std::move(schema));
  }

  Rng sample_rng(derive_seed(spec.seed, 0x5a0));
  ds.labels.reserve(spec.num_samples);
  ds.indices.reserve(spec.num_samples * spec.num_fields);
  std::vector<const double*> u(spec.num_fields);
  for (std::size_t s = 0; s < spec.num_samples; ++s) {
    for (std::size_t f = 0; f < spec.num_fields; ++f) {
      const std::uint32_t idx =
          static_cast<std::uint32_t>(sample_rng.below(spec.vocab_sizes[f]));
      ds.indices.push_back(idx);
      u[f] = latents[f].data() + idx * spec.latent_dim;
    }
    double logit = 0.0;
    for (std::size_t i = 0; i < spec.num_fields; ++i) {
      for (std::size_t j = i + 1; j < spec.num_fields; ++j) {
        double dot = 0.0;
        for (std::size_t d = 0; d < spec.latent_dim; ++d) dot += u[i][d] * u[j][d];
        logit += dot;
      }
    }
    if (spec.noise_std > 0.0) logit += sample_rng.normal(0.0, spec.noise_std);
    const double p = 1.0 / (1.0 + std::exp(-logit));
    ds.labels.push_back(sample_rng.uniform() < p ? 1 : 0);
  }
  return ds;
}

BatchIterator::BatchIterator(const Dataset& ds, std::size_t batch_size,
                             std::uint64_t epoch_seed)
    : ds_(&ds), batch_size_(batch_size) {
  if (batch_size == 0) {
    throw DimensionError("batch_size must be >= 1");
  }
  order_.resize(ds.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  Rng rng(epoch_seed);
  shuffle(order_, rng);
}

std::size_t BatchIterator::num_batches() const {
  return (order_.size() + batch_size_ - 1) / batch_size_;
}

bool BatchIterator::next(Batch& out) {
  if (pos_ >= order_.size()) return false;
  const std::size_t end = std::min(pos_ + batch_size_, order_.size());
  const std::size_t f = ds_->num_fields();
  out.num_fields = f;
  out.labels.clear();
  out.indices.clear();
  out.labels.reserve(end - pos_);
  out.indices.reserve((end - pos_) * f);
  for (std::size_t i = pos_; i < end; ++i) {
    const std::size_t s = order_[i];
    out.labels.push_back(ds_->labels[s]);
    const std::uint32_t* row = ds_->sample(s);
    out.indices.insert(out.indices.end(), row, row + f);
  }
  pos_ = end;
  return true;
}

std::pair<Dataset, Dataset> train_val_split(const Dataset& ds,
                                            std::uint64_t seed,
                                            double val_fraction) {
  Dataset train, val;
  train.schemas = ds.schemas;
  val.schemas = ds.schemas;
  const std::size_t f = ds.num_fields();
  for (std::size_t s = 0; s < ds.size(); ++s) {
    const double unit = static_cast<double>(derive_seed(seed, 0xba1a, s) >> 11) *
                        0x1.0p-53;
    Dataset& dst = unit < val_fraction ? val : train;
    dst.labels.push_back(ds.labels[s]);
    const std::uint32_t* row = ds.sample(s);
    dst.indices.insert(dst.indices.end(), row, row + f);
  }
  return {std::move(train), std::move(val)};
}

}  // namespace fim
