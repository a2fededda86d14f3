#include "fim/config.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fim {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  const auto [ptr, ec] =
      std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError("key '" + key + "' needs an unsigned integer, got '" +
                      value + "'");
  }
  return out;
}

double parse_f64(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double out = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "' needs a number, got '" + value + "'");
  }
}

std::vector<std::size_t> parse_size_list(const std::string& key,
                                         const std::string& value) {
  std::vector<std::size_t> out;
  if (trim(value).empty()) return out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    out.push_back(static_cast<std::size_t>(parse_u64(key, trim(item))));
  }
  return out;
}

std::string join_size_list(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

SnapshotLayout layout_from_string(const std::string& s) {
  if (s == "concat") return SnapshotLayout::concat;
  if (s == "stacked") return SnapshotLayout::stacked;
  if (s == "both") return SnapshotLayout::both;
  throw ConfigError("unknown snapshot layout '" + s +
                    "' (concat | stacked | both)");
}

void apply_key(ExperimentConfig& c, const std::string& key,
               const std::string& value) {
  if (key == "data.source") {
    if (value != "synthetic" && value != "csv") {
      throw ConfigError("data.source must be synthetic or csv");
    }
    c.data_source = value;
  } else if (key == "data.csv_path") {
    c.csv_path = value;
  } else if (key == "data.label_column") {
    c.label_column = value;
  } else if (key == "data.hash_buckets") {
    c.hash_buckets = parse_u64(key, value);
  } else if (key == "data.synth.fields") {
    c.synth.num_fields = parse_u64(key, value);
  } else if (key == "data.synth.vocab") {
    c.synth.vocab_sizes = parse_size_list(key, value);
  } else if (key == "data.synth.latent_dim") {
    c.synth.latent_dim = parse_u64(key, value);
  } else if (key == "data.synth.noise_std") {
    c.synth.noise_std = parse_f64(key, value);
  } else if (key == "data.synth.samples") {
    c.synth.num_samples = parse_u64(key, value);
  } else if (key == "model.backbone") {
    c.model.backbone = backbone_from_string(value);
  } else if (key == "model.head") {
    c.model.head = head_from_string(value);
  } else if (key == "model.embed_dim") {
    c.model.embed_dim = parse_u64(key, value);
  } else if (key == "model.mlp_hidden") {
    c.model.mlp_hidden = parse_size_list(key, value);
  } else if (key == "model.cross_depth") {
    c.model.cross_depth = parse_u64(key, value);
  } else if (key == "optim.algo") {
    if (value != "adam" && value != "sgd") {
      throw ConfigError("optim.algo must be adam or sgd");
    }
    c.optimizer = value;
  } else if (key == "optim.lr") {
    c.learning_rate = parse_f64(key, value);
  } else if (key == "train.batch_size") {
    c.batch_size = parse_u64(key, value);
  } else if (key == "train.epochs") {
    c.epochs = parse_u64(key, value);
  } else if (key == "train.snapshot_interval") {
    c.snapshot_interval = parse_u64(key, value);
  } else if (key == "train.spectrum_samples") {
    c.spectrum_samples = parse_u64(key, value);
  } else if (key == "train.val_fraction") {
    c.val_fraction = parse_f64(key, value);
  } else if (key == "diagnostics.snapshot_layout") {
    c.snapshot_layout = layout_from_string(value);
  } else if (key == "seed") {
    c.seed = parse_u64(key, value);
    c.seed_set = true;
  } else if (key == "out") {
    c.out_dir = value;
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

}  // namespace

std::string to_string(SnapshotLayout layout) {
  switch (layout) {
    case SnapshotLayout::concat: return "concat";
    case SnapshotLayout::stacked: return "stacked";
    case SnapshotLayout::both: return "both";
  }
  return "concat";
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig config;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) +
                        " is not 'key = value': " + line);
    }
    apply_key(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return config;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file: " + path);
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

void apply_preset(ExperimentConfig& c, const std::string& name) {
  if (name == "desk") {
    c.data_source = "synthetic";
    c.model.embed_dim = 8;
    c.model.mlp_hidden = {64, 64};
    c.model.cross_depth = 2;
    c.synth.num_fields = 4;
    c.synth.vocab_sizes = {40, 40, 40, 40};
    c.synth.latent_dim = 1;
    c.synth.noise_std = 0.0;
    c.synth.num_samples = 4000;
    c.batch_size = 128;
    c.epochs = 3;
    c.snapshot_interval = 10;
    c.spectrum_samples = 1024;
  } else if (name == "avazu-like") {
    c.model.embed_dim = 16;
    c.model.mlp_hidden = head_is_stacked(c.model.head)
                             ? std::vector<std::size_t>{400, 400, 400}
                             : std::vector<std::size_t>{2000, 2000, 2000, 2000};
    c.model.cross_depth = 3;
  } else {
    throw ConfigError("unknown preset '" + name + "' (desk | avazu-like)");
  }
}

void ExperimentConfig::validate() const {
  if (!seed_set) {
    throw ConfigError("config must set a seed");
  }
  if (data_source == "csv") {
    if (csv_path.empty()) {
      throw ConfigError("data.source = csv requires data.csv_path");
    }
    if (!std::filesystem::exists(csv_path)) {
      throw ConfigError("data.csv_path does not exist: " + csv_path);
    }
  } else {
    if (synth.vocab_sizes.size() != synth.num_fields) {
      throw ConfigError(
          "data.synth.vocab must list one size per field (fields=" +
          std::to_string(synth.num_fields) + ")");
    }
  }
  if (batch_size == 0) throw ConfigError("train.batch_size must be >= 1");
  if (epochs == 0) throw ConfigError("train.epochs must be >= 1");
  if (model.embed_dim == 0) throw ConfigError("model.embed_dim must be >= 1");
  if (snapshot_interval == 0) {
    throw ConfigError("train.snapshot_interval must be >= 1");
  }
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw ConfigError("train.val_fraction must lie in (0, 1)");
  }
}

std::string render_config(const ExperimentConfig& c) {
  std::ostringstream out;
  out << "# resolved fimlab experiment config\n";
  out << "data.source = " << c.data_source << "\n";
  if (!c.csv_path.empty()) out << "data.csv_path = " << c.csv_path << "\n";
  out << "data.label_column = " << c.label_column << "\n";
  out << "data.hash_buckets = " << c.hash_buckets << "\n";
  out << "data.synth.fields = " << c.synth.num_fields << "\n";
  out << "data.synth.vocab = " << join_size_list(c.synth.vocab_sizes) << "\n";
  out << "data.synth.latent_dim = " << c.synth.latent_dim << "\n";
  out << "data.synth.noise_std = " << format_double(c.synth.noise_std) << "\n";
  out << "data.synth.samples = " << c.synth.num_samples << "\n";
  out << "model.backbone = " << to_string(c.model.backbone) << "\n";
  out << "model.head = " << to_string(c.model.head) << "\n";
  out << "model.embed_dim = " << c.model.embed_dim << "\n";
  out << "model.mlp_hidden = " << join_size_list(c.model.mlp_hidden) << "\n";
  out << "model.cross_depth = " << c.model.cross_depth << "\n";
  out << "optim.algo = " << c.optimizer << "\n";
  out << "optim.lr = " << format_double(c.learning_rate) << "\n";
  out << "train.batch_size = " << c.batch_size << "\n";
  out << "train.epochs = " << c.epochs << "\n";
  out << "train.snapshot_interval = " << c.snapshot_interval << "\n";
  out << "train.spectrum_samples = " << c.spectrum_samples << "\n";
  out << "train.val_fraction = " << format_double(c.val_fraction) << "\n";
  out << "diagnostics.snapshot_layout = " << to_string(c.snapshot_layout)
      << "\n";
  out << "seed = " << c.seed << "\n";
  out << "out = " << c.out_dir << "\n";
  return out.str();
}

}  // namespace fim
