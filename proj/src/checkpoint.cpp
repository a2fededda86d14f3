#include "fim/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace fim {

namespace {

constexpr const char* kMagic = "fimlab-checkpoint 1";

std::string join_sizes(const std::vector<std::size_t>& sizes) {
  std::string out;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(sizes[i]);
  }
  return out;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelSpec& spec,
                     const std::vector<std::size_t>& vocab_sizes,
                     const ModelParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IngestError("cannot open checkpoint for writing: " + path);
  }
  out << kMagic << '\n';
  out << "backbone " << to_string(spec.backbone) << '\n';
  out << "head " << to_string(spec.head) << '\n';
  out << "embed_dim " << spec.embed_dim << '\n';
  out << "cross_depth " << spec.cross_depth << '\n';
  out << "mlp_hidden " << join_sizes(spec.mlp_hidden) << '\n';
  out << "vocab " << join_sizes(vocab_sizes) << '\n';

  char buf[40];
  for (const ConstTensorRef& ref : named_tensors(params)) {
    const Matrix& t = *ref.tensor;
    out << "tensor " << ref.name << ' ' << t.rows() << ' ' << t.cols() << '\n';
    for (std::size_t r = 0; r < t.rows(); ++r) {
      const double* row = t.row(r);
      for (std::size_t c = 0; c < t.cols(); ++c) {
        std::snprintf(buf, sizeof(buf), "%.17g", row[c]);
        if (c) out << ' ';
        out << buf;
      }
      out << '\n';
    }
  }
  out << "end\n";
}

namespace {

std::string expect_line(std::ifstream& in, const std::string& path) {
  std::string line;
  if (!std::getline(in, line)) {
    throw SchemaError("truncated checkpoint: " + path);
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

void expect_header(const std::string& line, const std::string& key,
                   const std::string& want) {
  if (line != key + " " + want) {
    throw SchemaError("checkpoint/spec mismatch: expected '" + key + " " +
                      want + "', found '" + line + "'");
  }
}

}  // namespace

ModelParams load_checkpoint(const std::string& path, const ModelSpec& spec,
                            const std::vector<std::size_t>& vocab_sizes) {
  std::ifstream in(path);
  if (!in) {
    throw IngestError("cannot open checkpoint: " + path);
  }
  if (expect_line(in, path) != kMagic) {
    throw SchemaError("not a fimlab checkpoint: " + path);
  }
  expect_header(expect_line(in, path), "backbone", to_string(spec.backbone));
  expect_header(expect_line(in, path), "head", to_string(spec.head));
  expect_header(expect_line(in, path), "embed_dim",
                std::to_string(spec.embed_dim));
  expect_header(expect_line(in, path), "cross_depth",
                std::to_string(spec.cross_depth));
  expect_header(expect_line(in, path), "mlp_hidden",
                join_sizes(spec.mlp_hidden));
  expect_header(expect_line(in, path), "vocab", join_sizes(vocab_sizes));

  // Shape the receiving tensors from the spec, then require the stored
  // blocks to match them one for one.
  ModelParams params = init_params(spec, vocab_sizes);
  for (TensorRef& ref : named_tensors(params)) {
    const std::string header = expect_line(in, path);
    std::istringstream hs(header);
    std::string tag, name;
    std::size_t rows = 0, cols = 0;
    hs >> tag >> name >> rows >> cols;
    if (tag != "tensor" || name != ref.name || rows != ref.tensor->rows() ||
        cols != ref.tensor->cols()) {
      throw SchemaError("checkpoint/spec mismatch at tensor '" + ref.name +
                        "': found '" + header + "'");
    }
    for (std::size_t r = 0; r < rows; ++r) {
      std::istringstream ls(expect_line(in, path));
      for (std::size_t c = 0; c < cols; ++c) {
        if (!(ls >> (*ref.tensor)(r, c))) {
          throw SchemaError("short row in tensor '" + ref.name + "'");
        }
      }
    }
  }
  if (expect_line(in, path) != "end") {
    throw SchemaError("checkpoint missing end marker: " + path);
  }
  params.revision = 0;
  return params;
}

}  // namespace fim
