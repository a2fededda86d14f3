#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fim/model.hpp"
#include "fim/rng.hpp"
#include "oracles.hpp"

using fim::Matrix;
using fim::Rng;

namespace {

std::vector<std::vector<double>> random_embeddings(std::size_t f,
                                                   std::size_t k, Rng& rng) {
  std::vector<std::vector<double>> out(f, std::vector<double>(k));
  for (auto& v : out) {
    for (double& x : v) x = rng.normal();
  }
  return out;
}

fim::Batch single_sample_batch(const std::vector<std::uint32_t>& idx,
                               std::uint8_t label = 1) {
  fim::Batch batch;
  batch.num_fields = idx.size();
  batch.labels = {label};
  batch.indices = idx;
  return batch;
}

fim::ModelParams params_with_embeddings(
    const fim::ModelSpec& spec, const std::vector<std::size_t>& vocab,
    Rng& rng, double scale = 1.0) {
  fim::ModelParams params = fim::init_params(spec, vocab);
  for (Matrix& field : params.embeddings.field) {
    for (double& x : field.values()) x = rng.normal(0.0, scale);
  }
  return params;
}

}  // namespace

TEST_CASE("fm_logit hand cases") {
  CHECK(fim::fm_logit({{1.0, 0.0}, {0.0, 1.0}}) == 0.0);
  CHECK(fim::fm_logit({{1.0, 2.0}, {3.0, 4.0}}) == doctest::Approx(11.0));
  const std::vector<double> v = {0.5, -1.5, 2.0};
  const double norm_sq = 0.25 + 2.25 + 4.0;
  CHECK(fim::fm_logit({v, v, v}) == doctest::Approx(3.0 * norm_sq));
  CHECK_THROWS_AS(fim::fm_logit({v}), fim::ArityError);
}

TEST_CASE("fm_logit agrees with the pairwise-sum form") {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const auto embs = random_embeddings(2 + rng.below(6), 1 + rng.below(8), rng);
    const double fast = fim::fm_logit(embs);
    const double direct = oracle::fm_logit_pairwise(embs);
    CHECK(std::abs(fast - direct) <= 1e-10 * std::max(1.0, std::abs(direct)));
  }
}

TEST_CASE("fm_logit is invariant under field permutation") {
  Rng rng(2);
  auto embs = random_embeddings(5, 4, rng);
  const double base = fim::fm_logit(embs);
  std::vector<std::size_t> perm = {4, 2, 0, 1, 3};
  std::vector<std::vector<double>> permuted;
  for (std::size_t i : perm) permuted.push_back(embs[i]);
  CHECK(std::abs(fim::fm_logit(permuted) - base) <= 1e-12);
}

TEST_CASE("bi_interaction hand cases and the fm_logit identity") {
  const std::vector<double> out = fim::bi_interaction({{1.0, 2.0}, {3.0, 4.0}});
  REQUIRE(out.size() == 2);
  CHECK(out[0] == doctest::Approx(3.0));
  CHECK(out[1] == doctest::Approx(8.0));

  const std::vector<double> zero =
      fim::bi_interaction({{1.0, 2.0}, {0.0, 0.0}});
  CHECK(zero[0] == 0.0);
  CHECK(zero[1] == 0.0);

  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const auto embs = random_embeddings(2 + rng.below(5), 1 + rng.below(6), rng);
    const std::vector<double> bi = fim::bi_interaction(embs);
    double total = 0.0;
    for (double x : bi) total += x;
    CHECK(std::abs(total - fim::fm_logit(embs)) <= 1e-10);
  }
  CHECK_THROWS_AS(fim::bi_interaction({{1.0}}), fim::ArityError);
}

TEST_CASE("cross_forward layer rule") {
  const std::size_t d = 4;
  fim::CrossParams zero;
  zero.w.push_back(Matrix(d, d));
  zero.b.push_back(Matrix(1, d));
  zero.w.push_back(Matrix(d, d));
  zero.b.push_back(Matrix(1, d));
  const std::vector<double> x0 = {1.0, -2.0, 0.5, 3.0};
  CHECK(fim::cross_forward(x0, zero) == x0);

  fim::CrossParams ident;
  ident.w.push_back(Matrix::identity(d));
  ident.b.push_back(Matrix(1, d));
  const std::vector<double> one_layer = fim::cross_forward(x0, ident);
  for (std::size_t c = 0; c < d; ++c) {
    CHECK(one_layer[c] == doctest::Approx(x0[c] * x0[c] + x0[c]));
  }

  const fim::CrossParams empty;  // depth 0
  CHECK(fim::cross_forward(x0, empty) == x0);

  fim::CrossParams bad;
  bad.w.push_back(Matrix(3, 3));
  bad.b.push_back(Matrix(1, 3));
  CHECK_THROWS_AS(fim::cross_forward(x0, bad), fim::DimensionError);
}

TEST_CASE("cross_forward commutes with block permutations of the input") {
  Rng rng(4);
  const std::size_t f = 3, k = 2, d = f * k;
  fim::CrossParams params;
  params.w.push_back(oracle::random_matrix(d, d, rng, 0.5));
  params.b.push_back(oracle::random_matrix(1, d, rng, 0.5));

  std::vector<double> x0(d);
  for (double& x : x0) x = rng.normal();

  const std::vector<std::size_t> perm = {2, 0, 1};  // field-level permutation
  auto permute_vec = [&](const std::vector<double>& v) {
    std::vector<double> out(d);
    for (std::size_t i = 0; i < f; ++i) {
      for (std::size_t c = 0; c < k; ++c) out[i * k + c] = v[perm[i] * k + c];
    }
    return out;
  };

  fim::CrossParams permuted = params;
  for (std::size_t i = 0; i < f; ++i) {
    for (std::size_t ci = 0; ci < k; ++ci) {
      for (std::size_t j = 0; j < f; ++j) {
        for (std::size_t cj = 0; cj < k; ++cj) {
          permuted.w[0](i * k + ci, j * k + cj) =
              params.w[0](perm[i] * k + ci, perm[j] * k + cj);
        }
      }
      permuted.b[0](0, i * k + ci) = params.b[0](0, perm[i] * k + ci);
    }
  }

  const std::vector<double> direct = permute_vec(fim::cross_forward(x0, params));
  const std::vector<double> via_perm =
      fim::cross_forward(permute_vec(x0), permuted);
  for (std::size_t c = 0; c < d; ++c) {
    CHECK(std::abs(direct[c] - via_perm[c]) <= 1e-12);
  }
}

TEST_CASE("mlp_forward relu and identity behavior") {
  fim::MlpParams mlp;
  mlp.act = fim::Activation::relu;
  mlp.w.push_back(Matrix(2, 3, {-1.0, -2.0, -0.5, -3.0, -1.0, -2.0}));
  mlp.b.push_back(Matrix(1, 2, {-1.0, -2.0}));
  mlp.out_w = Matrix(1, 2, {5.0, 7.0});
  mlp.out_b = Matrix(1, 1, {0.25});
  // positive input, all-negative pre-activations: only the output bias
  CHECK(fim::mlp_forward({1.0, 1.0, 1.0}, mlp) == 0.25);

  fim::MlpParams lin;
  lin.act = fim::Activation::identity;
  lin.w.push_back(Matrix(2, 2, {1.0, 2.0, 3.0, 4.0}));
  lin.b.push_back(Matrix(1, 2, {0.5, -0.5}));
  lin.out_w = Matrix(1, 2, {2.0, -1.0});
  lin.out_b = Matrix(1, 1, {1.0});
  // by hand: W x + b = (1*1+2*2+0.5, 3*1+4*2-0.5) = (5.5, 10.5)
  //          out = 2*5.5 - 10.5 + 1 = 1.5
  CHECK(fim::mlp_forward({1.0, 2.0}, lin) == doctest::Approx(1.5));

  CHECK_THROWS_AS(fim::mlp_forward({1.0}, lin), fim::DimensionError);
}

TEST_CASE("relu equals identity when all pre-activations are nonnegative") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    fim::MlpParams relu;
    relu.act = fim::Activation::relu;
    relu.w.push_back(oracle::random_matrix(4, 3, rng, 0.5));
    for (double& x : relu.w[0].values()) x = std::abs(x);  // positive regime
    relu.b.push_back(oracle::random_matrix(1, 4, rng, 0.1));
    for (double& x : relu.b[0].values()) x = std::abs(x);
    relu.out_w = oracle::random_matrix(1, 4, rng);
    relu.out_b = oracle::random_matrix(1, 1, rng);

    fim::MlpParams ident = relu;
    ident.act = fim::Activation::identity;

    std::vector<double> x(3);
    for (double& v : x) v = std::abs(rng.normal());
    CHECK(fim::mlp_forward(x, relu) == fim::mlp_forward(x, ident));
  }
}

TEST_CASE("bce_loss values and symmetry") {
  CHECK(fim::bce_loss(0.5, 1) == doctest::Approx(std::log(2.0)));
  CHECK(fim::bce_loss(1.0, 1) == doctest::Approx(0.0).epsilon(1e-11));
  CHECK(fim::bce_loss(1.0 - 1e-12, 1) >= 0.0);
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const double p = rng.uniform();
    CHECK(fim::bce_loss(p, 1) == doctest::Approx(fim::bce_loss(1.0 - p, 0)));
  }
}

TEST_CASE("model_forward: fm with no head equals fm_logit") {
  fim::ModelSpec spec;
  spec.backbone = fim::Backbone::fm;
  spec.head = fim::Head::none;
  spec.embed_dim = 3;
  Rng rng(7);
  const std::vector<std::size_t> vocab = {4, 5, 6};
  const fim::ModelParams params = params_with_embeddings(spec, vocab, rng);
  const fim::Batch batch = single_sample_batch({1, 2, 3});
  const fim::ForwardTrace trace = fim::model_forward(spec, params, batch);

  std::vector<std::vector<double>> embs;
  for (std::size_t i = 0; i < 3; ++i) {
    const double* row = params.embeddings.field[i].row(batch.sample(0)[i]);
    embs.emplace_back(row, row + 3);
  }
  CHECK(trace.logit[0] == fim::fm_logit(embs));
  CHECK(trace.p[0] == fim::sigmoid(trace.logit[0]));
}

TEST_CASE("model_forward: zeroed parallel head leaves the backbone logit") {
  fim::ModelSpec spec;
  spec.backbone = fim::Backbone::fm;
  spec.head = fim::Head::p_dnn;
  spec.embed_dim = 4;
  spec.mlp_hidden = {8};
  Rng rng(8);
  const std::vector<std::size_t> vocab = {5, 5, 5};
  fim::ModelParams params = params_with_embeddings(spec, vocab, rng);
  for (Matrix& w : params.mlp.w) {
    for (double& x : w.values()) x = 0.0;
  }
  for (Matrix& b : params.mlp.b) {
    for (double& x : b.values()) x = 0.0;
  }
  for (double& x : params.mlp.out_w.values()) x = 0.0;
  params.mlp.out_b(0, 0) = 0.0;

  fim::ModelSpec bare = spec;
  bare.head = fim::Head::none;
  fim::ModelParams bare_params = params;
  bare_params.mlp = fim::MlpParams{};

  const fim::Batch batch = single_sample_batch({0, 1, 2});
  const double with_head =
      fim::model_forward(spec, params, batch).logit[0];
  const double without =
      fim::model_forward(bare, bare_params, batch).logit[0];
  CHECK(with_head == without);
}

TEST_CASE("model_forward: relu head equals linear head in a positive regime") {
  fim::ModelSpec spec;
  spec.backbone = fim::Backbone::fm;
  spec.head = fim::Head::p_dnn;
  spec.embed_dim = 2;
  spec.mlp_hidden = {6};
  Rng rng(9);
  const std::vector<std::size_t> vocab = {3, 3};
  fim::ModelParams params = params_with_embeddings(spec, vocab, rng);
  // positive weights, positive embeddings, positive biases: every
  // pre-activation is strictly positive
  for (Matrix& field : params.embeddings.field) {
    for (double& x : field.values()) x = std::abs(x) + 0.1;
  }
  for (Matrix& w : params.mlp.w) {
    for (double& x : w.values()) x = std::abs(x) + 0.1;
  }
  for (Matrix& b : params.mlp.b) {
    for (double& x : b.values()) x = std::abs(x) + 0.1;
  }

  fim::ModelSpec linear = spec;
  linear.head = fim::Head::linear_p_dnn;
  fim::ModelParams linear_params = params;
  linear_params.mlp.act = fim::Activation::identity;

  const fim::Batch batch = single_sample_batch({1, 2});
  const double relu_logit = fim::model_forward(spec, params, batch).logit[0];
  const double lin_logit =
      fim::model_forward(linear, linear_params, batch).logit[0];
  CHECK(std::abs(relu_logit - lin_logit) <= 1e-12);
}

TEST_CASE("model_forward covers every variant and is replayable") {
  Rng rng(10);
  const std::vector<std::size_t> vocab = {6, 4, 5, 7};
  fim::Batch batch;
  batch.num_fields = 4;
  for (int s = 0; s < 5; ++s) {
    batch.labels.push_back(s % 2);
    for (std::size_t i = 0; i < 4; ++i) {
      batch.indices.push_back(
          static_cast<std::uint32_t>(rng.below(vocab[i])));
    }
  }

  for (fim::Backbone backbone : {fim::Backbone::fm, fim::Backbone::crossnet}) {
    for (fim::Head head :
         {fim::Head::none, fim::Head::p_dnn, fim::Head::s_dnn,
          fim::Head::linear_p_dnn, fim::Head::linear_s_dnn}) {
      fim::ModelSpec spec;
      spec.backbone = backbone;
      spec.head = head;
      spec.embed_dim = 3;
      spec.mlp_hidden = {5, 4};
      spec.cross_depth = 2;
      spec.init_seed = 11;
      const fim::ModelParams params = params_with_embeddings(spec, vocab, rng);

      const fim::ForwardTrace t1 = fim::model_forward(spec, params, batch);
      const fim::ForwardTrace t2 = fim::model_forward(spec, params, batch);
      CHECK(t1.logit == t2.logit);
      CHECK(t1.p == t2.p);
      CHECK(t1.concat == t2.concat);
      for (double p : t1.p) {
        CHECK(p > 0.0);
        CHECK(p < 1.0);
      }
    }
  }
}

TEST_CASE("init_params is deterministic and has documented shapes") {
  fim::ModelSpec spec;
  spec.backbone = fim::Backbone::crossnet;
  spec.head = fim::Head::p_dnn;
  spec.embed_dim = 4;
  spec.mlp_hidden = {8, 6};
  spec.cross_depth = 2;
  spec.init_seed = 21;
  const std::vector<std::size_t> vocab = {10, 12};

  const fim::ModelParams a = fim::init_params(spec, vocab);
  const fim::ModelParams b = fim::init_params(spec, vocab);
  CHECK(a.embeddings.field[0] == b.embeddings.field[0]);
  CHECK(a.mlp.w[0] == b.mlp.w[0]);

  CHECK(a.embeddings.field[0].rows() == 10);
  CHECK(a.embeddings.field[1].cols() == 4);
  CHECK(a.cross.w.size() == 2);
  CHECK(a.cross.w[0].rows() == 8);
  CHECK(a.cross.readout_w.cols() == 8);
  CHECK(a.mlp.w[0].rows() == 8);
  CHECK(a.mlp.w[0].cols() == 8);   // 2 fields x dim 4
  CHECK(a.mlp.w[1].cols() == 8);
  CHECK(a.mlp.w[1].rows() == 6);
  CHECK(a.mlp.out_w.cols() == 6);

  const auto names = fim::named_tensors(a);
  CHECK(names.front().name == "embed.f0");
  CHECK(names.back().name == "mlp.out_b");

  // stacked head on crossnet owns no readout
  fim::ModelSpec stacked = spec;
  stacked.head = fim::Head::s_dnn;
  const fim::ModelParams c = fim::init_params(stacked, vocab);
  CHECK(c.cross.readout_w.empty());
}
