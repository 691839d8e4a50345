// Copyright 2026 The spac Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <chrono>
#include <cmath>

#include "spac/codec/synthetic.hpp"
#include "spac/codec/train.hpp"
#include "spac/error.hpp"
#include "spac/nn/adam.hpp"
#include "spac/nn/blocks.hpp"
#include "support.hpp"

namespace spac::nn {
namespace {

using testing::gradient_error;
using testing::jittered;
using testing::random_matrix;

constexpr double kGradTol = 1e-3;
// The rate-distortion loss is around 1e4, so differences below this are
// rounding noise.
constexpr double kLossFloor = 1e-3;

NetworkConfig
small_config()
{
  NetworkConfig c = NetworkConfig::with_layers(2);
  c.width = 6;
  c.latent_dim = 3;
  c.hyper_dim = 2;
  c.context_rows = 2;
  return c;
}

BlockLayout
two_blocks()
{
  BlockLayout l;
  l.blocks = 2;
  l.valid = {1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0};
  return l;
}

bool
has_prefix(const std::string& s, const std::string& p)
{
  return s.compare(0, p.size(), p) == 0;
}

// Worst relative gradient error over every parameter under `prefix`.
template <typename LossFn>
double
worst_error(ModelWeights& w, const std::string& prefix, LossFn&& loss, std::vector<std::string>* checked = nullptr,
            double floor = 1e-6)
{
  double worst = 0.0;
  for (const auto& [name, t] : w.params()) {
    if (!has_prefix(name, prefix))
      continue;
    if (checked)
      checked->push_back(name);
    const double e = gradient_error(t, loss, 1e-4, floor);
    EXPECT_LT(e, kGradTol) << name;
    worst = std::max(worst, e);
  }
  return worst;
}

class BlockGradients : public ::testing::Test {
 protected:
  BlockGradients() : w(jittered(small_config(), 11)), rng(12), layout(two_blocks())
  {
    x = Tensor::parameter(random_matrix(rng, 16, 6));
    colors = Tensor::parameter(random_matrix(rng, 16, 3, 0, 255));
    normals = Tensor::constant(random_matrix(rng, 16, 3));
    rel_pos = Tensor::constant(random_matrix(rng, 16, 3, -0.5, 0.5));
    latents = Tensor::parameter(random_matrix(rng, 2, 3));
    probe16 = random_matrix(rng, 16, 6);
  }

  Tensor
  probe(const Tensor& t) const
  {
    return sum(hadamard(t, Tensor::constant(probe16.leftCols(t.cols()).topRows(t.rows()))));
  }

  ModelWeights w;
  Rng rng;
  BlockLayout layout;
  Tensor x, colors, normals, rel_pos, latents;
  Matrix probe16;
};

TEST_F(BlockGradients, NeighborConv)
{
  auto loss = [&] { return probe(neighbor_conv(w, "fnet1.conv1", x, layout)); };
  worst_error(w, "fnet1.conv1.", loss);
  EXPECT_LT(gradient_error(x, loss), kGradTol);
}

TEST_F(BlockGradients, OffsetAttention)
{
  auto loss = [&] { return probe(offset_attention(w, "fnet1.attn", x, layout)); };
  worst_error(w, "fnet1.attn.", loss);
  EXPECT_LT(gradient_error(x, loss), kGradTol);
}

TEST_F(BlockGradients, GeometryRefine)
{
  auto loss = [&] { return probe(geometry_refine(w, "fnet1.refine", x, normals, layout)); };
  worst_error(w, "fnet1.refine.", loss);
  EXPECT_LT(gradient_error(x, loss), kGradTol);
}

TEST_F(BlockGradients, AnalysisNetwork)
{
  auto loss = [&] { return probe(fnet_forward(w, 2, colors, normals, layout)); };
  std::vector<std::string> names;
  worst_error(w, "fnet2.", loss, &names);
  EXPECT_GT(names.size(), 10u);
}

TEST_F(BlockGradients, SynthesisAndColourHead)
{
  auto loss = [&] { return probe(reconnet_forward(w, refnet_forward(w, 1, latents, rel_pos, layout), layout, false)); };
  worst_error(w, "refnet1.", loss);
  worst_error(w, "recon.", loss);
  EXPECT_LT(gradient_error(latents, loss), kGradTol);
}

TEST_F(BlockGradients, HyperAndParameterHeads)
{
  Tensor base = Tensor::parameter(random_matrix(rng, 5, 3));
  Tensor ctx_in = Tensor::parameter(random_matrix(rng, 1, 6));
  const Matrix r = random_matrix(rng, 1, 3, 0.5, 1.5);
  auto loss = [&] {
    const Tensor h = hyper_decode(w, hyper_encode(w, base));
    const Tensor a = layer_adapter(w, 1, h);
    const RowParams p = param_head(w, 1, context_features(w, 1, ctx_in), a);
    const Tensor c = Tensor::constant(r);
    return add(add(sum(hadamard(p.mu, c)), sum(hadamard(p.scale, c))), sum(hadamard(p.delta, c)));
  };
  for (const char* prefix : {"hyper.enc.", "hyper.dec.", "adapt1.", "ctx1.", "param1.", "hsq1."})
    worst_error(w, prefix, loss);
  EXPECT_LT(gradient_error(base, loss), kGradTol);
  EXPECT_LT(gradient_error(ctx_in, loss), kGradTol);
}

//============================================================================
// Loss paths.

class LossGradients : public ::testing::Test {
 protected:
  static void
  SetUpTestSuite()
  {
    GroupSpec spec;
    spec.omega = 64;
    spec.tau = 0.1;
    sample_ = new codec::TrainingSample(codec::prepare_sample(codec::synthetic_cloud(160, 3, 8), spec, 2));
  }
  static void
  TearDownTestSuite()
  {
    delete sample_;
  }
  static codec::TrainingSample* sample_;
};

codec::TrainingSample* LossGradients::sample_ = nullptr;

TEST_F(LossGradients, SampleUsesEveryLayer)
{
  for (const auto& in : sample_->inputs)
    EXPECT_GT(in.points, 0u);
}

TEST_F(LossGradients, NoisePathAllParameters)
{
  ModelWeights w = jittered(small_config(), 21);
  codec::RDLossOptions o;
  o.lambda1 = 100;
  auto loss = [&] {
    Rng r(5);
    return codec::rd_loss(*sample_, w, o, r).total_tensor;
  };
  std::vector<std::string> names;
  const auto t0 = std::chrono::steady_clock::now();
  worst_error(w, "", loss, &names, kLossFloor);
  EXPECT_EQ(names.size(), w.params().size());
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 120.0);
}

// Finite differences through hard rounding see a flat loss, so parameters
// that only feed the quantizers' inputs are left out.
TEST_F(LossGradients, StraightThroughPathDownstreamParameters)
{
  ModelWeights w = jittered(small_config(), 22);
  codec::RDLossOptions o;
  o.lambda1 = 100;
  o.straight_through = true;
  auto loss = [&] {
    Rng r(5);
    return codec::rd_loss(*sample_, w, o, r).total_tensor;
  };
  std::vector<std::string> names;
  for (const auto& [name, t] : w.params()) {
    if (has_prefix(name, "fnet") || has_prefix(name, "hyper.enc."))
      continue;
    names.push_back(name);
    EXPECT_LT(gradient_error(t, loss, 1e-4, kLossFloor), kGradTol) << name;
  }
  EXPECT_GT(names.size(), 20u);
}

TEST_F(LossGradients, TotalCombinesTerms)
{
  ModelWeights w = ModelWeights::initialize(small_config(), 23);
  codec::RDLossOptions o;
  o.lambda1 = 600;
  o.lambda2 = 2;
  Rng r(1);
  const auto b = codec::rd_loss(*sample_, w, o, r);
  EXPECT_NEAR(b.total, b.distortion + 600 * b.entropy_bits + 2 * b.hyper_bits, 1e-9 * b.total);
  EXPECT_GT(b.distortion, 0);
  EXPECT_GT(b.entropy_bits, 0);
  EXPECT_GT(b.hyper_bits, 0);
}

//============================================================================
// Quantization.

TEST(Quantize, RoundsToStepMultiples)
{
  const Matrix y = (Matrix(1, 4) << 1.3, 0.5, -0.74, 2.0).finished();
  const Matrix d = (Matrix(1, 4) << 0.5, 1.0, 0.5, 0.4).finished();
  const Matrix q = quantize_test(y, d);
  EXPECT_DOUBLE_EQ(q(0, 0), 1.5);
  EXPECT_DOUBLE_EQ(q(0, 1), 0.0);  // ties to even
  EXPECT_DOUBLE_EQ(q(0, 2), -0.5);
  EXPECT_DOUBLE_EQ(q(0, 3), 2.0);
  EXPECT_EQ(quantize_test(q, d), q);
}

TEST(Quantize, NoiseStaysWithinHalfStep)
{
  Rng rng(31);
  const Matrix y = random_matrix(rng, 40, 8, -5, 5);
  const Matrix d = random_matrix(rng, 40, 8, 0.05, 4.0);
  const Matrix t = quantize_train(Tensor::constant(y), Tensor::constant(d), rng).value();
  for (Eigen::Index i = 0; i < y.size(); ++i)
    EXPECT_LE(std::abs(t.data()[i] - y.data()[i]), 0.5 * d.data()[i]);
}

TEST(Quantize, RejectsNonPositiveStep)
{
  Rng rng(1);
  const Matrix y = Matrix::Ones(1, 2);
  const Matrix d = (Matrix(1, 2) << 1.0, 0.0).finished();
  EXPECT_THROW(quantize_test(y, d), Error);
  EXPECT_THROW(quantize_train(Tensor::constant(y), Tensor::constant(d), rng), Error);
}

TEST(Quantize, StepStaysInConfiguredRange)
{
  ModelWeights w = ModelWeights::initialize(small_config(), 4);
  Rng rng(5);
  const Tensor ctx = Tensor::constant(random_matrix(rng, 7, 3, -50, 50));
  const Tensor a = Tensor::constant(random_matrix(rng, 7, 3, -50, 50));
  const Matrix d = hsq_delta(w, 1, ctx, a).value();
  EXPECT_GE(d.minCoeff(), small_config().delta_min);
  EXPECT_LE(d.maxCoeff(), small_config().delta_max);
}

TEST(ParamHead, ZeroWeightsGiveUnitScale)
{
  ModelWeights w = ModelWeights::initialize(small_config(), 4);
  for (const auto& entry : w.params())
    if (has_prefix(entry.first, "param1."))
      w.at(entry.first).mutable_value().setZero();
  Rng rng(6);
  const Tensor h = hyper_decode(w, Tensor::constant(random_matrix(rng, 1, 2)));
  const Tensor ctx = context_features(w, 1, Tensor::constant(random_matrix(rng, 1, 6)));
  const RowParams p = param_head(w, 1, ctx, layer_adapter(w, 1, h));
  EXPECT_EQ(p.mu.value(), Matrix::Zero(1, 3));
  EXPECT_EQ(p.scale.value(), Matrix::Ones(1, 3));
}

//============================================================================
// Block contracts.

TEST(Blocks, NeighborConvMatchesLoop)
{
  ModelWeights w = ModelWeights::initialize(small_config(), 6);
  Rng rng(7);
  const BlockLayout l = two_blocks();
  const Matrix x = random_matrix(rng, 16, 6);
  const Matrix& ws = w.at("fnet1.conv1.self").value();
  const Matrix& wn = w.at("fnet1.conv1.neigh").value();
  const Matrix& b = w.at("fnet1.conv1.bias").value();
  const Matrix got = neighbor_conv(w, "fnet1.conv1", Tensor::constant(x), l).value();
  for (int r = 0; r < 16; ++r) {
    const int blk = r / 8;
    for (int c = 0; c < 6; ++c) {
      double want = 0.0;
      if (l.valid[std::size_t(r)]) {
        std::vector<double> mean(6, 0.0);
        int n = 0;
        for (int j = blk * 8; j < blk * 8 + 8; ++j) {
          if (j == r || !l.valid[std::size_t(j)])
            continue;
          ++n;
          for (int k = 0; k < 6; ++k)
            mean[std::size_t(k)] += x(j, k);
        }
        want = b(0, c);
        for (int k = 0; k < 6; ++k)
          want += x(r, k) * ws(k, c) + (n ? mean[std::size_t(k)] / n : 0.0) * wn(k, c);
      }
      EXPECT_NEAR(got(r, c), want, 1e-12);
    }
  }
}

TEST(Blocks, OffsetAttentionIsBitwiseEquivariant)
{
  ModelWeights w = ModelWeights::initialize(small_config(), 8);
  Rng rng(9);
  const BlockLayout l = BlockLayout::full(3);
  const Matrix x = random_matrix(rng, 24, 6);
  const std::vector<int> perm = {6, 2, 7, 0, 4, 1, 5, 3};
  auto permute = [&](const Matrix& m) {
    Matrix p(m.rows(), m.cols());
    for (int b = 0; b < 3; ++b)
      for (int s = 0; s < 8; ++s)
        p.row(b * 8 + s) = m.row(b * 8 + perm[std::size_t(s)]);
    return p;
  };
  const Matrix a = offset_attention(w, "fnet1.attn", Tensor::constant(x), l).value();
  const Matrix b = offset_attention(w, "fnet1.attn", Tensor::constant(permute(x)), l).value();
  EXPECT_EQ(permute(a), b);
}

TEST(Blocks, AnalysisIsSlotOrderInvariant)
{
  ModelWeights w = ModelWeights::initialize(small_config(), 10);
  Rng rng(11);
  const BlockLayout l = two_blocks();
  const Matrix c = random_matrix(rng, 16, 3, 0, 255);
  const Matrix n = random_matrix(rng, 16, 3);
  Matrix c2 = c, n2 = n;
  c2.row(0).swap(c2.row(5));
  n2.row(0).swap(n2.row(5));
  c2.row(8).swap(c2.row(10));
  n2.row(8).swap(n2.row(10));
  const Matrix a = fnet_forward(w, 1, Tensor::constant(c), Tensor::constant(n), l).value();
  const Matrix b = fnet_forward(w, 1, Tensor::constant(c2), Tensor::constant(n2), l).value();
  EXPECT_EQ(a, b);
}

TEST(Blocks, PaddedRowsStayZero)
{
  ModelWeights w = ModelWeights::initialize(small_config(), 12);
  Rng rng(13);
  const BlockLayout l = two_blocks();
  const Matrix feats = refnet_forward(w, 1, Tensor::constant(random_matrix(rng, 2, 3)),
                                      Tensor::constant(random_matrix(rng, 16, 3)), l)
                           .value();
  const Matrix out = reconnet_forward(w, Tensor::constant(feats), l, true).value();
  for (int r = 11; r < 16; ++r) {
    EXPECT_EQ(feats.row(r), Matrix::Zero(1, feats.cols()));
    EXPECT_EQ(out.row(r), Matrix::Zero(1, 3));
  }
  EXPECT_GE(out.minCoeff(), 0.0);
  EXPECT_LE(out.maxCoeff(), 255.0);
}

TEST(Blocks, LayerIndexChecked)
{
  ModelWeights w = ModelWeights::initialize(small_config(), 1);
  const Tensor z = Tensor::constant(Matrix::Zero(1, 2));
  EXPECT_THROW(layer_adapter(w, 0, z), Error);
  EXPECT_THROW(layer_adapter(w, 3, z), Error);
}

//============================================================================
// Weights and optimizer.

TEST(Weights, InitializationIsSeeded)
{
  const auto a = ModelWeights::initialize(small_config(), 5);
  const auto b = ModelWeights::initialize(small_config(), 5);
  const auto c = ModelWeights::initialize(small_config(), 6);
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_NE(a.hash(), c.hash());
}

TEST(Weights, SerializeRoundTrip)
{
  auto a = ModelWeights::initialize(small_config(), 5);
  a.round_to_float();
  const auto bytes = a.serialize();
  const auto b = ModelWeights::deserialize(bytes);
  EXPECT_EQ(b.config(), a.config());
  EXPECT_EQ(b.hash(), a.hash());
  EXPECT_EQ(b.serialize(), bytes);
  for (const auto& [name, t] : a.params())
    EXPECT_EQ(b.at(name).value(), t.value()) << name;
}

TEST(Weights, CorruptionIsDetected)
{
  auto bytes = ModelWeights::initialize(small_config(), 5).serialize();
  bytes[bytes.size() / 2] ^= 0x40;
  EXPECT_THROW(ModelWeights::deserialize(bytes), Error);
  bytes.resize(bytes.size() / 3);
  EXPECT_THROW(ModelWeights::deserialize(bytes), Error);
}

TEST(Weights, MissingParameterThrows)
{
  const auto w = ModelWeights::initialize(small_config(), 5);
  EXPECT_THROW(w.at("fnet9.head.w"), Error);
}

TEST(Adam, FirstStepMovesByLearningRate)
{
  auto w = ModelWeights::initialize(small_config(), 5);
  const Matrix before = w.at("recon.head.b").value();
  sum(w.at("recon.head.b")).backward();
  AdamState s;
  adam_step(w, s, 0.01);
  const Matrix after = w.at("recon.head.b").value();
  for (Eigen::Index i = 0; i < before.size(); ++i)
    EXPECT_NEAR(after.data()[i], before.data()[i] - 0.01, 1e-9);
  EXPECT_EQ(w.at("recon.head.b").grad(), Matrix::Zero(before.rows(), before.cols()));
  EXPECT_EQ(s.step, 1u);
}

TEST(Adam, MinimizesQuadratic)
{
  auto w = ModelWeights::initialize(small_config(), 5);
  AdamState s;
  Tensor& p = w.at("hyper.prior.mean");
  for (int k = 0; k < 2000; ++k) {
    const Tensor d = add_scalar(p, -3.0);
    sum(hadamard(d, d)).backward();
    adam_step(w, s, 0.05);
  }
  EXPECT_LT((p.value().array() - 3.0).abs().maxCoeff(), 1e-3);
}

}  // namespace
}  // namespace spac::nn
