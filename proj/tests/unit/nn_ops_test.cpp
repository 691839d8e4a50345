// Copyright 2026 The spac Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "spac/error.hpp"
#include "spac/nn/ops.hpp"
#include "support.hpp"

namespace spac::nn {
namespace {

using testing::gradient_error;
using testing::random_matrix;

constexpr double kGradTol = 1e-3;

// Three blocks: full, five valid, one valid.
BlockLayout
mixed_layout()
{
  BlockLayout l;
  l.blocks = 3;
  l.valid.assign(24, 1);
  for (int s = 5; s < 8; ++s)
    l.valid[8 + std::size_t(s)] = 0;
  for (int s = 1; s < 8; ++s)
    l.valid[16 + std::size_t(s)] = 0;
  return l;
}

// Weighted sum so every output entry matters.
Tensor
probe(const Tensor& out, const Matrix& weights)
{
  return sum(hadamard(out, Tensor::constant(weights)));
}

TEST(Autodiff, SquareAtThree)
{
  Tensor x = Tensor::parameter(Matrix::Constant(1, 1, 3.0));
  sum(hadamard(x, x)).backward();
  EXPECT_DOUBLE_EQ(x.grad()(0, 0), 6.0);
}

TEST(Autodiff, UnusedParameterHasZeroGrad)
{
  Tensor x = Tensor::parameter(Matrix::Constant(2, 2, 1.0));
  Tensor y = Tensor::parameter(Matrix::Constant(2, 2, 1.0));
  sum(x).backward();
  EXPECT_EQ(y.grad(), Matrix::Zero(2, 2));
}

TEST(Autodiff, NonFiniteLossThrows)
{
  Tensor x = Tensor::parameter(Matrix::Constant(1, 1, 1000.0));
  EXPECT_THROW(sum(exp(x)).backward(), Error);
}

TEST(Autodiff, NoGradGuardRecordsNothing)
{
  Tensor x = Tensor::parameter(Matrix::Constant(2, 2, 1.0));
  Tensor y;
  {
    NoGradGuard guard;
    y = sum(hadamard(x, x));
  }
  EXPECT_FALSE(y.requires_grad());
  EXPECT_TRUE(grad_enabled());
}

//============================================================================
// Elementwise gradients.

struct UnaryCase {
  const char* name;
  std::function<Tensor(const Tensor&)> fn;
};

TEST(Gradients, UnaryAndBinaryOps)
{
  Rng rng(1);
  const Matrix w = random_matrix(rng, 5, 4);
  Tensor a = Tensor::parameter(random_matrix(rng, 5, 4));
  Tensor b = Tensor::parameter(random_matrix(rng, 5, 4, 0.5, 2.0));
  Tensor m = Tensor::parameter(random_matrix(rng, 4, 3));
  Tensor bias = Tensor::parameter(random_matrix(rng, 1, 4));
  const Matrix w3 = random_matrix(rng, 5, 3);
  const std::vector<UnaryCase> cases = {
      {"add", [&](const Tensor& x) { return probe(add(x, b), w); }},
      {"sub", [&](const Tensor& x) { return probe(sub(b, x), w); }},
      {"hadamard", [&](const Tensor& x) { return probe(hadamard(x, b), w); }},
      {"add_bias", [&](const Tensor& x) { return probe(add_bias(x, bias), w); }},
      {"scale", [&](const Tensor& x) { return probe(scale(x, -2.5), w); }},
      {"add_scalar", [&](const Tensor& x) { return probe(add_scalar(x, 1.5), w); }},
      {"relu", [&](const Tensor& x) { return probe(relu(x), w); }},
      {"sigmoid", [&](const Tensor& x) { return probe(sigmoid(x), w); }},
      {"exp", [&](const Tensor& x) { return probe(exp(x), w); }},
      {"clamp", [&](const Tensor& x) { return probe(clamp(x, -0.5, 0.5), w); }},
      {"matmul", [&](const Tensor& x) { return probe(matmul(x, m), w3); }},
      {"row_mean", [&](const Tensor& x) { return probe(row_mean(x), w.topRows(1)); }},
      {"mean", [&](const Tensor& x) { return mean(hadamard(x, x)); }},
      {"slice_cols", [&](const Tensor& x) { return probe(slice_cols(x, 1, 2), w.middleCols(0, 2)); }},
      {"slice_rows", [&](const Tensor& x) { return probe(slice_rows(x, 2, 3), w.middleRows(0, 3)); }},
      {"concat_cols", [&](const Tensor& x) { return probe(concat_cols(x, hadamard(x, x)), Matrix::Ones(5, 8)); }},
      {"concat_rows",
       [&](const Tensor& x) {
         std::vector<Tensor> parts{x, scale(x, 2.0)};
         return probe(concat_rows(parts), Matrix::Ones(10, 4));
       }},
      {"repeat_rows", [&](const Tensor& x) { return probe(repeat_rows(slice_rows(x, 1, 1), 5), w); }},
  };
  for (const auto& c : cases) {
    EXPECT_LT(gradient_error(a, [&] { return c.fn(a); }), kGradTol) << c.name;
  }
  // Second operands too.
  EXPECT_LT(gradient_error(b, [&] { return probe(hadamard(a, b), w); }), kGradTol);
  EXPECT_LT(gradient_error(m, [&] { return probe(matmul(a, m), w3); }), kGradTol);
  EXPECT_LT(gradient_error(bias, [&] { return probe(add_bias(a, bias), w); }), kGradTol);
}

TEST(Gradients, BlockOps)
{
  Rng rng(2);
  const BlockLayout layout = mixed_layout();
  const Matrix w = random_matrix(rng, 24, 6);
  Tensor x = Tensor::parameter(random_matrix(rng, 24, 6));
  Tensor k = Tensor::parameter(random_matrix(rng, 24, 6));
  Tensor v = Tensor::parameter(random_matrix(rng, 24, 6));
  Tensor rows = Tensor::parameter(random_matrix(rng, 3, 6));
  EXPECT_LT(gradient_error(x, [&] { return probe(mask_rows(x, layout), w); }), kGradTol);
  EXPECT_LT(gradient_error(x, [&] { return probe(neighbor_mean(x, layout), w); }), kGradTol);
  EXPECT_LT(gradient_error(x, [&] { return probe(masked_pool(x, layout), w.topRows(3)); }), kGradTol);
  EXPECT_LT(gradient_error(rows, [&] { return probe(broadcast_blocks(rows, layout), w); }), kGradTol);
  EXPECT_LT(gradient_error(x, [&] { return probe(block_attention(x, k, v, layout), w); }), kGradTol);
  EXPECT_LT(gradient_error(k, [&] { return probe(block_attention(x, k, v, layout), w); }), kGradTol);
  EXPECT_LT(gradient_error(v, [&] { return probe(block_attention(x, k, v, layout), w); }), kGradTol);
}

TEST(Gradients, Likelihoods)
{
  Rng rng(3);
  Tensor y = Tensor::parameter(random_matrix(rng, 4, 5, -3, 3));
  Tensor mu = Tensor::parameter(random_matrix(rng, 4, 5, -1, 1));
  Tensor b = Tensor::parameter(random_matrix(rng, 4, 5, 0.3, 2.0));
  Tensor d = Tensor::parameter(random_matrix(rng, 4, 5, 0.2, 1.5));
  auto lap = [&] { return sum(laplace_bits(y, mu, b, d)); };
  for (Tensor* t : {&y, &mu, &b, &d})
    EXPECT_LT(gradient_error(*t, lap), kGradTol);
  Tensor z = Tensor::parameter(random_matrix(rng, 1, 6, -4, 4));
  Tensor zm = Tensor::parameter(random_matrix(rng, 1, 6, -1, 1));
  Tensor zs = Tensor::parameter(random_matrix(rng, 1, 6, 0.5, 3));
  auto gau = [&] { return sum(gaussian_bits(z, zm, zs)); };
  for (Tensor* t : {&z, &zm, &zs})
    EXPECT_LT(gradient_error(*t, gau), kGradTol);
}

TEST(Likelihoods, MatchAnalyticMass)
{
  auto bits = [](double y, double mu, double b, double d) {
    return laplace_bits(Tensor::constant(Matrix::Constant(1, 1, y)), Tensor::constant(Matrix::Constant(1, 1, mu)),
                        Tensor::constant(Matrix::Constant(1, 1, b)), Tensor::constant(Matrix::Constant(1, 1, d)))
        .item();
  };
  EXPECT_NEAR(bits(0, 0, 1, 1), -std::log2(1 - std::exp(-0.5)), 1e-12);
  const double p = 0.5 * (std::exp(-1.5) - std::exp(-2.5));
  EXPECT_NEAR(bits(2, 0, 1, 1), -std::log2(p), 1e-12);
  EXPECT_NEAR(bits(-2, 0, 1, 1), -std::log2(p), 1e-12);
  // Far tails hit the floor.
  EXPECT_NEAR(bits(1000, 0, 0.01, 1), -std::log2(kLikelihoodFloor), 1e-9);
}

TEST(StraightThrough, ForwardRoundsBackwardPasses)
{
  Tensor y = Tensor::parameter((Matrix(1, 3) << 1.3, -0.26, 0.5).finished());
  Tensor d = Tensor::parameter((Matrix(1, 3) << 0.5, 0.5, 1.0).finished());
  Tensor q = straight_through_quantize(y, d);
  EXPECT_DOUBLE_EQ(q.value()(0, 0), 1.5);
  EXPECT_DOUBLE_EQ(q.value()(0, 1), -0.5);
  EXPECT_DOUBLE_EQ(q.value()(0, 2), 0.0);
  sum(q).backward();
  EXPECT_EQ(y.grad(), Matrix::Ones(1, 3));
  EXPECT_EQ(d.grad(), (Matrix(1, 3) << 3.0, -1.0, 0.0).finished());
}

//============================================================================
// Scalar oracles for the block operators.

Matrix
naive_neighbor_mean(const Matrix& x, const BlockLayout& l)
{
  Matrix out = Matrix::Zero(x.rows(), x.cols());
  for (std::size_t b = 0; b < l.blocks; ++b)
    for (int i = 0; i < 8; ++i) {
      const std::size_t ri = b * 8 + std::size_t(i);
      if (!l.valid[ri])
        continue;
      int n = 0;
      for (int j = 0; j < 8; ++j) {
        const std::size_t rj = b * 8 + std::size_t(j);
        if (j == i || !l.valid[rj])
          continue;
        ++n;
        for (Eigen::Index c = 0; c < x.cols(); ++c)
          out(Eigen::Index(ri), c) += x(Eigen::Index(rj), c);
      }
      if (n > 0)
        for (Eigen::Index c = 0; c < x.cols(); ++c)
          out(Eigen::Index(ri), c) /= n;
    }
  return out;
}

Matrix
naive_attention(const Matrix& q, const Matrix& k, const Matrix& v, const BlockLayout& l)
{
  Matrix out = Matrix::Zero(q.rows(), v.cols());
  const double s = 1.0 / std::sqrt(double(q.cols()));
  for (std::size_t b = 0; b < l.blocks; ++b)
    for (int i = 0; i < 8; ++i) {
      const auto ri = Eigen::Index(b * 8 + std::size_t(i));
      if (!l.valid[std::size_t(ri)])
        continue;
      std::vector<double> e(8, 0.0);
      double z = 0.0, mx = -1e300;
      for (int j = 0; j < 8; ++j) {
        const auto rj = Eigen::Index(b * 8 + std::size_t(j));
        if (!l.valid[std::size_t(rj)])
          continue;
        double dot = 0.0;
        for (Eigen::Index c = 0; c < q.cols(); ++c)
          dot += q(ri, c) * k(rj, c);
        e[std::size_t(j)] = dot * s;
        mx = std::max(mx, e[std::size_t(j)]);
      }
      for (int j = 0; j < 8; ++j)
        if (l.valid[b * 8 + std::size_t(j)]) {
          e[std::size_t(j)] = std::exp(e[std::size_t(j)] - mx);
          z += e[std::size_t(j)];
        }
      for (int j = 0; j < 8; ++j) {
        const auto rj = Eigen::Index(b * 8 + std::size_t(j));
        if (!l.valid[std::size_t(rj)])
          continue;
        for (Eigen::Index c = 0; c < v.cols(); ++c)
          out(ri, c) += e[std::size_t(j)] / z * v(rj, c);
      }
    }
  return out;
}

TEST(BlockOps, NeighborMeanMatchesLoop)
{
  Rng rng(4);
  const BlockLayout l = mixed_layout();
  const Matrix x = random_matrix(rng, 24, 7);
  EXPECT_LE((neighbor_mean(Tensor::constant(x), l).value() - naive_neighbor_mean(x, l)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(BlockOps, AttentionMatchesLoop)
{
  Rng rng(5);
  const BlockLayout l = mixed_layout();
  const Matrix q = random_matrix(rng, 24, 32), k = random_matrix(rng, 24, 32), v = random_matrix(rng, 24, 32);
  const Matrix got = block_attention(Tensor::constant(q), Tensor::constant(k), Tensor::constant(v), l).value();
  EXPECT_LE((got - naive_attention(q, k, v, l)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(BlockOps, PoolAndBroadcast)
{
  Rng rng(6);
  const BlockLayout l = mixed_layout();
  const Matrix x = random_matrix(rng, 24, 3);
  const Matrix pooled = masked_pool(Tensor::constant(x), l).value();
  EXPECT_NEAR(pooled(2, 1), x(16, 1), 1e-15);
  EXPECT_NEAR(pooled(1, 0), x.middleRows(8, 5).col(0).mean(), 1e-12);
  const Matrix bc = broadcast_blocks(Tensor::constant(pooled), l).value();
  EXPECT_EQ(bc.row(9), pooled.row(1));
  EXPECT_EQ(bc.row(14), Matrix::Zero(1, 3));
}

TEST(BlockOps, PermutationEquivarianceIsBitwise)
{
  Rng rng(7);
  const BlockLayout l = BlockLayout::full(4);
  const Matrix q = random_matrix(rng, 32, 16), k = random_matrix(rng, 32, 16), v = random_matrix(rng, 32, 16);
  std::vector<int> perm = {3, 0, 7, 5, 1, 6, 2, 4};
  auto permute = [&](const Matrix& m) {
    Matrix p(m.rows(), m.cols());
    for (int b = 0; b < 4; ++b)
      for (int s = 0; s < 8; ++s)
        p.row(b * 8 + s) = m.row(b * 8 + perm[std::size_t(s)]);
    return p;
  };
  const Matrix a = block_attention(Tensor::constant(q), Tensor::constant(k), Tensor::constant(v), l).value();
  const Matrix b =
      block_attention(Tensor::constant(permute(q)), Tensor::constant(permute(k)), Tensor::constant(permute(v)), l)
          .value();
  EXPECT_EQ(permute(a), b);
  EXPECT_EQ(permute(neighbor_mean(Tensor::constant(q), l).value()), neighbor_mean(Tensor::constant(permute(q)), l).value());
  EXPECT_EQ(masked_pool(Tensor::constant(q), l).value(), masked_pool(Tensor::constant(permute(q)), l).value());
}

TEST(BlockOps, SingletonAttentionReturnsValue)
{
  Rng rng(8);
  BlockLayout l;
  l.blocks = 1;
  l.valid = {1, 0, 0, 0, 0, 0, 0, 0};
  const Matrix q = random_matrix(rng, 8, 4), k = random_matrix(rng, 8, 4), v = random_matrix(rng, 8, 4);
  const Matrix got = block_attention(Tensor::constant(q), Tensor::constant(k), Tensor::constant(v), l).value();
  EXPECT_EQ(got.row(0), v.row(0));
}

TEST(Shapes, MismatchThrows)
{
  Tensor a = Tensor::constant(Matrix::Zero(2, 3));
  Tensor b = Tensor::constant(Matrix::Zero(3, 2));
  EXPECT_THROW(add(a, b), Error);
  EXPECT_THROW(matmul(a, a), Error);
  EXPECT_THROW(mask_rows(a, mixed_layout()), Error);
}

}  // namespace
}  // namespace spac::nn
