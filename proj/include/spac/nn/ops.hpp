// Copyright 2026 The spac Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "spac/nn/tensor.hpp"

namespace spac::nn {

inline constexpr int kBlockWidth = 8;

// Row layout of block-structured features: block b owns rows
// [8b, 8b + 8); valid marks the real (unpadded) slots.
struct BlockLayout {
  std::size_t blocks = 0;
  std::vector<uint8_t> valid;

  std::size_t rows() const { return blocks * kBlockWidth; }
  int count(std::size_t block) const;
  static BlockLayout full(std::size_t blocks);
};

//============================================================================
// Elementwise and linear algebra.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor add_bias(const Tensor& a, const Tensor& bias);  // bias: 1 x cols
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor exp(const Tensor& a);
// Values outside [lo, hi] are clipped and pass no gradient.
Tensor clamp(const Tensor& a, double lo, double hi);

//============================================================================
// Shape manipulation and reductions.

Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor slice_cols(const Tensor& a, Eigen::Index start, Eigen::Index count);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor slice_rows(const Tensor& a, Eigen::Index start, Eigen::Index count);
Tensor concat_rows(std::span<const Tensor> rows);
Tensor repeat_rows(const Tensor& row, Eigen::Index n);
Tensor row_mean(const Tensor& a);  // 1 x cols
Tensor sum(const Tensor& a);       // 1 x 1
Tensor mean(const Tensor& a);      // 1 x 1

//============================================================================
// Block-structured operators.

// Zero the padded rows.
Tensor mask_rows(const Tensor& x, const BlockLayout& layout);

// out_i = mean of x_j over the other valid slots j of the same block (zero
// when there is none).  Padded output rows are zero.
Tensor neighbor_mean(const Tensor& x, const BlockLayout& layout);

// Per-block scaled dot-product attention over valid slots.
//
// Reduction order: every sum over the slots of a block (here, in
// neighbor_mean and in masked_pool) runs over the valid slots sorted
// lexicographically by row contents (keys, then values, for attention).
// A permutation of the slots therefore permutes the output bit for bit.
Tensor block_attention(const Tensor& q, const Tensor& k, const Tensor& v, const BlockLayout& layout);

// blocks x cols mean over valid slots.
Tensor masked_pool(const Tensor& x, const BlockLayout& layout);

// rows() x cols copy of each block row into its valid slots.
Tensor broadcast_blocks(const Tensor& y, const BlockLayout& layout);

//============================================================================
// Likelihoods, in bits.

// Probability floor used by the training-time likelihoods.
inline constexpr double kLikelihoodFloor = 1e-9;

// -log2 of the Laplace(mu, b) mass on [y - delta/2, y + delta/2].
Tensor laplace_bits(const Tensor& y, const Tensor& mu, const Tensor& b, const Tensor& delta);

// -log2 of the Gaussian(mu, sigma) mass on [z - 1/2, z + 1/2].
Tensor gaussian_bits(const Tensor& z, const Tensor& mu, const Tensor& sigma);

// delta * round(y / delta) forward; identity gradient to y, round(y / delta)
// to delta.
Tensor straight_through_quantize(const Tensor& y, const Tensor& delta);

}  // namespace spac::nn
