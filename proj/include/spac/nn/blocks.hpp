// Copyright 2026 The spac Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "spac/nn/model.hpp"
#include "spac/nn/ops.hpp"
#include "spac/rng.hpp"

namespace spac::nn {

// out_i = x_i Ws + mean_{j != i}(x_j) Wn + b, with padded rows held at zero.
// Parameters: <prefix>.self, <prefix>.neigh, <prefix>.bias
Tensor neighbor_conv(const ModelWeights& w, const std::string& prefix, const Tensor& x, const BlockLayout& layout);

// out = x + relu((x - attn(x)) Wo + bo); attention is per block over valid
// slots with bias-free query/key/value projections.
// Parameters: <prefix>.q, .k, .v, .o, .o_bias
Tensor offset_attention(const ModelWeights& w, const std::string& prefix, const Tensor& x, const BlockLayout& layout);

// out = x + conv_b(relu(conv_a([x, normals]))).
// Parameters: <prefix>.a.*, <prefix>.b.*
Tensor geometry_refine(const ModelWeights& w, const std::string& prefix, const Tensor& x, const Tensor& normals,
                       const BlockLayout& layout);

// Analysis network of one layer: colours (0..255) -> one latent row per
// block.
Tensor fnet_forward(const ModelWeights& w, int layer, const Tensor& colors, const Tensor& normals,
                    const BlockLayout& layout);

// Synthesis network of one layer: latent rows -> per-slot features.
// rel_pos is each slot's offset from its block centroid in units of the
// block cell edge; it modulates the broadcast latent multiplicatively.
Tensor refnet_forward(const ModelWeights& w, int layer, const Tensor& latents, const Tensor& rel_pos,
                      const BlockLayout& layout);

// Shared colour head: per-slot features -> colours in 8-bit units.  With
// clamp_output the result is clipped to [0, 255] (inference only).
Tensor reconnet_forward(const ModelWeights& w, const Tensor& features, const BlockLayout& layout, bool clamp_output);

// Base-layer latents -> 1 x hyper_dim.
Tensor hyper_encode(const ModelWeights& w, const Tensor& base_latents);
// Quantized hyper latent -> 1 x width.
Tensor hyper_decode(const ModelWeights& w, const Tensor& z);
// Hyper features -> 1 x latent_dim for one layer.
Tensor layer_adapter(const ModelWeights& w, int layer, const Tensor& hyper_features);

// Per-row entropy parameters for one latent row.
struct RowParams {
  Tensor mu;
  Tensor scale;
  Tensor delta;
};

// context_input is the flattened window of previous decoded rows
// (1 x context_rows * latent_dim), newest first.
Tensor context_features(const ModelWeights& w, int layer, const Tensor& context_input);
RowParams param_head(const ModelWeights& w, int layer, const Tensor& context, const Tensor& adapter);
Tensor hsq_delta(const ModelWeights& w, int layer, const Tensor& context, const Tensor& adapter);

inline constexpr double kScaleMin = 1e-6;
inline constexpr double kScaleMax = 1e3;

// delta * round(y / delta), ties to even.  Throws if any step is <= 0.
Matrix quantize_test(const Matrix& y, const Matrix& delta);
// y + u, u ~ Uniform(-delta/2, delta/2) drawn from rng.
Tensor quantize_train(const Tensor& y, const Tensor& delta, Rng& rng);

// Factorized Gaussian prior over the hyper latent: per-channel mean and
// scale (1 x hyper_dim each).
struct HyperPrior {
  Tensor mean;
  Tensor scale;
};
HyperPrior hyper_prior(const ModelWeights& w);

}  // namespace spac::nn
