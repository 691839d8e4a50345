// Copyright 2026 The spac Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "spac/cloud.hpp"
#include "spac/codec/bitstream.hpp"
#include "spac/codec/layer_input.hpp"
#include "spac/entropy/context.hpp"
#include "spac/freq_sampler.hpp"
#include "spac/layer_pyramid.hpp"
#include "spac/nn/model.hpp"

namespace spac::codec {

struct CodecOptions {
  GroupSpec spec;
  int num_layers = kDefaultLayers;
  int lambda_index = 0;
  int threads = 1;
  // Debug: when positive, every quantization step is this value instead of
  // the learned one (encoder and decoder must agree).
  double fixed_delta = 0.0;
};

//============================================================================
// Layer membership.

// Masks over the canonical order, layer L first.  Layer L is coded over
// every point, layer l < L over the points not claimed by layers above it;
// layer 1 is implied.  One adaptive binary model per layer.
std::vector<uint8_t> membership_encode(const std::vector<std::vector<uint8_t>>& masks);
std::vector<std::vector<uint8_t>> membership_decode(std::span<const uint8_t> bytes, std::size_t points,
                                                    int num_layers);

//============================================================================
// Latent entropy coding.  Encoder and decoder both derive every row's
// parameters through latent_row_params, so their steps agree bit for bit.

struct LatentRowParams {
  nn::RowVector mu;
  nn::RowVector scale;
  nn::RowVector delta;
};

LatentRowParams latent_row_params(const nn::ModelWeights& w, int layer, const nn::RowVector& window_input,
                                  const nn::RowVector& adapter, double fixed_delta = 0.0);

// Per-layer adapters from the quantized hyper latent (1 x hyper_dim).
std::vector<nn::RowVector> layer_adapters(const nn::ModelWeights& w, const nn::RowVector& z_hat);

struct LatentCoding {
  std::vector<uint8_t> bytes;
  nn::Matrix dequantized;  // the rows the decoder will see
  double estimated_bits = 0.0;
};

LatentCoding encode_latents(const nn::ModelWeights& w, int layer, const nn::Matrix& latents,
                            const nn::RowVector& adapter, double fixed_delta = 0.0);
nn::Matrix decode_latents(std::span<const uint8_t> bytes, const nn::ModelWeights& w, int layer, std::size_t rows,
                          const nn::RowVector& adapter, double fixed_delta = 0.0);

//============================================================================

struct EncodeResult {
  std::vector<uint8_t> bytes;
  LayerStack stack;
  std::vector<nn::Matrix> latents;      // [l - 1], dequantized; empty for empty layers
  nn::RowVector z_hat;
  std::size_t header_bytes = 0;
  std::size_t mask_bytes = 0;           // chunk bytes including the length prefix
  std::size_t hyper_bytes = 0;
  std::vector<std::size_t> latent_bytes;  // [l - 1]
};

EncodeResult encode(const PointCloud& pc, const nn::ModelWeights& w, const CodecOptions& options);

struct DecodeResult {
  PointCloud cloud;                 // layers >= upto_layer, in `geometry` order
  std::vector<nn::Matrix> latents;  // [l - 1]; empty below upto_layer
  std::vector<std::vector<std::size_t>> sources;  // per layer, indices into `geometry`
  int upto_layer = 1;
};

// `geometry` supplies the full cloud geometry (its colours are ignored).
DecodeResult decode(std::span<const uint8_t> bytes, const PointCloud& geometry, const nn::ModelWeights& w,
                    int upto_layer, int threads = 1, double fixed_delta = 0.0);

// Layer inputs for every layer of a stack, with normals from the full cloud.
std::vector<LayerInput> prepare_layers(const PointCloud& full, const std::vector<std::vector<std::size_t>>& sources,
                                       const std::vector<PointCloud>& sets);

}  // namespace spac::codec
