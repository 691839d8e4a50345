// Copyright 2026 The spac Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <span>
#include <vector>

#include "spac/cloud.hpp"
#include "spac/nn/model.hpp"
#include "spac/nn/ops.hpp"

namespace spac::codec {

// Network-ready view of one layer's point set: patches cut into octree
// blocks, one row per block slot.
struct LayerInput {
  nn::BlockLayout layout;
  std::vector<std::size_t> slot_point;    // row -> index into the layer set
  std::vector<std::size_t> patch_blocks;  // block offset of each patch, plus the total
  nn::Matrix colors;                      // rows x 3, 8-bit units
  nn::Matrix normals;                     // rows x 3
  nn::Matrix rel_pos;                     // rows x 3, (p - centroid) / cell edge
  std::size_t points = 0;

  std::size_t blocks() const { return layout.blocks; }
  std::size_t patches() const { return patch_blocks.empty() ? 0 : patch_blocks.size() - 1; }
};

// normals[i] belongs to set point i.  Colours are copied as they are (the
// decoder passes zeros).
LayerInput prepare_layer(const PointCloud& set, std::span<const std::array<double, 3>> normals);

// Rows of one patch as a standalone input.
LayerInput patch_slice(const LayerInput& in, std::size_t patch);

// Analysis network over every patch; nb x latent_dim.  Patches are
// independent work items.
nn::Matrix analyze_layer(const nn::ModelWeights& w, int layer, const LayerInput& in, int threads);

// Synthesis and colour head over every patch from decoded latent rows;
// returns one colour per set point (clamped to [0, 255], unrounded).
std::vector<Color> synthesize_layer(const nn::ModelWeights& w, int layer, const nn::Matrix& latents,
                                    const LayerInput& in, int threads);

}  // namespace spac::codec
