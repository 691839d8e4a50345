// Copyright 2026 The spac Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "spac/cloud.hpp"
#include "spac/freq_sampler.hpp"

namespace spac {

inline constexpr int kDefaultLayers = 4;
inline constexpr int kMaxLayers = 6;

// Layered decomposition of a cloud P_1.  Layer l < L holds the residual
// P_l minus P_{l+1}; layer L holds the base P_L.  Each layer keeps the
// indices of its points in P_1 (ascending), so the layers partition P_1.
struct LayerStack {
  int num_layers = 0;
  std::vector<PointCloud> sets;                   // sets[l - 1]
  std::vector<std::vector<std::size_t>> sources;  // sources[l - 1], indices into P_1
  // First layer whose sampled set came out empty, or 0 when every sampling
  // pass selected something.  Layers >= this value are empty.
  int exhausted_from = 0;
  // P_1 in canonical Morton order, and per layer a membership bitmap over
  // that order.
  std::vector<std::size_t> canonical_order;
  std::vector<std::vector<uint8_t>> masks;
  int bitdepth = 10;
  ColorSpace colorspace = ColorSpace::kRGB8;

  const PointCloud& layer(int l) const { return sets.at(l - 1); }
  const PointCloud& base() const { return sets.back(); }
  std::size_t total_points() const;
};

LayerStack decompose(const PointCloud& pc, int num_layers, const GroupSpec& spec, int threads = 1);

// Base plus the residuals of layers >= upto_layer, in P_1 order.
PointCloud recompose(const LayerStack& stack, int upto_layer);

// Per-layer membership bitmaps over the canonical order of a cloud with
// `count` points, derived from the layer sources.
std::vector<std::vector<uint8_t>> membership_masks(const std::vector<std::vector<std::size_t>>& sources,
                                                   const std::vector<std::size_t>& canonical_order);

// Inverse of membership_masks.  Throws kNotASubset unless the masks are a
// partition.
std::vector<std::vector<std::size_t>> sources_from_masks(const std::vector<std::vector<uint8_t>>& masks,
                                                         const std::vector<std::size_t>& canonical_order);

}  // namespace spac
