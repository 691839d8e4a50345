// Copyright 2026 The spac Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "spac/codec/codec.hpp"
#include "spac/eval/metrics.hpp"

namespace spac::codec {

// One operating point of a progressive stream: the prefix ending at `layer`.
struct LayerRD {
  int layer = 1;
  std::size_t bytes = 0;    // prefix length
  double bpp = 0.0;         // bytes * 8 / |P_1|
  std::size_t points = 0;   // points reconstructed by the prefix
  eval::YuvPsnr psnr;       // over those points, against the input
};

// Encodes once and evaluates every prefix, base layer first.
std::vector<LayerRD> rd_points(const PointCloud& pc, const nn::ModelWeights& w, const CodecOptions& options);

LayerRD rd_point(const PointCloud& pc, const nn::ModelWeights& w, const CodecOptions& options, int upto_layer);

}  // namespace spac::codec
