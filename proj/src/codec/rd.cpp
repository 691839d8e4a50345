// Copyright 2026 The spac Authors
// SPDX-License-Identifier: Apache-2.0

#include "spac/codec/rd.hpp"

#include <algorithm>

#include "spac/error.hpp"

namespace spac::codec {
namespace {

LayerRD
measure(const PointCloud& pc, const nn::ModelWeights& w, const CodecOptions& options,
        const std::vector<uint8_t>& stream, int layer)
{
  const std::vector<uint8_t> prefix = truncate_to_layer(stream, layer);
  const DecodeResult dec = decode(prefix, pc, w, layer, options.threads, options.fixed_delta);
  std::vector<std::size_t> covered;
  for (int k = layer; k <= int(dec.sources.size()); ++k)
    covered.insert(covered.end(), dec.sources[std::size_t(k - 1)].begin(), dec.sources[std::size_t(k - 1)].end());
  std::sort(covered.begin(), covered.end());

  LayerRD r;
  r.layer = layer;
  r.bytes = prefix.size();
  r.bpp = pc.empty() ? 0.0 : double(prefix.size()) * 8.0 / double(pc.size());
  r.points = covered.size();
  r.psnr = eval::psnr_yuv(map_attributes(pc, covered), dec.cloud);
  return r;
}

}  // namespace

std::vector<LayerRD>
rd_points(const PointCloud& pc, const nn::ModelWeights& w, const CodecOptions& options)
{
  const EncodeResult enc = encode(pc, w, options);
  std::vector<LayerRD> out;
  for (int l = options.num_layers; l >= 1; --l)
    out.push_back(measure(pc, w, options, enc.bytes, l));
  return out;
}

LayerRD
rd_point(const PointCloud& pc, const nn::ModelWeights& w, const CodecOptions& options, int upto_layer)
{
  if (upto_layer < 1 || upto_layer > options.num_layers)
    fail(ErrorCode::kOutOfRange, "upto layer " + std::to_string(upto_layer) + " outside [1, " +
                                     std::to_string(options.num_layers) + "]");
  const EncodeResult enc = encode(pc, w, options);
  return measure(pc, w, options, enc.bytes, upto_layer);
}

}  // namespace spac::codec
