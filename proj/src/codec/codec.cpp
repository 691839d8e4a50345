// Copyright 2026 The spac Authors
// SPDX-License-Identifier: Apache-2.0

#include "spac/codec/codec.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "spac/entropy/models.hpp"
#include "spac/entropy/range_coder.hpp"
#include "spac/error.hpp"
#include "spac/morton.hpp"
#include "spac/nn/blocks.hpp"
#include "spac/parallel.hpp"

namespace spac::codec {

using entropy::AdaptiveBit;
using entropy::RangeDecoder;
using entropy::RangeEncoder;

std::vector<uint8_t>
membership_encode(const std::vector<std::vector<uint8_t>>& masks)
{
  if (masks.empty())
    fail(ErrorCode::kInvalidArgument, "membership_encode: no layers");
  const std::size_t n = masks[0].size();
  std::vector<uint8_t> claimed(n, 0);
  for (const auto& m : masks)
    if (m.size() != n)
      fail(ErrorCode::kNotASubset, "membership_encode: mask lengths differ");
  for (std::size_t k = 0; k < n; ++k) {
    int owners = 0;
    for (const auto& m : masks)
      owners += m[k] ? 1 : 0;
    if (owners != 1)
      fail(ErrorCode::kNotASubset, "membership_encode: masks are not a partition");
  }
  RangeEncoder enc;
  const int L = int(masks.size());
  for (int l = L; l >= 2; --l) {
    AdaptiveBit model;
    const auto& m = masks[std::size_t(l - 1)];
    for (std::size_t k = 0; k < n; ++k) {
      if (claimed[k])
        continue;
      model.encode(enc, m[k]);
      claimed[k] = m[k];
    }
  }
  return enc.finish();
}

std::vector<std::vector<uint8_t>>
membership_decode(std::span<const uint8_t> bytes, std::size_t points, int num_layers)
{
  RangeDecoder dec(bytes);
  std::vector<std::vector<uint8_t>> masks(std::size_t(num_layers), std::vector<uint8_t>(points, 0));
  std::vector<uint8_t> claimed(points, 0);
  for (int l = num_layers; l >= 2; --l) {
    AdaptiveBit model;
    auto& m = masks[std::size_t(l - 1)];
    for (std::size_t k = 0; k < points; ++k) {
      if (claimed[k])
        continue;
      m[k] = uint8_t(model.decode(dec));
      claimed[k] = m[k];
    }
  }
  for (std::size_t k = 0; k < points; ++k)
    masks[0][k] = claimed[k] ? 0 : 1;
  return masks;
}

//============================================================================

LatentRowParams
latent_row_params(const nn::ModelWeights& w, int layer, const nn::RowVector& window_input,
                  const nn::RowVector& adapter, double fixed_delta)
{
  nn::NoGradGuard guard;
  const nn::Tensor ctx = nn::context_features(w, layer, nn::Tensor::constant(window_input));
  const nn::RowParams p = nn::param_head(w, layer, ctx, nn::Tensor::constant(adapter));
  LatentRowParams out;
  out.mu = p.mu.value();
  out.scale = p.scale.value();
  out.delta = fixed_delta > 0.0 ? nn::RowVector(nn::RowVector::Constant(out.mu.size(), fixed_delta))
                                : nn::RowVector(p.delta.value());
  return out;
}

std::vector<nn::RowVector>
layer_adapters(const nn::ModelWeights& w, const nn::RowVector& z_hat)
{
  nn::NoGradGuard guard;
  const nn::Tensor h = nn::hyper_decode(w, nn::Tensor::constant(z_hat));
  std::vector<nn::RowVector> out;
  for (int l = 1; l <= w.config().num_layers; ++l)
    out.push_back(nn::layer_adapter(w, l, h).value());
  return out;
}

LatentCoding
encode_latents(const nn::ModelWeights& w, int layer, const nn::Matrix& latents, const nn::RowVector& adapter,
               double fixed_delta)
{
  const int dy = w.config().latent_dim;
  if (latents.cols() != dy)
    fail(ErrorCode::kInvalidArgument, "encode_latents: latent width mismatch");
  entropy::CausalRows rows(dy, w.config().context_rows);
  RangeEncoder enc;
  LatentCoding out;
  for (Eigen::Index t = 0; t < latents.rows(); ++t) {
    const LatentRowParams p =
        latent_row_params(w, layer, rows.window_input(std::size_t(t)), adapter, fixed_delta);
    nn::RowVector q(dy);
    for (int j = 0; j < dy; ++j) {
      const double d = p.delta[j];
      const auto k = int64_t(std::nearbyint(latents(t, j) / d));
      const entropy::DiscreteModel model = entropy::laplace_model(p.mu[j], p.scale[j], d);
      entropy::encode_value(enc, model, k);
      out.estimated_bits += model.bits(k);
      q[j] = d * double(k);
    }
    rows.append(q);
  }
  out.bytes = enc.finish();
  out.dequantized = rows.to_matrix();
  return out;
}

nn::Matrix
decode_latents(std::span<const uint8_t> bytes, const nn::ModelWeights& w, int layer, std::size_t count,
               const nn::RowVector& adapter, double fixed_delta)
{
  const int dy = w.config().latent_dim;
  entropy::CausalRows rows(dy, w.config().context_rows);
  RangeDecoder dec(bytes);
  for (std::size_t t = 0; t < count; ++t) {
    const LatentRowParams p = latent_row_params(w, layer, rows.window_input(t), adapter, fixed_delta);
    nn::RowVector q(dy);
    for (int j = 0; j < dy; ++j) {
      const double d = p.delta[j];
      const int64_t k = entropy::decode_value(dec, entropy::laplace_model(p.mu[j], p.scale[j], d));
      q[j] = d * double(k);
    }
    rows.append(q);
  }
  return rows.to_matrix();
}

//============================================================================

std::vector<LayerInput>
prepare_layers(const PointCloud& full, const std::vector<std::vector<std::size_t>>& sources,
               const std::vector<PointCloud>& sets)
{
  const NormalField field = estimate_normals(full);
  std::vector<LayerInput> out;
  for (std::size_t l = 0; l < sets.size(); ++l) {
    std::vector<std::array<double, 3>> normals;
    normals.reserve(sources[l].size());
    for (std::size_t i : sources[l])
      normals.push_back(field.normals[i]);
    out.push_back(prepare_layer(sets[l], normals));
  }
  return out;
}

namespace {

void
check_model(const nn::ModelWeights& w, int num_layers)
{
  if (w.config().num_layers != num_layers)
    fail(ErrorCode::kConfigMismatch, "model layer count differs from the requested layer count");
}

}  // namespace

EncodeResult
encode(const PointCloud& pc, const nn::ModelWeights& w, const CodecOptions& options)
{
  if (pc.empty())
    fail(ErrorCode::kInvalidArgument, "encode: empty cloud");
  if (pc.colorspace != ColorSpace::kRGB8)
    fail(ErrorCode::kWrongColorSpace, "encode expects RGB8 colours");
  pc.validate();
  options.spec.validate();
  check_model(w, options.num_layers);
  const int L = options.num_layers;

  EncodeResult res;
  res.stack = decompose(pc, L, options.spec, options.threads);
  const std::vector<LayerInput> inputs = prepare_layers(pc, res.stack.sources, res.stack.sets);

  res.latents.assign(std::size_t(L), nn::Matrix());
  std::vector<nn::Matrix> analysis(static_cast<std::size_t>(L));
  for (int l = 1; l <= L; ++l)
    if (inputs[std::size_t(l - 1)].points > 0)
      analysis[std::size_t(l - 1)] = analyze_layer(w, l, inputs[std::size_t(l - 1)], options.threads);

  // Hyper latent from the base layer.
  const int dz = w.config().hyper_dim;
  res.z_hat = nn::RowVector::Zero(dz);
  std::vector<uint8_t> hyper_payload;
  if (!res.stack.base().empty()) {
    nn::NoGradGuard guard;
    const nn::Tensor z = nn::hyper_encode(w, nn::Tensor::constant(analysis[std::size_t(L - 1)]));
    std::vector<int64_t> zq(static_cast<std::size_t>(dz));
    for (int c = 0; c < dz; ++c) {
      zq[std::size_t(c)] = int64_t(std::nearbyint(z.value()(0, c)));
      res.z_hat[c] = double(zq[std::size_t(c)]);
    }
    const nn::HyperPrior prior = nn::hyper_prior(w);
    const nn::RowVector mean = prior.mean.value();
    const nn::RowVector scale = prior.scale.value();
    hyper_payload = entropy::factorized_encode(zq, std::span<const double>(mean.data(), std::size_t(dz)),
                                               std::span<const double>(scale.data(), std::size_t(dz)));
  }
  const std::vector<nn::RowVector> adapters = layer_adapters(w, res.z_hat);

  std::vector<LatentCoding> coded(static_cast<std::size_t>(L));
  parallel_for(std::size_t(L), options.threads, [&](std::size_t i) {
    if (inputs[i].points == 0)
      return;
    coded[i] = encode_latents(w, int(i) + 1, analysis[i], adapters[i], options.fixed_delta);
  });

  StreamHeader h;
  h.bitdepth = pc.bitdepth;
  h.omega = uint32_t(options.spec.omega);
  h.q_centi = uint32_t(std::lround(options.spec.q_percent * 100.0));
  h.tau = options.spec.tau;
  h.num_layers = L;
  h.model_hash = w.hash();
  h.lambda_index = options.lambda_index;
  h.total_points = pc.size();
  for (int l = 1; l <= L; ++l) {
    h.layer_points.push_back(res.stack.sets[std::size_t(l - 1)].size());
    h.layer_empty.push_back(res.stack.sets[std::size_t(l - 1)].empty() ? 1 : 0);
  }

  res.bytes = write_header(h);
  res.header_bytes = res.bytes.size();
  const std::vector<uint8_t> masks = membership_encode(res.stack.masks);
  append_chunk(res.bytes, masks);
  res.mask_bytes = masks.size() + 4;
  if (h.has_hyper()) {
    append_chunk(res.bytes, hyper_payload);
    res.hyper_bytes = hyper_payload.size() + 4;
  }
  res.latent_bytes.assign(std::size_t(L), 0);
  for (int l = L; l >= 1; --l) {
    auto& c = coded[std::size_t(l - 1)];
    if (inputs[std::size_t(l - 1)].points == 0)
      continue;
    append_chunk(res.bytes, c.bytes);
    res.latent_bytes[std::size_t(l - 1)] = c.bytes.size() + 4;
    res.latents[std::size_t(l - 1)] = std::move(c.dequantized);
  }
  return res;
}

DecodeResult
decode(std::span<const uint8_t> bytes, const PointCloud& geometry, const nn::ModelWeights& w, int upto_layer,
       int threads, double fixed_delta)
{
  const StreamLayout layout = inspect_stream(bytes);
  const StreamHeader& h = layout.header;
  if (upto_layer < 1 || upto_layer > h.num_layers)
    fail(ErrorCode::kOutOfRange, "decode: layer out of range");
  if (h.model_hash != w.hash())
    fail(ErrorCode::kHashMismatch, "stream was produced with a different model");
  check_model(w, h.num_layers);
  if (layout.decodable_layer == 0 || upto_layer < layout.decodable_layer)
    fail(ErrorCode::kTruncatedStream, "stream is truncated above layer " + std::to_string(upto_layer));
  if (geometry.size() != h.total_points)
    fail(ErrorCode::kGeometryMismatch, "geometry point count differs from the stream");
  if (geometry.bitdepth != h.bitdepth)
    fail(ErrorCode::kGeometryMismatch, "geometry bit depth differs from the stream");

  PointCloud full;
  full.bitdepth = h.bitdepth;
  full.geometry = geometry.geometry;
  full.colors.assign(geometry.size(), Color{0, 0, 0});

  const ChunkRef* mc = layout.find(ChunkKind::kMasks);
  const auto order = morton_order(full.geometry, h.bitdepth);
  const auto masks = membership_decode(bytes.subspan(mc->offset, mc->length), full.size(), h.num_layers);

  DecodeResult res;
  res.upto_layer = upto_layer;
  res.sources = sources_from_masks(masks, order);
  for (int l = 1; l <= h.num_layers; ++l)
    if (res.sources[std::size_t(l - 1)].size() != h.layer_points[std::size_t(l - 1)])
      fail(ErrorCode::kCorruptChunk, "decoded membership disagrees with the layer sizes");

  std::vector<PointCloud> sets;
  for (const auto& src : res.sources) {
    PointCloud s = map_attributes(full, src);
    s.bitdepth = h.bitdepth;
    sets.push_back(std::move(s));
  }
  const std::vector<LayerInput> inputs = prepare_layers(full, res.sources, sets);

  const int dz = w.config().hyper_dim;
  nn::RowVector z_hat = nn::RowVector::Zero(dz);
  if (h.has_hyper()) {
    const ChunkRef* hc = layout.find(ChunkKind::kHyper);
    const nn::HyperPrior prior = nn::hyper_prior(w);
    const nn::RowVector mean = prior.mean.value();
    const nn::RowVector scale = prior.scale.value();
    const auto zq = entropy::factorized_decode(bytes.subspan(hc->offset, hc->length),
                                               std::span<const double>(mean.data(), std::size_t(dz)),
                                               std::span<const double>(scale.data(), std::size_t(dz)));
    for (int c = 0; c < dz; ++c)
      z_hat[c] = double(zq[std::size_t(c)]);
  }
  const std::vector<nn::RowVector> adapters = layer_adapters(w, z_hat);

  res.latents.assign(std::size_t(h.num_layers), nn::Matrix());
  std::vector<std::vector<Color>> colors(static_cast<std::size_t>(h.num_layers));
  for (int l = h.num_layers; l >= upto_layer; --l) {
    const LayerInput& in = inputs[std::size_t(l - 1)];
    if (in.points == 0)
      continue;
    const ChunkRef* lc = layout.find(ChunkKind::kLatent, l);
    res.latents[std::size_t(l - 1)] = decode_latents(bytes.subspan(lc->offset, lc->length), w, l, in.blocks(),
                                                     adapters[std::size_t(l - 1)], fixed_delta);
    colors[std::size_t(l - 1)] = synthesize_layer(w, l, res.latents[std::size_t(l - 1)], in, threads);
  }

  std::vector<std::tuple<std::size_t, int, std::size_t>> merged;
  for (int l = upto_layer; l <= h.num_layers; ++l) {
    const auto& src = res.sources[std::size_t(l - 1)];
    for (std::size_t i = 0; i < src.size(); ++i)
      merged.emplace_back(src[i], l, i);
  }
  std::sort(merged.begin(), merged.end());
  res.cloud.bitdepth = h.bitdepth;
  res.cloud.reserve(merged.size());
  for (const auto& [src, l, i] : merged) {
    Color c = colors[std::size_t(l - 1)][i];
    for (auto& v : c)
      v = std::clamp(std::nearbyint(v), 0.0, 255.0);
    res.cloud.push_back(full.geometry[src], c);
  }
  return res;
}

}  // namespace spac::codec
