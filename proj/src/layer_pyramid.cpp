// Copyright 2026 The spac Authors
// SPDX-License-Identifier: Apache-2.0

#include "spac/layer_pyramid.hpp"

#include <algorithm>
#include <numeric>
#include <tuple>

#include "spac/error.hpp"
#include "spac/morton.hpp"

namespace spac {

std::size_t
LayerStack::total_points() const
{
  std::size_t n = 0;
  for (const auto& s : sets)
    n += s.size();
  return n;
}

LayerStack
decompose(const PointCloud& pc, int num_layers, const GroupSpec& spec, int threads)
{
  if (num_layers < 1 || num_layers > kMaxLayers)
    fail(ErrorCode::kInvalidArgument, "layer count must be in [1, 6]");
  spec.validate();

  LayerStack stack;
  stack.num_layers = num_layers;
  stack.bitdepth = pc.bitdepth;
  stack.colorspace = pc.colorspace;
  stack.sources.resize(num_layers);

  std::vector<std::size_t> current(pc.size());
  std::iota(current.begin(), current.end(), 0);
  for (int l = 1; l < num_layers; ++l) {
    if (current.empty()) {
      continue;
    }
    const PointCloud sub = map_attributes(pc, current);
    const std::vector<std::size_t> high = fs_select(sub, spec, threads);
    std::vector<std::size_t> next, residual;
    next.reserve(high.size());
    residual.reserve(current.size() - high.size());
    std::size_t h = 0;
    for (std::size_t i = 0; i < current.size(); ++i) {
      if (h < high.size() && high[h] == i) {
        next.push_back(current[i]);
        ++h;
      } else {
        residual.push_back(current[i]);
      }
    }
    stack.sources[l - 1] = std::move(residual);
    current = std::move(next);
    if (current.empty() && stack.exhausted_from == 0)
      stack.exhausted_from = l + 1;
  }
  stack.sources[num_layers - 1] = std::move(current);

  for (const auto& src : stack.sources) {
    PointCloud s = map_attributes(pc, src);
    s.bitdepth = pc.bitdepth;
    s.colorspace = pc.colorspace;
    stack.sets.push_back(std::move(s));
  }
  stack.canonical_order = morton_order(pc.geometry, pc.bitdepth);
  stack.masks = membership_masks(stack.sources, stack.canonical_order);
  return stack;
}

PointCloud
recompose(const LayerStack& stack, int upto_layer)
{
  if (upto_layer < 1 || upto_layer > stack.num_layers)
    fail(ErrorCode::kOutOfRange, "recompose: layer out of range");
  // (source index, layer, position within layer)
  std::vector<std::tuple<std::size_t, int, std::size_t>> order;
  for (int l = upto_layer; l <= stack.num_layers; ++l) {
    const auto& src = stack.sources[l - 1];
    for (std::size_t i = 0; i < src.size(); ++i)
      order.emplace_back(src[i], l, i);
  }
  std::sort(order.begin(), order.end());
  PointCloud out;
  out.bitdepth = stack.bitdepth;
  out.colorspace = stack.colorspace;
  out.reserve(order.size());
  for (const auto& [src, l, i] : order) {
    const PointCloud& s = stack.sets[l - 1];
    out.push_back(s.geometry[i], s.colors[i]);
  }
  return out;
}

std::vector<std::vector<uint8_t>>
membership_masks(const std::vector<std::vector<std::size_t>>& sources, const std::vector<std::size_t>& canonical_order)
{
  const std::size_t n = canonical_order.size();
  std::vector<std::size_t> rank(n);
  for (std::size_t k = 0; k < n; ++k)
    rank[canonical_order[k]] = k;
  std::vector<std::vector<uint8_t>> masks(sources.size(), std::vector<uint8_t>(n, 0));
  for (std::size_t l = 0; l < sources.size(); ++l) {
    for (std::size_t idx : sources[l]) {
      if (idx >= n)
        fail(ErrorCode::kOutOfRange, "layer source index outside the cloud");
      masks[l][rank[idx]] = 1;
    }
  }
  return masks;
}

std::vector<std::vector<std::size_t>>
sources_from_masks(const std::vector<std::vector<uint8_t>>& masks, const std::vector<std::size_t>& canonical_order)
{
  const std::size_t n = canonical_order.size();
  std::vector<std::vector<std::size_t>> sources(masks.size());
  for (std::size_t k = 0; k < n; ++k) {
    int owners = 0;
    for (std::size_t l = 0; l < masks.size(); ++l) {
      if (masks[l].size() != n)
        fail(ErrorCode::kNotASubset, "mask length differs from point count");
      if (masks[l][k]) {
        sources[l].push_back(canonical_order[k]);
        ++owners;
      }
    }
    if (owners != 1)
      fail(ErrorCode::kNotASubset, "layer masks do not partition the cloud");
  }
  for (auto& s : sources)
    std::sort(s.begin(), s.end());
  return sources;
}

}  // namespace spac
