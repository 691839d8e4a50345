// Copyright 2026 The spac Authors
// SPDX-License-Identifier: Apache-2.0

#include "spac/codec/layer_input.hpp"

#include "spac/error.hpp"
#include "spac/nn/blocks.hpp"
#include "spac/octree.hpp"
#include "spac/parallel.hpp"

namespace spac::codec {

LayerInput
prepare_layer(const PointCloud& set, std::span<const std::array<double, 3>> normals)
{
  if (normals.size() != set.size())
    fail(ErrorCode::kInvalidArgument, "prepare_layer: one normal per point required");
  LayerInput in;
  in.points = set.size();
  if (set.empty()) {
    in.patch_blocks = {0};
    return in;
  }
  std::vector<Block> blocks;
  in.patch_blocks.push_back(0);
  for (const Patch& patch : make_patches(set)) {
    BlockSet bs = build_octree(patch, set);
    blocks.insert(blocks.end(), bs.blocks.begin(), bs.blocks.end());
    in.patch_blocks.push_back(blocks.size());
  }

  const auto rows = Eigen::Index(blocks.size() * kBlockSlots);
  in.layout.blocks = blocks.size();
  in.layout.valid.resize(std::size_t(rows));
  in.slot_point.resize(std::size_t(rows));
  in.colors.resize(rows, 3);
  in.normals.resize(rows, 3);
  in.rel_pos.resize(rows, 3);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const Block& blk = blocks[b];
    for (int s = 0; s < kBlockSlots; ++s) {
      const auto r = Eigen::Index(b * kBlockSlots + std::size_t(s));
      const std::size_t p = blk.slots[std::size_t(s)];
      in.layout.valid[std::size_t(r)] = blk.padded[std::size_t(s)] ? 0 : 1;
      in.slot_point[std::size_t(r)] = p;
      for (int a = 0; a < 3; ++a) {
        in.colors(r, a) = set.colors[p][std::size_t(a)];
        in.normals(r, a) = normals[p][std::size_t(a)];
        in.rel_pos(r, a) = (set.geometry[p][std::size_t(a)] - blk.centroid[std::size_t(a)]) / double(blk.cell_edge);
      }
    }
  }
  return in;
}

LayerInput
patch_slice(const LayerInput& in, std::size_t patch)
{
  const std::size_t b0 = in.patch_blocks.at(patch);
  const std::size_t b1 = in.patch_blocks.at(patch + 1);
  const auto r0 = Eigen::Index(b0 * kBlockSlots);
  const auto nr = Eigen::Index((b1 - b0) * kBlockSlots);
  LayerInput out;
  out.layout.blocks = b1 - b0;
  out.layout.valid.assign(in.layout.valid.begin() + r0, in.layout.valid.begin() + r0 + nr);
  out.slot_point.assign(in.slot_point.begin() + r0, in.slot_point.begin() + r0 + nr);
  out.patch_blocks = {0, b1 - b0};
  out.colors = in.colors.middleRows(r0, nr);
  out.normals = in.normals.middleRows(r0, nr);
  out.rel_pos = in.rel_pos.middleRows(r0, nr);
  for (auto v : out.layout.valid)
    out.points += v;
  return out;
}

nn::Matrix
analyze_layer(const nn::ModelWeights& w, int layer, const LayerInput& in, int threads)
{
  nn::Matrix y(Eigen::Index(in.blocks()), w.config().latent_dim);
  parallel_for(in.patches(), threads, [&](std::size_t p) {
    nn::NoGradGuard guard;
    const LayerInput part = patch_slice(in, p);
    const nn::Tensor out = nn::fnet_forward(w, layer, nn::Tensor::constant(part.colors),
                                            nn::Tensor::constant(part.normals), part.layout);
    y.middleRows(Eigen::Index(in.patch_blocks[p]), out.rows()) = out.value();
  });
  return y;
}

std::vector<Color>
synthesize_layer(const nn::ModelWeights& w, int layer, const nn::Matrix& latents, const LayerInput& in, int threads)
{
  if (latents.rows() != Eigen::Index(in.blocks()))
    fail(ErrorCode::kInvalidArgument, "synthesize_layer: one latent row per block required");
  std::vector<Color> colors(in.points, Color{0, 0, 0});
  parallel_for(in.patches(), threads, [&](std::size_t p) {
    nn::NoGradGuard guard;
    const LayerInput part = patch_slice(in, p);
    const auto b0 = Eigen::Index(in.patch_blocks[p]);
    const nn::Tensor y = nn::Tensor::constant(latents.middleRows(b0, Eigen::Index(part.blocks())));
    const nn::Tensor f = nn::refnet_forward(w, layer, y, nn::Tensor::constant(part.rel_pos), part.layout);
    const nn::Tensor c = nn::reconnet_forward(w, f, part.layout, true);
    // Each point owns exactly one valid slot, so patches write disjointly.
    for (std::size_t r = 0; r < part.slot_point.size(); ++r) {
      if (!part.layout.valid[r])
        continue;
      auto& dst = colors[part.slot_point[r]];
      for (int a = 0; a < 3; ++a)
        dst[std::size_t(a)] = c.value()(Eigen::Index(r), a);
    }
  });
  return colors;
}

}  // namespace spac::codec
