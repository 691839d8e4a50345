// Copyright 2026 The spac Authors
// SPDX-License-Identifier: Apache-2.0

#include "spac/octree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "spac/error.hpp"

namespace spac {

std::size_t
BlockSet::point_count() const
{
  std::size_t n = 0;
  for (const auto& b : blocks)
    n += static_cast<std::size_t>(b.count);
  return n;
}

std::vector<Patch>
make_patches(const PointCloud& pc, std::size_t patch_size)
{
  if (pc.empty())
    fail(ErrorCode::kInvalidArgument, "make_patches: empty cloud");
  if (patch_size == 0)
    fail(ErrorCode::kInvalidArgument, "make_patches: zero patch size");
  std::vector<std::size_t> order(pc.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& pa = pc.geometry[a];
    const auto& pb = pc.geometry[b];
    if (pa[2] != pb[2])
      return pa[2] < pb[2];
    if (pa[1] != pb[1])
      return pa[1] < pb[1];
    if (pa[0] != pb[0])
      return pa[0] < pb[0];
    return a < b;
  });
  std::vector<Patch> patches;
  for (std::size_t start = 0; start < order.size(); start += patch_size) {
    Patch p;
    p.patch_index = patches.size();
    const std::size_t end = std::min(order.size(), start + patch_size);
    p.points.assign(order.begin() + std::ptrdiff_t(start), order.begin() + std::ptrdiff_t(end));
    patches.push_back(std::move(p));
  }
  return patches;
}

namespace {

Block
make_block(const std::vector<std::size_t>& members, const PointCloud& pc, const Vec3i& origin, int32_t edge)
{
  Block b;
  b.count = static_cast<int>(members.size());
  b.cell_origin = origin;
  b.cell_edge = edge;
  for (std::size_t m : members)
    for (int a = 0; a < 3; ++a)
      b.centroid[a] += pc.geometry[m][a];
  for (int a = 0; a < 3; ++a)
    b.centroid[a] /= double(members.size());

  std::size_t nearest = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < members.size(); ++i) {
    double d = 0.0;
    for (int a = 0; a < 3; ++a) {
      const double t = pc.geometry[members[i]][a] - b.centroid[a];
      d += t * t;
    }
    if (d < best) {
      best = d;
      nearest = i;
    }
  }
  for (int s = 0; s < kBlockSlots; ++s) {
    const bool pad = s >= b.count;
    b.slots[s] = pad ? members[nearest] : members[s];
    b.padded[s] = pad ? 1 : 0;
  }
  return b;
}

void
split(const std::vector<std::size_t>& members, const PointCloud& pc, const Vec3i& origin, int32_t edge,
      std::vector<Block>& out)
{
  if (members.size() <= std::size_t(kBlockSlots) || edge == 1) {
    if (members.size() > std::size_t(kBlockSlots))
      fail(ErrorCode::kDuplicatePoint, "octree: more than 8 points in a unit cell");
    out.push_back(make_block(members, pc, origin, edge));
    return;
  }
  const int32_t half = edge / 2;
  std::array<std::vector<std::size_t>, 8> children;
  for (std::size_t m : members) {
    const auto& p = pc.geometry[m];
    int child = 0;
    for (int a = 0; a < 3; ++a)
      if (p[a] >= origin[a] + half)
        child |= 1 << a;
    children[child].push_back(m);
  }
  for (int c = 0; c < 8; ++c) {
    if (children[c].empty())
      continue;
    Vec3i o = origin;
    for (int a = 0; a < 3; ++a)
      if (c & (1 << a))
        o[a] += half;
    split(children[c], pc, o, half, out);
  }
}

}  // namespace

BlockSet
build_octree(const Patch& patch, const PointCloud& pc)
{
  if (patch.points.empty())
    fail(ErrorCode::kInvalidArgument, "build_octree: empty patch");
  Vec3i lo{std::numeric_limits<int32_t>::max(), std::numeric_limits<int32_t>::max(),
           std::numeric_limits<int32_t>::max()};
  Vec3i hi{std::numeric_limits<int32_t>::min(), std::numeric_limits<int32_t>::min(),
           std::numeric_limits<int32_t>::min()};
  for (std::size_t m : patch.points) {
    if (m >= pc.size())
      fail(ErrorCode::kOutOfRange, "build_octree: patch index outside the cloud");
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], pc.geometry[m][a]);
      hi[a] = std::max(hi[a], pc.geometry[m][a]);
    }
  }
  int32_t extent = 1;
  for (int a = 0; a < 3; ++a)
    extent = std::max(extent, hi[a] - lo[a] + 1);
  int32_t edge = 1;
  while (edge < extent)
    edge *= 2;
  BlockSet set;
  split(patch.points, pc, lo, edge, set.blocks);
  return set;
}

}  // namespace spac
