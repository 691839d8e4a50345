// Copyright 2026 The spac Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "spac/cloud.hpp"

namespace spac {

inline constexpr std::size_t kPatchSize = 4096;
inline constexpr int kBlockSlots = 8;

struct Patch {
  std::vector<std::size_t> points;  // indices into the cloud
  std::size_t patch_index = 0;
};

// Sorts by (z, y, x, index) and cuts consecutive runs of patch_size.
std::vector<Patch> make_patches(const PointCloud& pc, std::size_t patch_size = kPatchSize);

struct Block {
  // Point indices into the cloud.  Slots at and after `count` repeat the
  // member nearest the centroid and are marked in `padded`.
  std::array<std::size_t, kBlockSlots> slots{};
  std::array<uint8_t, kBlockSlots> padded{};
  int count = 0;
  std::array<double, 3> centroid{};
  Vec3i cell_origin{};
  int32_t cell_edge = 1;
};

struct BlockSet {
  std::vector<Block> blocks;
  std::size_t point_count() const;
};

// Recursive 8-way split of the patch's bounding cube until a cell holds at
// most 8 points.  Children are visited with x in bit 0, y in bit 1 and z in
// bit 2 of the child index, so leaves come out in Morton order of their
// cell origins.  Members keep their order within the patch.
BlockSet build_octree(const Patch& patch, const PointCloud& pc);

}  // namespace spac
