// Copyright 2026 The spac Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "spac/cloud.hpp"

namespace spac {

// Interleave: bit i of x lands at output bit 3i, y at 3i+1, z at 3i+2.
// Throws kOutOfRange when a coordinate is negative or >= 2^bits.
uint64_t morton_code(int64_t x, int64_t y, int64_t z, int bits);

inline uint64_t
morton_code(const Vec3i& p, int bits)
{
  return morton_code(p[0], p[1], p[2], bits);
}

// Permutation that sorts `geometry` by Morton code (ties by index).
std::vector<std::size_t> morton_order(std::span<const Vec3i> geometry, int bits);

}  // namespace spac
