// Copyright 2026 The spac Authors
// SPDX-License-Identifier: Apache-2.0

#include "spac/morton.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "spac/error.hpp"

namespace spac {

namespace {

// Spread the low 21 bits of v so that bit i moves to bit 3i.
uint64_t
spread3(uint64_t v)
{
  v &= 0x1fffffull;
  v = (v | (v << 32)) & 0x001f00000000ffffull;
  v = (v | (v << 16)) & 0x001f0000ff0000ffull;
  v = (v | (v << 8)) & 0x100f00f00f00f00full;
  v = (v | (v << 4)) & 0x10c30c30c30c30c3ull;
  v = (v | (v << 2)) & 0x1249249249249249ull;
  return v;
}

}  // namespace

uint64_t
morton_code(int64_t x, int64_t y, int64_t z, int bits)
{
  if (bits < 0 || bits > 21)
    fail(ErrorCode::kInvalidArgument, "morton bits must be in [0, 21]");
  const int64_t limit = int64_t(1) << bits;
  for (int64_t c : {x, y, z}) {
    if (c < 0 || c >= limit)
      fail(ErrorCode::kOutOfRange,
           "coordinate " + std::to_string(c) + " outside " + std::to_string(bits) + "-bit range");
  }
  return spread3(uint64_t(x)) | (spread3(uint64_t(y)) << 1) | (spread3(uint64_t(z)) << 2);
}

std::vector<std::size_t>
morton_order(std::span<const Vec3i> geometry, int bits)
{
  std::vector<uint64_t> codes(geometry.size());
  for (std::size_t i = 0; i < geometry.size(); ++i)
    codes[i] = morton_code(geometry[i], bits);
  std::vector<std::size_t> order(geometry.size());
  std::iota(order.begin(), order.end(), std::size_t(0));
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return codes[a] != codes[b] ? codes[a] < codes[b] : a < b;
  });
  return order;
}

}  // namespace spac
