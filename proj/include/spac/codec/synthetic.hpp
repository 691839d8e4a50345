// Copyright 2026 The spac Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include "spac/cloud.hpp"

namespace spac::codec {

// Procedurally coloured primitives (sphere, plane, box surfaces) voxelized
// to exactly `points` unique positions.  Colours combine a per-primitive
// base, a linear gradient, a sinusoidal texture and small noise.
PointCloud synthetic_cloud(std::size_t points, uint64_t seed, int bitdepth = 10);

}  // namespace spac::codec
