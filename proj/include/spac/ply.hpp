// Copyright 2026 The spac Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "spac/cloud.hpp"

namespace spac {

enum class PlyFormat { kAscii, kBinaryLittleEndian };

enum class DuplicatePolicy { kReject, kMergeMean };

struct PlyReadOptions {
  // 0 infers the smallest bitdepth in [8, 14] that holds every coordinate.
  int bitdepth = 0;
  DuplicatePolicy duplicates = DuplicatePolicy::kReject;
};

PointCloud load_ply(const std::string& path, const PlyReadOptions& opts = {});
PointCloud parse_ply(const std::string& bytes, const PlyReadOptions& opts = {});

void save_ply(const PointCloud& pc, const std::string& path, PlyFormat format);
std::string serialize_ply(const PointCloud& pc, PlyFormat format);

}  // namespace spac
