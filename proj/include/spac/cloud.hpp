// Copyright 2026 The spac Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace spac {

using Vec3i = std::array<int32_t, 3>;
using Color = std::array<double, 3>;

enum class ColorSpace : uint8_t { kRGB8 = 0, kYUV = 1 };

inline constexpr int kMinBitdepth = 8;
inline constexpr int kMaxBitdepth = 14;

//============================================================================
// Voxelized point cloud: integer geometry with one color triple per point.
//
// In RGB8 mode each channel holds an integral value in [0, 255]; in YUV mode
// the channels are unrounded reals (see rgb_to_yuv).  Geometry is unique.

struct PointCloud {
  std::vector<Vec3i> geometry;
  std::vector<Color> colors;
  int bitdepth = 10;
  ColorSpace colorspace = ColorSpace::kRGB8;

  std::size_t size() const { return geometry.size(); }
  bool empty() const { return geometry.empty(); }

  void reserve(std::size_t n)
  {
    geometry.reserve(n);
    colors.reserve(n);
  }

  void push_back(const Vec3i& pos, const Color& color)
  {
    geometry.push_back(pos);
    colors.push_back(color);
  }

  // Throws on any broken invariant (size mismatch, out-of-range coordinate,
  // duplicate coordinate, non-integral or out-of-range RGB8 channel).
  void validate() const;

  friend bool operator==(const PointCloud&, const PointCloud&) = default;
};

struct NormalField {
  std::vector<std::array<double, 3>> normals;
  // Set where the neighbourhood was rank-deficient (colinear) and the normal
  // was chosen by the axis tie-break.
  std::vector<uint8_t> degenerate;
};

//============================================================================
// Set operations keyed on geometry.

// Points of `a` whose coordinates are absent from `b`, in `a`'s order.
// Requires geometry(b) to be a subset of geometry(a).
PointCloud set_difference(const PointCloud& a, const PointCloud& b);

// Concatenation of two geometry-disjoint clouds (a first, then b).
PointCloud set_union(const PointCloud& a, const PointCloud& b);

// Sub-cloud at `indices`, in index order.
PointCloud map_attributes(const PointCloud& source, std::span<const std::size_t> indices);

//============================================================================
// Color conversion.  BT.709 full range, chroma centred on 128.

Color rgb_to_yuv(const Color& rgb);
Color yuv_to_rgb(const Color& yuv);
PointCloud rgb_to_yuv(const PointCloud& pc);
PointCloud yuv_to_rgb(const PointCloud& pc);

//============================================================================
// Normals from the covariance of the k nearest neighbours (the point itself
// included).  Sign convention: the component of largest magnitude is
// nonnegative.

inline constexpr int kDefaultNormalNeighbors = 16;

NormalField estimate_normals(const PointCloud& pc, int k = kDefaultNormalNeighbors);

//============================================================================
// PSNR with peak 255; MSE == 0 reports kPsnrCap.

inline constexpr double kPsnrCap = 100.0;

double psnr_from_mse(double mse);
double channel_psnr(const PointCloud& ref, const PointCloud& test, int channel);

}  // namespace spac
