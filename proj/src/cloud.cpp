// Copyright 2026 The spac Authors
// SPDX-License-Identifier: Apache-2.0

#include "spac/cloud.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <unordered_map>
#include <unordered_set>

#include <Eigen/Dense>

#include "spac/error.hpp"
#include "spac/morton.hpp"

namespace spac {

namespace {

uint64_t
coord_key(const Vec3i& p)
{
  return (uint64_t(uint32_t(p[0])) << 42) | (uint64_t(uint32_t(p[1])) << 21)
    | uint64_t(uint32_t(p[2]));
}

std::unordered_map<uint64_t, std::size_t>
index_by_coord(const PointCloud& pc)
{
  std::unordered_map<uint64_t, std::size_t> map;
  map.reserve(pc.size() * 2);
  for (std::size_t i = 0; i < pc.size(); ++i)
    map.emplace(coord_key(pc.geometry[i]), i);
  return map;
}

// BT.709 luma weights.
constexpr double kKr = 0.2126;
constexpr double kKb = 0.0722;
constexpr double kKg = 1.0 - kKr - kKb;
constexpr double kCbScale = 2.0 * (1.0 - kKb);  // 1.8556
constexpr double kCrScale = 2.0 * (1.0 - kKr);  // 1.5748

}  // namespace

void
PointCloud::validate() const
{
  if (geometry.size() != colors.size())
    fail(ErrorCode::kInvalidArgument, "geometry/color count mismatch");
  if (bitdepth < kMinBitdepth || bitdepth > kMaxBitdepth)
    fail(ErrorCode::kOutOfRange, "bitdepth " + std::to_string(bitdepth) + " not in [8, 14]");
  const int32_t limit = int32_t(1) << bitdepth;
  std::unordered_set<uint64_t> seen;
  seen.reserve(geometry.size() * 2);
  for (const auto& p : geometry) {
    for (int32_t c : p) {
      if (c < 0 || c >= limit)
        fail(ErrorCode::kOutOfRange, "coordinate outside bitdepth range");
    }
    if (!seen.insert(coord_key(p)).second)
      fail(ErrorCode::kDuplicatePoint, "duplicate coordinate");
  }
  if (colorspace == ColorSpace::kRGB8) {
    for (const auto& c : colors) {
      for (double v : c) {
        if (!(v >= 0.0 && v <= 255.0) || v != std::nearbyint(v))
          fail(ErrorCode::kOutOfRange, "RGB8 channel not an integer in [0, 255]");
      }
    }
  }
}

//============================================================================

PointCloud
set_difference(const PointCloud& a, const PointCloud& b)
{
  const auto in_a = index_by_coord(a);
  std::vector<uint8_t> removed(a.size(), 0);
  for (const auto& p : b.geometry) {
    auto it = in_a.find(coord_key(p));
    if (it == in_a.end())
      fail(ErrorCode::kNotASubset, "set_difference: B has a coordinate not in A");
    removed[it->second] = 1;
  }

  PointCloud out;
  out.bitdepth = a.bitdepth;
  out.colorspace = a.colorspace;
  out.reserve(a.size() - std::min(a.size(), b.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!removed[i])
      out.push_back(a.geometry[i], a.colors[i]);
  }
  return out;
}

PointCloud
set_union(const PointCloud& a, const PointCloud& b)
{
  if (!a.empty() && !b.empty() && a.colorspace != b.colorspace)
    fail(ErrorCode::kWrongColorSpace, "set_union: colorspace mismatch");
  const auto in_a = index_by_coord(a);
  PointCloud out = a;
  if (a.empty()) {
    out.bitdepth = b.bitdepth;
    out.colorspace = b.colorspace;
  }
  out.bitdepth = std::max(a.bitdepth, b.bitdepth);
  out.reserve(a.size() + b.size());
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (in_a.count(coord_key(b.geometry[i])))
      fail(ErrorCode::kDuplicatePoint, "set_union: clouds overlap");
    out.push_back(b.geometry[i], b.colors[i]);
  }
  return out;
}

PointCloud
map_attributes(const PointCloud& source, std::span<const std::size_t> indices)
{
  PointCloud out;
  out.bitdepth = source.bitdepth;
  out.colorspace = source.colorspace;
  out.reserve(indices.size());
  for (std::size_t idx : indices) {
    if (idx >= source.size())
      fail(ErrorCode::kOutOfRange, "map_attributes: index " + std::to_string(idx) + " out of range");
    out.push_back(source.geometry[idx], source.colors[idx]);
  }
  return out;
}

//============================================================================

Color
rgb_to_yuv(const Color& rgb)
{
  const double y = kKr * rgb[0] + kKg * rgb[1] + kKb * rgb[2];
  const double u = (rgb[2] - y) / kCbScale + 128.0;
  const double v = (rgb[0] - y) / kCrScale + 128.0;
  return {y, u, v};
}

Color
yuv_to_rgb(const Color& yuv)
{
  const double y = yuv[0];
  const double cb = yuv[1] - 128.0;
  const double cr = yuv[2] - 128.0;
  const double r = y + kCrScale * cr;
  const double b = y + kCbScale * cb;
  const double g = (y - kKr * r - kKb * b) / kKg;
  auto to8 = [](double x) { return std::clamp(std::nearbyint(x), 0.0, 255.0); };
  return {to8(r), to8(g), to8(b)};
}

PointCloud
rgb_to_yuv(const PointCloud& pc)
{
  if (pc.colorspace != ColorSpace::kRGB8)
    fail(ErrorCode::kWrongColorSpace, "rgb_to_yuv expects an RGB8 cloud");
  PointCloud out = pc;
  out.colorspace = ColorSpace::kYUV;
  for (auto& c : out.colors)
    c = rgb_to_yuv(c);
  return out;
}

PointCloud
yuv_to_rgb(const PointCloud& pc)
{
  if (pc.colorspace != ColorSpace::kYUV)
    fail(ErrorCode::kWrongColorSpace, "yuv_to_rgb expects a YUV cloud");
  PointCloud out = pc;
  out.colorspace = ColorSpace::kRGB8;
  for (auto& c : out.colors)
    c = yuv_to_rgb(c);
  return out;
}

//============================================================================
// Normal estimation.
//
// Points are sorted by Morton code; a grid cell at level s is then a
// contiguous run of codes sharing the prefix code >> 3s, found by binary
// search.  The search grows a cube of cells around the query until the k-th
// candidate is provably no farther than any unvisited point.

namespace {

struct MortonGrid {
  std::vector<uint64_t> codes;  // sorted
  std::vector<std::size_t> order;
  int shift = 0;
  int bits = 0;

  std::pair<std::size_t, std::size_t> cell_range(int64_t cx, int64_t cy, int64_t cz) const
  {
    const int cell_bits = bits - shift;
    const int64_t limit = int64_t(1) << cell_bits;
    if (cx < 0 || cy < 0 || cz < 0 || cx >= limit || cy >= limit || cz >= limit)
      return {0, 0};
    const uint64_t prefix = morton_code(cx, cy, cz, cell_bits);
    const uint64_t lo = prefix << (3 * shift);
    const uint64_t hi = (prefix + 1) << (3 * shift);
    auto b = std::lower_bound(codes.begin(), codes.end(), lo);
    auto e = std::lower_bound(b, codes.end(), hi);
    return {std::size_t(b - codes.begin()), std::size_t(e - codes.begin())};
  }
};

int
choose_shift(const std::vector<uint64_t>& sorted_codes, int bits, int k)
{
  // Coarsen until an occupied cell holds about k/4 points on average.
  const double target = std::max(1.0, k / 4.0);
  for (int s = 0; s < bits; ++s) {
    std::size_t cells = 0;
    uint64_t prev = std::numeric_limits<uint64_t>::max();
    for (uint64_t c : sorted_codes) {
      const uint64_t p = c >> (3 * s);
      if (p != prev) {
        ++cells;
        prev = p;
      }
    }
    if (double(sorted_codes.size()) / double(cells) >= target)
      return s;
  }
  return bits;
}

std::array<double, 3>
normal_from_covariance(const Eigen::Matrix3d& cov, bool* degenerate)
{
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
  const Eigen::Vector3d evals = solver.eigenvalues();  // ascending
  const Eigen::Matrix3d evecs = solver.eigenvectors();
  const double scale = std::max(evals(2), std::numeric_limits<double>::min());

  Eigen::Vector3d n = evecs.col(0);
  *degenerate = evals(1) <= 1e-9 * scale;
  if (*degenerate) {
    // Null space is at least two-dimensional: project the coordinate axes
    // onto it and take the first with a usable projection.
    const Eigen::Vector3d v0 = evecs.col(0);
    const Eigen::Vector3d v1 = evecs.col(1);
    for (int a = 0; a < 3; ++a) {
      Eigen::Vector3d e = Eigen::Vector3d::Zero();
      e(a) = 1.0;
      Eigen::Vector3d p = v0 * v0.dot(e) + v1 * v1.dot(e);
      if (p.norm() > 1e-6) {
        n = p;
        break;
      }
    }
  }
  n.normalize();

  int big = 0;
  for (int a = 1; a < 3; ++a) {
    if (std::abs(n(a)) > std::abs(n(big)))
      big = a;
  }
  if (n(big) < 0)
    n = -n;
  // Exact zeros keep a positive sign so results do not depend on -0.0.
  return {n(0) + 0.0, n(1) + 0.0, n(2) + 0.0};
}

}  // namespace

NormalField
estimate_normals(const PointCloud& pc, int k)
{
  const std::size_t m = pc.size();
  if (k < 3)
    fail(ErrorCode::kInvalidArgument, "estimate_normals: k must be >= 3");
  if (m < std::size_t(k))
    fail(ErrorCode::kInvalidArgument,
         "estimate_normals: cloud has " + std::to_string(m) + " points, fewer than k="
           + std::to_string(k));

  MortonGrid grid;
  grid.bits = pc.bitdepth;
  grid.order = morton_order(pc.geometry, pc.bitdepth);
  grid.codes.resize(m);
  std::vector<uint64_t> code_of(m);
  for (std::size_t i = 0; i < m; ++i) {
    code_of[grid.order[i]] = morton_code(pc.geometry[grid.order[i]], pc.bitdepth);
    grid.codes[i] = code_of[grid.order[i]];
  }
  grid.shift = choose_shift(grid.codes, grid.bits, k);
  const int64_t cell = int64_t(1) << grid.shift;

  NormalField field;
  field.normals.resize(m);
  field.degenerate.resize(m, 0);

  struct Candidate {
    int64_t d2;
    uint64_t code;
    std::size_t index;
  };
  auto closer = [](const Candidate& a, const Candidate& b) {
    if (a.d2 != b.d2)
      return a.d2 < b.d2;
    if (a.code != b.code)
      return a.code < b.code;
    return a.index < b.index;
  };

  std::vector<Candidate> cand;
  for (std::size_t i = 0; i < m; ++i) {
    const Vec3i& q = pc.geometry[i];
    const int64_t cx = q[0] >> grid.shift, cy = q[1] >> grid.shift, cz = q[2] >> grid.shift;
    cand.clear();
    for (int64_t r = 0;; ++r) {
      // Visit the shell of cells at Chebyshev distance exactly r.
      for (int64_t dx = -r; dx <= r; ++dx) {
        for (int64_t dy = -r; dy <= r; ++dy) {
          for (int64_t dz = -r; dz <= r; ++dz) {
            if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != r)
              continue;
            auto [b, e] = grid.cell_range(cx + dx, cy + dy, cz + dz);
            for (std::size_t s = b; s < e; ++s) {
              const std::size_t j = grid.order[s];
              const Vec3i& p = pc.geometry[j];
              const int64_t ex = p[0] - q[0], ey = p[1] - q[1], ez = p[2] - q[2];
              cand.push_back({ex * ex + ey * ey + ez * ez, grid.codes[s], j});
            }
          }
        }
      }
      if (cand.size() >= std::size_t(k)) {
        std::nth_element(cand.begin(), cand.begin() + (k - 1), cand.end(), closer);
        // Unvisited points are strictly farther than r * cell.
        const int64_t reach = r * cell;
        if (cand[k - 1].d2 <= reach * reach)
          break;
      }
      const int64_t last = (int64_t(1) << (grid.bits - grid.shift)) - 1;
      if (cx - r <= 0 && cy - r <= 0 && cz - r <= 0 && cx + r >= last && cy + r >= last
          && cz + r >= last)
        break;  // covered the whole grid
    }
    std::sort(cand.begin(), cand.end(), closer);

    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (int n = 0; n < k; ++n) {
      const Vec3i& p = pc.geometry[cand[n].index];
      mean += Eigen::Vector3d(p[0], p[1], p[2]);
    }
    mean /= double(k);
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (int n = 0; n < k; ++n) {
      const Vec3i& p = pc.geometry[cand[n].index];
      const Eigen::Vector3d d = Eigen::Vector3d(p[0], p[1], p[2]) - mean;
      cov += d * d.transpose();
    }
    bool degenerate = false;
    field.normals[i] = normal_from_covariance(cov / double(k), &degenerate);
    field.degenerate[i] = degenerate;
  }
  return field;
}

//============================================================================

double
psnr_from_mse(double mse)
{
  if (mse <= 0.0)
    return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(255.0 * 255.0 / mse));
}

double
channel_psnr(const PointCloud& ref, const PointCloud& test, int channel)
{
  if (channel < 0 || channel > 2)
    fail(ErrorCode::kInvalidArgument, "channel must be 0, 1 or 2");
  if (ref.size() != test.size())
    fail(ErrorCode::kGeometryMismatch, "PSNR: point counts differ");
  if (ref.colorspace != test.colorspace)
    fail(ErrorCode::kWrongColorSpace, "PSNR: colorspace mismatch");
  if (ref.empty())
    return kPsnrCap;
  const auto in_test = index_by_coord(test);
  double sse = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    auto it = in_test.find(coord_key(ref.geometry[i]));
    if (it == in_test.end())
      fail(ErrorCode::kGeometryMismatch, "PSNR: geometry sets differ");
    const double d = ref.colors[i][channel] - test.colors[it->second][channel];
    sse += d * d;
  }
  return psnr_from_mse(sse / double(ref.size()));
}

}  // namespace spac
