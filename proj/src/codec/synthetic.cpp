// Copyright 2026 The spac Authors
// SPDX-License-Identifier: Apache-2.0

#include "spac/codec/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_set>

#include "spac/error.hpp"
#include "spac/rng.hpp"

namespace spac::codec {

namespace {

enum class Shape { kSphere, kPlane, kBox };

struct Primitive {
  Shape shape;
  std::array<double, 3> center;
  double size;
  std::array<double, 3> base;
  std::array<double, 3> gradient;  // colour change per voxel along `direction`
  std::array<double, 3> direction;
  double frequency;
  double area;
};

std::array<double, 3>
random_unit(Rng& rng)
{
  for (;;) {
    std::array<double, 3> v{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    if (n > 1e-3 && n <= 1.0) {
      for (auto& c : v)
        c /= n;
      return v;
    }
  }
}

std::array<double, 3>
sample_surface(const Primitive& p, Rng& rng)
{
  std::array<double, 3> q{};
  switch (p.shape) {
    case Shape::kSphere: {
      const auto d = random_unit(rng);
      for (int a = 0; a < 3; ++a)
        q[a] = p.center[a] + p.size * d[a];
      break;
    }
    case Shape::kPlane:
      q = {p.center[0] + rng.uniform(-p.size, p.size), p.center[1] + rng.uniform(-p.size, p.size), p.center[2]};
      break;
    case Shape::kBox: {
      const int face = int(rng.below(6));
      const int axis = face / 2;
      for (int a = 0; a < 3; ++a)
        q[a] = p.center[a] + (a == axis ? (face % 2 ? p.size : -p.size) : rng.uniform(-p.size, p.size));
      break;
    }
  }
  return q;
}

}  // namespace

PointCloud
synthetic_cloud(std::size_t points, uint64_t seed, int bitdepth)
{
  if (points == 0)
    fail(ErrorCode::kInvalidArgument, "synthetic_cloud: zero points requested");
  if (bitdepth < kMinBitdepth || bitdepth > kMaxBitdepth)
    fail(ErrorCode::kOutOfRange, "synthetic_cloud: bit depth out of range");
  Rng rng(seed);
  const double grid = double(1 << bitdepth);

  // Unit-size primitives, scaled so their surface holds ~1.5x the points.
  std::vector<Primitive> prims;
  const int count = 3;
  double unit_area = 0.0;
  for (int i = 0; i < count; ++i) {
    Primitive p{};
    p.shape = static_cast<Shape>(i % 3);
    p.size = rng.uniform(0.6, 1.0);
    p.center = {rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)};
    switch (p.shape) {
      case Shape::kSphere: p.area = 4 * std::numbers::pi * p.size * p.size; break;
      case Shape::kPlane: p.area = 4 * p.size * p.size; break;
      case Shape::kBox: p.area = 24 * p.size * p.size; break;
    }
    unit_area += p.area;
    for (int a = 0; a < 3; ++a) {
      p.base[a] = rng.uniform(40, 215);
      p.gradient[a] = rng.uniform(-40, 40);
    }
    p.direction = random_unit(rng);
    p.frequency = rng.uniform(1.0, 4.0);
    prims.push_back(p);
  }
  double scale = std::sqrt(1.5 * double(points) / unit_area);
  // Keep everything on the grid: primitives span about [-2.5, 2.5] units.
  scale = std::min(scale, (grid - 2) / 5.2);
  const double offset = grid / 2;

  PointCloud pc;
  pc.bitdepth = bitdepth;
  pc.reserve(points);
  std::unordered_set<uint64_t> seen;
  const std::size_t max_draws = points * 200;
  std::size_t draws = 0;
  while (pc.size() < points) {
    if (++draws > max_draws)
      fail(ErrorCode::kOutOfRange, "synthetic_cloud: surface too small for the requested point count");
    // Pick a primitive proportionally to its area.
    double pick = rng.uniform(0, unit_area);
    std::size_t k = 0;
    while (k + 1 < prims.size() && pick > prims[k].area) {
      pick -= prims[k].area;
      ++k;
    }
    const Primitive& p = prims[k];
    const auto q = sample_surface(p, rng);
    Vec3i v{};
    bool inside = true;
    for (int a = 0; a < 3; ++a) {
      const double c = std::nearbyint(q[a] * scale + offset);
      if (c < 0 || c >= grid)
        inside = false;
      v[a] = int32_t(c);
    }
    if (!inside)
      continue;
    const uint64_t key = (uint64_t(v[0]) << 42) | (uint64_t(v[1]) << 21) | uint64_t(v[2]);
    if (!seen.insert(key).second)
      continue;
    const double t = (q[0] * p.direction[0] + q[1] * p.direction[1] + q[2] * p.direction[2]);
    const double wave = std::sin(p.frequency * std::numbers::pi * t);
    Color c{};
    for (int a = 0; a < 3; ++a) {
      const double value = p.base[a] + p.gradient[a] * t + 20.0 * wave + rng.uniform(-4, 4);
      c[a] = std::clamp(std::nearbyint(value), 0.0, 255.0);
    }
    pc.push_back(v, c);
  }
  return pc;
}

}  // namespace spac::codec
