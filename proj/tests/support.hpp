// Copyright 2026 The spac Authors
// SPDX-License-Identifier: Apache-2.0
//
// Shared fixtures and slow reference implementations for the tests.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <set>
#include <vector>

#include "spac/cloud.hpp"
#include "spac/nn/model.hpp"
#include "spac/nn/tensor.hpp"
#include "spac/rng.hpp"

namespace spac::testing {

// Unique random points in a cube of edge 2^bitdepth with random 8-bit
// colours.
inline PointCloud
random_cloud(Rng& rng, std::size_t n, int bitdepth = 10)
{
  PointCloud pc;
  pc.bitdepth = bitdepth;
  std::set<Vec3i> seen;
  const uint64_t edge = uint64_t(1) << bitdepth;
  while (pc.size() < n) {
    Vec3i p{int32_t(rng.below(edge)), int32_t(rng.below(edge)), int32_t(rng.below(edge))};
    if (!seen.insert(p).second)
      continue;
    pc.push_back(p, {double(rng.below(256)), double(rng.below(256)), double(rng.below(256))});
  }
  return pc;
}

// Random points with smooth colours plus a few outliers, so frequency
// sampling has something to find.
inline PointCloud
textured_cloud(Rng& rng, std::size_t n, int bitdepth = 10)
{
  PointCloud pc = random_cloud(rng, n, bitdepth);
  const double edge = double(1 << bitdepth);
  for (std::size_t i = 0; i < pc.size(); ++i) {
    const auto& g = pc.geometry[i];
    const double t = (g[0] + g[1] + g[2]) / (3.0 * edge);
    pc.colors[i] = {std::round(40 + 150 * t), std::round(200 - 120 * t), std::round(90 + 60 * std::sin(6 * t))};
    if (rng.below(10) == 0)
      pc.colors[i][0] = double(rng.below(256));
  }
  return pc;
}

// Uniform integer in [lo, hi].
inline int64_t
uniform_int(Rng& rng, int64_t lo, int64_t hi)
{
  return lo + int64_t(rng.below(uint64_t(hi - lo + 1)));
}

// Freshly initialized biases are exactly zero, which parks padded and dead
// rows on the ReLU kink; a small jitter moves every unit off it.
inline nn::ModelWeights
jittered(const nn::NetworkConfig& c, uint64_t seed)
{
  nn::ModelWeights w = nn::ModelWeights::initialize(c, seed);
  Rng rng(seed + 1000);
  for (const auto& entry : w.params()) {
    nn::Matrix& v = w.at(entry.first).mutable_value();
    for (Eigen::Index i = 0; i < v.size(); ++i)
      v.data()[i] += rng.uniform(-0.05, 0.05);
  }
  return w;
}

//============================================================================
// Oracles.

inline std::vector<std::complex<double>>
naive_dft(const std::vector<std::complex<double>>& x, bool inverse = false)
{
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n);
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> s = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double a = sign * 2.0 * std::numbers::pi * double((k * t) % n) / double(n);
      s += x[t] * std::complex<double>(std::cos(a), std::sin(a));
    }
    out[k] = inverse ? s / double(n) : s;
  }
  return out;
}

// Scalar reference of the selection pipeline: demean, window, naive DFT,
// keep small coefficients, naive inverse, channel norm, relative threshold.
inline std::vector<std::size_t>
reference_selection(const std::vector<Color>& group, double q, double tau)
{
  const std::size_t n = group.size();
  std::vector<double> signal2(n, 0.0);
  for (int ch = 0; ch < 3; ++ch) {
    double mean = 0.0;
    for (const auto& c : group)
      mean += c[ch];
    mean /= double(n);
    std::vector<std::complex<double>> x(n);
    for (std::size_t i = 0; i < n; ++i)
      x[i] = (0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * double(i) / double(n - 1))) * (group[i][ch] - mean);
    auto f = naive_dft(x);
    double peak = 0.0;
    for (const auto& v : f)
      peak = std::max(peak, std::abs(v));
    for (auto& v : f)
      if (!(std::abs(v) <= q / 100.0 * peak))
        v = 0.0;
    const auto back = naive_dft(f, true);
    for (std::size_t i = 0; i < n; ++i)
      signal2[i] += std::norm(back[i]);
  }
  double peak = 0.0;
  for (double s : signal2)
    peak = std::max(peak, std::sqrt(s));
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i)
    if (peak > 0.0 && std::sqrt(signal2[i]) > tau * peak)
      out.push_back(i);
  return out;
}

inline uint64_t
naive_morton(uint64_t x, uint64_t y, uint64_t z, int bits)
{
  uint64_t code = 0;
  for (int i = 0; i < bits; ++i) {
    code |= ((x >> i) & 1u) << (3 * i);
    code |= ((y >> i) & 1u) << (3 * i + 1);
    code |= ((z >> i) & 1u) << (3 * i + 2);
  }
  return code;
}

inline nn::Matrix
random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double lo = -1.0, double hi = 1.0)
{
  nn::Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = rng.uniform(lo, hi);
  return m;
}

// Largest relative deviation between an analytic gradient and central
// differences of `loss` with respect to `param`.  The relative error of an
// entry is |a - n| / max(|a|, |n|, floor).  A ReLU kink inside the stencil
// spoils the central difference, so the one-sided slopes are also accepted;
// the one on the side without the kink matches the analytic value.
template <typename LossFn>
double
gradient_error(nn::Tensor param, LossFn&& loss, double h = 1e-4, double floor = 1e-6)
{
  auto rel = [floor](double a, double n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor}); };
  param.zero_grad();
  const nn::Tensor root = loss();
  root.backward();
  const double center = root.item();
  const nn::Matrix analytic = param.grad();
  double worst = 0.0;
  nn::Matrix& v = param.mutable_value();
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    for (Eigen::Index c = 0; c < v.cols(); ++c) {
      const double keep = v(r, c);
      v(r, c) = keep + h;
      const double up = loss().item();
      v(r, c) = keep - h;
      const double down = loss().item();
      v(r, c) = keep;
      const double a = analytic(r, c);
      const double err = std::min({rel(a, (up - down) / (2.0 * h)), rel(a, (center - down) / h), rel(a, (up - center) / h)});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace spac::testing
