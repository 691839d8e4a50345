// Copyright 2026 The spac Authors
// SPDX-License-Identifier: Apache-2.0

#include "spac/freq_sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "spac/error.hpp"
#include "spac/morton.hpp"
#include "spac/parallel.hpp"

namespace spac {

namespace {

bool
is_pow2(std::size_t n)
{
  return n != 0 && (n & (n - 1)) == 0;
}

// In-place iterative radix-2 transform; sign = -1 forward, +1 inverse
// (unscaled).
void
fft_inplace(std::vector<Complex>& a, int sign)
{
  const std::size_t n = a.size();
  if (!is_pow2(n))
    fail(ErrorCode::kInvalidArgument, "FFT length " + std::to_string(n) + " is not a power of two");

  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1)
      j ^= bit;
    j ^= bit;
    if (i < j)
      std::swap(a[i], a[j]);
  }

  // Twiddles for the full length, evaluated directly to avoid accumulated
  // recurrence error.
  std::vector<Complex> tw(n / 2);
  for (std::size_t k = 0; k < n / 2; ++k)
    tw[k] = std::polar(1.0, sign * 2.0 * std::numbers::pi * double(k) / double(n));

  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t stride = n / len;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const Complex t = tw[k * stride] * a[i + k + half];
        const Complex u = a[i + k];
        a[i + k] = u + t;
        a[i + k + half] = u - t;
      }
    }
  }
}

}  // namespace

void
GroupSpec::validate() const
{
  if (omega < 8 || !is_pow2(std::size_t(omega)))
    fail(ErrorCode::kInvalidArgument, "omega must be a power of two >= 8");
  if (!(q_percent > 0.0 && q_percent <= 100.0))
    fail(ErrorCode::kInvalidArgument, "q must be in (0, 100]");
  if (!(tau > 0.0 && tau < 1.0))
    fail(ErrorCode::kInvalidArgument, "tau must be in (0, 1)");
}

std::vector<double>
hamming_window(std::size_t n)
{
  if (n < 2)
    fail(ErrorCode::kInvalidArgument, "window length must be >= 2");
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * double(i) / double(n - 1));
  return w;
}

Spectrum
dft_forward(std::span<const double> signal)
{
  std::vector<Complex> a(signal.begin(), signal.end());
  fft_inplace(a, -1);
  return a;
}

Spectrum
dft_forward(std::span<const Complex> signal)
{
  std::vector<Complex> a(signal.begin(), signal.end());
  fft_inplace(a, -1);
  return a;
}

std::vector<Complex>
dft_inverse(std::span<const Complex> spectrum)
{
  std::vector<Complex> a(spectrum.begin(), spectrum.end());
  fft_inplace(a, +1);
  const double inv = 1.0 / double(a.size());
  for (auto& v : a)
    v *= inv;
  return a;
}

Spectrum
threshold_spectrum(std::span<const Complex> spectrum, double q_percent)
{
  if (!(q_percent > 0.0 && q_percent <= 100.0))
    fail(ErrorCode::kInvalidArgument, "q must be in (0, 100]");
  double max_mag = 0.0;
  for (const auto& c : spectrum)
    max_mag = std::max(max_mag, std::abs(c));
  const double limit = q_percent / 100.0 * max_mag;
  Spectrum out(spectrum.begin(), spectrum.end());
  for (auto& c : out) {
    if (std::abs(c) > limit)
      c = 0.0;
  }
  return out;
}

FrequencySplit
select_high_points(std::span<const Color> group, const GroupSpec& spec, GroupEnergy* energy)
{
  spec.validate();
  const std::size_t n = group.size();
  const std::size_t omega = std::size_t(spec.omega);
  if (n == 0)
    fail(ErrorCode::kInvalidArgument, "select_high_points: empty group");
  if (n > omega)
    fail(ErrorCode::kInvalidArgument, "select_high_points: group longer than omega");

  const std::vector<double> window = hamming_window(omega);
  std::vector<double> residual2(omega, 0.0);
  std::vector<Complex> buf(omega);
  GroupEnergy e;

  for (int ch = 0; ch < 3; ++ch) {
    double mean = 0.0;
    for (std::size_t i = 0; i < omega; ++i)
      mean += group[std::min(i, n - 1)][ch];
    mean /= double(omega);

    for (std::size_t i = 0; i < omega; ++i)
      buf[i] = window[i] * (group[std::min(i, n - 1)][ch] - mean);
    fft_inplace(buf, -1);
    const Spectrum kept = threshold_spectrum(buf, spec.q_percent);
    for (std::size_t k = 0; k < omega; ++k) {
      e.total += std::norm(buf[k]);
      e.retained += std::norm(kept[k]);
    }
    const std::vector<Complex> back = dft_inverse(kept);
    for (std::size_t i = 0; i < omega; ++i)
      residual2[i] += std::norm(back[i]);
  }

  double max_signal = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    max_signal = std::max(max_signal, std::sqrt(residual2[i]));

  FrequencySplit split;
  const double limit = spec.tau * max_signal;
  for (std::size_t i = 0; i < n; ++i) {
    if (max_signal > 0.0 && std::sqrt(residual2[i]) > limit)
      split.high_indices.push_back(i);
    else
      split.low_indices.push_back(i);
  }
  if (energy)
    *energy = e;
  return split;
}

std::vector<std::size_t>
fs_select(const PointCloud& pc, const GroupSpec& spec, int threads, FsStats* stats)
{
  spec.validate();
  std::vector<std::size_t> order(pc.size());
  if (spec.ordering == GroupOrdering::kMorton) {
    order = morton_order(pc.geometry, pc.bitdepth);
  } else {
    for (std::size_t i = 0; i < order.size(); ++i)
      order[i] = i;
  }

  const std::size_t omega = std::size_t(spec.omega);
  const std::size_t groups = (pc.size() + omega - 1) / omega;
  std::vector<std::vector<std::size_t>> picked(groups);
  std::vector<GroupEnergy> energy(groups);

  parallel_for(groups, threads, [&](std::size_t g) {
    const std::size_t begin = g * omega;
    const std::size_t end = std::min(pc.size(), begin + omega);
    std::vector<Color> colors(end - begin);
    for (std::size_t i = begin; i < end; ++i)
      colors[i - begin] = pc.colors[order[i]];
    const FrequencySplit split = select_high_points(colors, spec, &energy[g]);
    for (std::size_t local : split.high_indices)
      picked[g].push_back(order[begin + local]);
  });

  std::vector<std::size_t> high;
  FsStats s;
  s.groups = groups;
  s.points = pc.size();
  for (std::size_t g = 0; g < groups; ++g) {
    high.insert(high.end(), picked[g].begin(), picked[g].end());
    s.energy_total += energy[g].total;
    s.energy_retained += energy[g].retained;
  }
  std::sort(high.begin(), high.end());
  s.selected = high.size();
  if (stats)
    *stats = s;
  return high;
}

std::pair<PointCloud, PointCloud>
fs_split(const PointCloud& pc, const GroupSpec& spec, int threads, FsStats* stats)
{
  const std::vector<std::size_t> high_idx = fs_select(pc, spec, threads, stats);
  PointCloud high = map_attributes(pc, high_idx);
  PointCloud low = set_difference(pc, high);
  return {std::move(high), std::move(low)};
}

}  // namespace spac
