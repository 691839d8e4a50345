// Copyright 2026 The spac Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "spac/cloud.hpp"

namespace spac {

using Complex = std::complex<double>;
using Spectrum = std::vector<Complex>;

enum class GroupOrdering : uint8_t { kInput = 0, kMorton = 1 };

// Frequency sampling parameters.  omega is the group length (a power of two,
// >= 8); coefficients with magnitude <= q_percent% of the group maximum are
// retained; a position is selected when its residual exceeds tau times the
// largest residual in the group.
struct GroupSpec {
  int omega = 1024;
  double q_percent = 60.0;
  double tau = 1e-3;
  GroupOrdering ordering = GroupOrdering::kMorton;

  void validate() const;
};

// w(n) = 0.54 - 0.46 cos(2 pi n / (N - 1)), N >= 2.
std::vector<double> hamming_window(std::size_t n);

// Radix-2 transforms.  Length must be a power of two.  The inverse includes
// the 1/N factor.
Spectrum dft_forward(std::span<const double> signal);
Spectrum dft_forward(std::span<const Complex> signal);
std::vector<Complex> dft_inverse(std::span<const Complex> spectrum);

// Keep coefficients whose magnitude is <= (q/100) * max magnitude; zero the
// rest.
Spectrum threshold_spectrum(std::span<const Complex> spectrum, double q_percent);

struct FrequencySplit {
  std::vector<std::size_t> high_indices;
  std::vector<std::size_t> low_indices;
};

// Per-group energy bookkeeping, summed over channels.
struct GroupEnergy {
  double total = 0.0;     // sum |F(C_win)|^2
  double retained = 0.0;  // sum |F(C_zp)|^2
};

// Selection on one group of 1..omega colors.  Shorter groups are padded to
// omega by repeating the last color; padded positions are never selected.
// Each channel has its group mean removed before windowing so that a flat
// group carries no spectrum at all.
FrequencySplit select_high_points(std::span<const Color> group, const GroupSpec& spec,
                                  GroupEnergy* energy = nullptr);

struct FsStats {
  std::size_t groups = 0;
  std::size_t points = 0;
  std::size_t selected = 0;
  double energy_total = 0.0;
  double energy_retained = 0.0;
};

// Indices (ascending, into pc) of the high-frequency points.
std::vector<std::size_t> fs_select(const PointCloud& pc, const GroupSpec& spec, int threads = 1,
                                   FsStats* stats = nullptr);

// (high, low): high holds the selected points, low the set difference.  Both
// keep pc's relative order and carry the original attributes.
std::pair<PointCloud, PointCloud> fs_split(const PointCloud& pc, const GroupSpec& spec,
                                           int threads = 1, FsStats* stats = nullptr);

}  // namespace spac
