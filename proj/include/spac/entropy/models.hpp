// Copyright 2026 The spac Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "spac/entropy/range_coder.hpp"

namespace spac::entropy {

// Mass of Laplace(mu, b) on [k*delta - delta/2, k*delta + delta/2].
double laplace_bin_prob(double mu, double b, double delta, int64_t k);
// Mass of N(mu, sigma^2) on [k - 1/2, k + 1/2].
double gaussian_bin_prob(double mu, double sigma, int64_t k);

inline constexpr int kMaxRadius = 256;
inline constexpr double kTailWidths = 10.0;

// Quantized distribution over integer bins centre - radius .. centre +
// radius plus one escape symbol for everything outside.  Escaped values
// follow as a signed Exp-Golomb code in equiprobable bits.
struct DiscreteModel {
  int64_t center = 0;
  int radius = 0;
  FrequencyTable table;  // 2 * radius + 2 symbols, escape last

  uint32_t escape_symbol() const { return uint32_t(2 * radius + 1); }
  // Coded cost of bin k in bits, escape payload included.
  double bits(int64_t k) const;
};

// Bins of width delta centred on round(mu / delta); radius
// clamp(ceil(10 * b / delta) + 1, 2, 256).
DiscreteModel laplace_model(double mu, double b, double delta);
// Unit bins centred on round(mu); radius clamp(ceil(10 * sigma) + 1, 2, 256).
DiscreteModel gaussian_model(double mu, double sigma);

void encode_value(RangeEncoder& enc, const DiscreteModel& model, int64_t k);
int64_t decode_value(RangeDecoder& dec, const DiscreteModel& model);

// Bit count of the escape payload for a signed offset.
int escape_payload_bits(int64_t offset);

// Factorized coding of a unit-step quantized vector, one Gaussian per
// channel.
std::vector<uint8_t> factorized_encode(std::span<const int64_t> values, std::span<const double> means,
                                       std::span<const double> scales);
std::vector<int64_t> factorized_decode(std::span<const uint8_t> bytes, std::span<const double> means,
                                       std::span<const double> scales);
double factorized_bits(std::span<const int64_t> values, std::span<const double> means,
                       std::span<const double> scales);

}  // namespace spac::entropy
