// Copyright 2026 The spac Authors
// SPDX-License-Identifier: Apache-2.0

#include "spac/entropy/models.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "spac/error.hpp"

namespace spac::entropy {

namespace {

// Laplace CDF, evaluated on the side that keeps precision.
double
laplace_cdf(double x, double mu, double b)
{
  const double t = (x - mu) / b;
  return t < 0 ? 0.5 * std::exp(t) : 1.0 - 0.5 * std::exp(-t);
}

double
laplace_mass(double lo, double hi, double mu, double b)
{
  // Reflect intervals right of the mean into the left tail.
  if (lo >= mu)
    return 0.5 * (std::exp(-(lo - mu) / b) - std::exp(-(hi - mu) / b));
  if (hi <= mu)
    return 0.5 * (std::exp((hi - mu) / b) - std::exp((lo - mu) / b));
  return laplace_cdf(hi, mu, b) - laplace_cdf(lo, mu, b);
}

double
normal_cdf(double x)
{
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

uint64_t
zigzag(int64_t v)
{
  return v > 0 ? 2 * uint64_t(v) - 1 : 2 * uint64_t(-v);
}

int64_t
unzigzag(uint64_t u)
{
  return (u & 1) ? int64_t((u + 1) / 2) : -int64_t(u / 2);
}

int
bit_length(uint64_t v)
{
  int n = 0;
  while (v) {
    ++n;
    v >>= 1;
  }
  return n;
}

template <typename MassFn>
DiscreteModel
build_model(int64_t center, int radius, MassFn&& mass)
{
  DiscreteModel m;
  m.center = center;
  m.radius = radius;
  std::vector<double> probs(std::size_t(2 * radius + 2));
  double inside = 0.0;
  for (int i = 0; i <= 2 * radius; ++i) {
    probs[std::size_t(i)] = mass(center - radius + i);
    inside += probs[std::size_t(i)];
  }
  probs.back() = std::max(0.0, 1.0 - inside);
  m.table = FrequencyTable::from_probabilities(probs);
  return m;
}

}  // namespace

double
laplace_bin_prob(double mu, double b, double delta, int64_t k)
{
  if (!(b > 0.0) || !(delta > 0.0))
    fail(ErrorCode::kInvalidArgument, "laplace_bin_prob: scale and step must be positive");
  const double c = double(k) * delta;
  return laplace_mass(c - 0.5 * delta, c + 0.5 * delta, mu, b);
}

double
gaussian_bin_prob(double mu, double sigma, int64_t k)
{
  if (!(sigma > 0.0))
    fail(ErrorCode::kInvalidArgument, "gaussian_bin_prob: scale must be positive");
  // Evaluate in the left tail where erfc keeps precision.
  const double t = -std::abs(double(k) - mu);
  return normal_cdf((t + 0.5) / sigma) - normal_cdf((t - 0.5) / sigma);
}

int
escape_payload_bits(int64_t offset)
{
  const int n = bit_length(zigzag(offset) + 1) - 1;
  return 2 * n + 1;
}

double
DiscreteModel::bits(int64_t k) const
{
  const int64_t off = k - center;
  if (off >= -radius && off <= radius)
    return table.bits(std::size_t(off + radius));
  return table.bits(escape_symbol()) + escape_payload_bits(off);
}

DiscreteModel
laplace_model(double mu, double b, double delta)
{
  if (!(b > 0.0) || !(delta > 0.0) || !std::isfinite(mu))
    fail(ErrorCode::kInvalidArgument, "laplace_model: invalid parameters");
  const int64_t center = int64_t(std::nearbyint(mu / delta));
  const double r = std::ceil(kTailWidths * b / delta) + 1.0;
  const int radius = int(std::clamp(r, 2.0, double(kMaxRadius)));
  return build_model(center, radius, [&](int64_t k) { return laplace_bin_prob(mu, b, delta, k); });
}

DiscreteModel
gaussian_model(double mu, double sigma)
{
  if (!(sigma > 0.0) || !std::isfinite(mu))
    fail(ErrorCode::kInvalidArgument, "gaussian_model: invalid parameters");
  const int64_t center = int64_t(std::nearbyint(mu));
  const double r = std::ceil(kTailWidths * sigma) + 1.0;
  const int radius = int(std::clamp(r, 2.0, double(kMaxRadius)));
  return build_model(center, radius, [&](int64_t k) { return gaussian_bin_prob(mu, sigma, k); });
}

void
encode_value(RangeEncoder& enc, const DiscreteModel& model, int64_t k)
{
  const int64_t off = k - model.center;
  if (off >= -model.radius && off <= model.radius) {
    encode_symbol(enc, model.table, uint32_t(off + model.radius));
    return;
  }
  encode_symbol(enc, model.table, model.escape_symbol());
  // Exp-Golomb order 0 of zigzag(off): n zeros, then the n + 1 bits of
  // zigzag(off) + 1.
  const uint64_t u = zigzag(off) + 1;
  const int n = bit_length(u) - 1;
  if (n > 62)
    fail(ErrorCode::kOutOfRange, "escape value too large");
  for (int i = 0; i < n; ++i)
    enc.encode_bits(0, 1);
  for (int i = n; i >= 0; i -= 32) {
    const int chunk = std::min(32, i + 1);
    enc.encode_bits(uint32_t((u >> (i + 1 - chunk)) & ((uint64_t(1) << chunk) - 1)), chunk);
  }
}

int64_t
decode_value(RangeDecoder& dec, const DiscreteModel& model)
{
  const uint32_t s = decode_symbol(dec, model.table);
  if (s != model.escape_symbol())
    return model.center + int64_t(s) - model.radius;
  int n = 0;
  while (dec.decode_bits(1) == 0) {
    if (++n > 62)
      fail(ErrorCode::kCorruptChunk, "escape code too long");
  }
  uint64_t u = 1;
  for (int left = n; left > 0;) {
    const int chunk = std::min(32, left);
    u = (u << chunk) | dec.decode_bits(chunk);
    left -= chunk;
  }
  const int64_t off = unzigzag(u - 1);
  if (off >= -model.radius && off <= model.radius)
    fail(ErrorCode::kCorruptChunk, "escape used for an in-range value");
  return model.center + off;
}

std::vector<uint8_t>
factorized_encode(std::span<const int64_t> values, std::span<const double> means, std::span<const double> scales)
{
  if (values.size() != means.size() || values.size() != scales.size())
    fail(ErrorCode::kInvalidArgument, "factorized_encode: size mismatch");
  RangeEncoder enc;
  for (std::size_t i = 0; i < values.size(); ++i)
    encode_value(enc, gaussian_model(means[i], scales[i]), values[i]);
  return enc.finish();
}

std::vector<int64_t>
factorized_decode(std::span<const uint8_t> bytes, std::span<const double> means, std::span<const double> scales)
{
  if (means.size() != scales.size())
    fail(ErrorCode::kInvalidArgument, "factorized_decode: size mismatch");
  RangeDecoder dec(bytes);
  std::vector<int64_t> out;
  for (std::size_t i = 0; i < means.size(); ++i)
    out.push_back(decode_value(dec, gaussian_model(means[i], scales[i])));
  return out;
}

double
factorized_bits(std::span<const int64_t> values, std::span<const double> means, std::span<const double> scales)
{
  double bits = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i)
    bits += gaussian_model(means[i], scales[i]).bits(values[i]);
  return bits;
}

}  // namespace spac::entropy
