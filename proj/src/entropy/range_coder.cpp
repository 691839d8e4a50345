// Copyright 2026 The spac Authors
// SPDX-License-Identifier: Apache-2.0

#include "spac/entropy/range_coder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "spac/error.hpp"

namespace spac::entropy {

namespace {
constexpr uint32_t kTop = 1u << 24;
}  // namespace

void
RangeEncoder::encode(uint32_t cum, uint32_t freq)
{
  if (freq == 0)
    fail(ErrorCode::kZeroFrequency, "range coder: zero-frequency symbol");
  if (cum + freq > kFreqTotal)
    fail(ErrorCode::kInvalidArgument, "range coder: interval exceeds total");
  const uint32_t r = range_ >> kFreqBits;
  low_ += uint64_t(r) * cum;
  range_ = r * freq;
  while (range_ < kTop) {
    range_ <<= 8;
    shift_low();
  }
}

void
RangeEncoder::encode_bits(uint32_t value, int nbits)
{
  for (int i = nbits - 1; i >= 0; --i) {
    const uint32_t bit = (value >> i) & 1u;
    encode(bit ? kFreqTotal / 2 : 0, kFreqTotal / 2);
  }
}

void
RangeEncoder::shift_low()
{
  if (uint32_t(low_) < 0xFF000000u || (low_ >> 32) != 0) {
    const uint8_t carry = uint8_t(low_ >> 32);
    uint8_t temp = cache_;
    do {
      out_.push_back(uint8_t(temp + carry));
      temp = 0xFF;
    } while (--cache_size_ != 0);
    cache_ = uint8_t(low_ >> 24);
  }
  ++cache_size_;
  low_ = (low_ & 0x00FFFFFFu) << 8;
}

std::vector<uint8_t>
RangeEncoder::finish()
{
  for (int i = 0; i < 5; ++i)
    shift_low();
  return std::move(out_);
}

//============================================================================

RangeDecoder::RangeDecoder(std::span<const uint8_t> data) : data_(data)
{
  for (int i = 0; i < 5; ++i)
    code_ = (code_ << 8) | next_byte();
}

uint8_t
RangeDecoder::next_byte()
{
  if (pos_ >= data_.size())
    fail(ErrorCode::kTruncatedStream, "range decoder ran past the end of its chunk");
  return data_[pos_++];
}

uint32_t
RangeDecoder::peek()
{
  step_ = range_ >> kFreqBits;
  const uint32_t v = code_ / step_;
  if (v >= kFreqTotal)
    fail(ErrorCode::kCorruptChunk, "range decoder: code outside the interval");
  return v;
}

void
RangeDecoder::consume(uint32_t cum, uint32_t freq)
{
  code_ -= step_ * cum;
  range_ = step_ * freq;
  normalize();
}

void
RangeDecoder::normalize()
{
  while (range_ < kTop) {
    code_ = (code_ << 8) | next_byte();
    range_ <<= 8;
  }
}

uint32_t
RangeDecoder::decode_bits(int nbits)
{
  uint32_t v = 0;
  for (int i = 0; i < nbits; ++i) {
    const uint32_t bit = peek() >= kFreqTotal / 2 ? 1u : 0u;
    consume(bit ? kFreqTotal / 2 : 0, kFreqTotal / 2);
    v = (v << 1) | bit;
  }
  return v;
}

//============================================================================

FrequencyTable
FrequencyTable::from_probabilities(std::span<const double> probs)
{
  const std::size_t n = probs.size();
  if (n == 0 || n > kFreqTotal)
    fail(ErrorCode::kInvalidArgument, "frequency table: alphabet size out of range");
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p))
      fail(ErrorCode::kNumericalError, "frequency table: invalid probability");
    total += p;
  }
  FrequencyTable t;
  t.freq.assign(n, 1);
  const uint32_t spare = kFreqTotal - uint32_t(n);
  std::vector<double> frac(n, 0.0);
  uint32_t used = uint32_t(n);
  if (total > 0.0) {
    for (std::size_t i = 0; i < n; ++i) {
      const double share = probs[i] / total * spare;
      const double whole = std::floor(share);
      t.freq[i] += uint32_t(whole);
      used += uint32_t(whole);
      frac[i] = share - whole;
    }
  }
  uint32_t left = kFreqTotal - used;
  if (left > 0) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
    for (std::size_t k = 0; left > 0; k = (k + 1) % n, --left)
      ++t.freq[order[k]];
  }
  t.cum.resize(n + 1);
  t.cum[0] = 0;
  for (std::size_t i = 0; i < n; ++i)
    t.cum[i + 1] = t.cum[i] + t.freq[i];
  return t;
}

uint32_t
FrequencyTable::find(uint32_t target) const
{
  auto it = std::upper_bound(cum.begin(), cum.end(), target);
  return uint32_t(std::distance(cum.begin(), it) - 1);
}

double
FrequencyTable::bits(std::size_t symbol) const
{
  return double(kFreqBits) - std::log2(double(freq.at(symbol)));
}

void
encode_symbol(RangeEncoder& enc, const FrequencyTable& table, uint32_t symbol)
{
  if (symbol >= table.size())
    fail(ErrorCode::kOutOfRange, "symbol outside its alphabet");
  enc.encode(table.cum[symbol], table.freq[symbol]);
}

uint32_t
decode_symbol(RangeDecoder& dec, const FrequencyTable& table)
{
  const uint32_t s = table.find(dec.peek());
  dec.consume(table.cum[s], table.freq[s]);
  return s;
}

std::vector<uint8_t>
rc_encode(std::span<const uint32_t> symbols, std::span<const FrequencyTable> tables)
{
  if (symbols.size() != tables.size())
    fail(ErrorCode::kInvalidArgument, "rc_encode: one table per symbol required");
  RangeEncoder enc;
  for (std::size_t i = 0; i < symbols.size(); ++i)
    encode_symbol(enc, tables[i], symbols[i]);
  return enc.finish();
}

std::vector<uint32_t>
rc_decode(std::span<const uint8_t> bytes, std::span<const FrequencyTable> tables)
{
  RangeDecoder dec(bytes);
  std::vector<uint32_t> out;
  out.reserve(tables.size());
  for (const auto& t : tables)
    out.push_back(decode_symbol(dec, t));
  return out;
}

double
estimate_bits(std::span<const double> probabilities)
{
  double bits = 0.0;
  for (double p : probabilities) {
    if (!(p > 0.0))
      fail(ErrorCode::kZeroFrequency, "estimate_bits: zero probability");
    bits -= std::log2(p);
  }
  return bits;
}

//============================================================================

uint32_t
AdaptiveBit::zero_freq() const
{
  const uint64_t f = (uint64_t(c0_) << kFreqBits) / (uint64_t(c0_) + c1_);
  return uint32_t(std::clamp<uint64_t>(f, 1, kFreqTotal - 1));
}

void
AdaptiveBit::update(int bit)
{
  (bit ? c1_ : c0_) += 1;
  if (c0_ + c1_ >= kFreqTotal) {
    c0_ = std::max(1u, c0_ / 2);
    c1_ = std::max(1u, c1_ / 2);
  }
}

void
AdaptiveBit::encode(RangeEncoder& enc, int bit)
{
  const uint32_t f0 = zero_freq();
  if (bit)
    enc.encode(f0, kFreqTotal - f0);
  else
    enc.encode(0, f0);
  update(bit);
}

int
AdaptiveBit::decode(RangeDecoder& dec)
{
  const uint32_t f0 = zero_freq();
  const int bit = dec.peek() >= f0 ? 1 : 0;
  if (bit)
    dec.consume(f0, kFreqTotal - f0);
  else
    dec.consume(0, f0);
  update(bit);
  return bit;
}

}  // namespace spac::entropy
