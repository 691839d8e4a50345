// Copyright 2026 The spac Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace spac::entropy {

inline constexpr int kFreqBits = 16;
inline constexpr uint32_t kFreqTotal = 1u << kFreqBits;

// Carry-propagating range encoder with a 64-bit low, 32-bit range and byte
// output.  Every symbol is coded against a total of 2^16.
class RangeEncoder {
 public:
  // Requires freq >= 1 and cum + freq <= 2^16.
  void encode(uint32_t cum, uint32_t freq);
  // Equiprobable bits, most significant first; nbits <= 32.
  void encode_bits(uint32_t value, int nbits);
  // Flushes the coder state; the encoder must not be used afterwards.
  std::vector<uint8_t> finish();

  std::size_t bytes_so_far() const { return out_.size(); }

 private:
  void shift_low();

  uint64_t low_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  uint8_t cache_ = 0;
  uint64_t cache_size_ = 1;
  std::vector<uint8_t> out_;
};

class RangeDecoder {
 public:
  // Throws kTruncatedStream if fewer than 5 bytes are available.
  explicit RangeDecoder(std::span<const uint8_t> data);

  // Target value in [0, 2^16) for the next symbol; follow with consume().
  uint32_t peek();
  void consume(uint32_t cum, uint32_t freq);
  uint32_t decode_bits(int nbits);

  std::size_t position() const { return pos_; }

 private:
  uint8_t next_byte();
  void normalize();

  std::span<const uint8_t> data_;
  std::size_t pos_ = 0;
  uint32_t code_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  uint32_t step_ = 0;
};

//============================================================================

// Integer frequencies summing to 2^16, each >= 1.
struct FrequencyTable {
  std::vector<uint32_t> freq;
  std::vector<uint32_t> cum;  // size() + 1 entries

  std::size_t size() const { return freq.size(); }
  // Each symbol gets 1 + floor(p / sum * (2^16 - n)); the leftover units go
  // to the largest fractional parts, ties to the lower index.
  static FrequencyTable from_probabilities(std::span<const double> probs);
  // Symbol s with cum[s] <= target < cum[s + 1].
  uint32_t find(uint32_t target) const;
  double bits(std::size_t symbol) const;
};

void encode_symbol(RangeEncoder& enc, const FrequencyTable& table, uint32_t symbol);
uint32_t decode_symbol(RangeDecoder& dec, const FrequencyTable& table);

// One table per symbol.
std::vector<uint8_t> rc_encode(std::span<const uint32_t> symbols, std::span<const FrequencyTable> tables);
std::vector<uint32_t> rc_decode(std::span<const uint8_t> bytes, std::span<const FrequencyTable> tables);

// Sum of -log2 p.  Throws kZeroFrequency for p <= 0.
double estimate_bits(std::span<const double> probabilities);

//============================================================================

// Adaptive binary model: counts start at 1/1, the coded bit's count grows
// by one and both halve once their sum reaches 2^16.
class AdaptiveBit {
 public:
  void encode(RangeEncoder& enc, int bit);
  int decode(RangeDecoder& dec);

 private:
  uint32_t zero_freq() const;
  void update(int bit);

  uint32_t c0_ = 1;
  uint32_t c1_ = 1;
};

}  // namespace spac::entropy
