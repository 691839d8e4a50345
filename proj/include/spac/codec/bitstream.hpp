// Copyright 2026 The spac Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace spac::codec {

inline constexpr uint8_t kStreamVersion = 1;

struct StreamHeader {
  uint8_t version = kStreamVersion;
  int bitdepth = 10;
  uint32_t omega = 1024;
  uint32_t q_centi = 6000;  // q percent times 100
  double tau = 1e-3;
  int num_layers = 4;
  uint64_t model_hash = 0;
  int lambda_index = 0;
  uint64_t total_points = 0;
  std::vector<uint64_t> layer_points;  // [l - 1]
  std::vector<uint8_t> layer_empty;    // [l - 1]

  bool has_hyper() const { return layer_points.at(std::size_t(num_layers - 1)) > 0; }
};

enum class ChunkKind : uint8_t { kMasks, kHyper, kLatent };

struct ChunkRef {
  ChunkKind kind = ChunkKind::kMasks;
  int layer = 0;  // latent chunks only
  std::size_t offset = 0;  // payload start
  std::size_t length = 0;
};

// Chunk order implied by a header: masks, hyper (when the base layer has
// points), then latents for non-empty layers L down to 1.
std::vector<ChunkRef> expected_chunks(const StreamHeader& header);

std::vector<uint8_t> write_header(const StreamHeader& header);

// Parsed layout of a possibly truncated stream.  Only complete chunks are
// listed.
struct StreamLayout {
  StreamHeader header;
  std::size_t header_bytes = 0;
  std::vector<ChunkRef> chunks;
  std::size_t total_bytes = 0;
  // Smallest layer l whose prefix is present (0 when not even the base is).
  int decodable_layer = 0;

  const ChunkRef* find(ChunkKind kind, int layer = 0) const;
  // Byte count of the prefix that decodes layers >= l.
  std::size_t prefix_bytes(int layer) const;
};

StreamLayout inspect_stream(std::span<const uint8_t> bytes);

// Copy of the stream cut right after the chunks needed for layer l.
std::vector<uint8_t> truncate_to_layer(std::span<const uint8_t> bytes, int layer);

void append_chunk(std::vector<uint8_t>& stream, std::span<const uint8_t> payload);

std::string describe_stream(const StreamLayout& layout);

}  // namespace spac::codec
