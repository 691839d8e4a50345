// Copyright 2026 The spac Authors
// SPDX-License-Identifier: Apache-2.0

#include "spac/codec/bitstream.hpp"

#include <sstream>

#include "spac/bytes.hpp"
#include "spac/cloud.hpp"
#include "spac/error.hpp"
#include "spac/layer_pyramid.hpp"

namespace spac::codec {

namespace {
constexpr char kMagic[4] = {'S', 'P', 'A', 'C'};
}  // namespace

std::vector<ChunkRef>
expected_chunks(const StreamHeader& header)
{
  std::vector<ChunkRef> out;
  out.push_back({ChunkKind::kMasks, 0, 0, 0});
  if (header.has_hyper())
    out.push_back({ChunkKind::kHyper, 0, 0, 0});
  for (int l = header.num_layers; l >= 1; --l)
    if (header.layer_points[std::size_t(l - 1)] > 0)
      out.push_back({ChunkKind::kLatent, l, 0, 0});
  return out;
}

std::vector<uint8_t>
write_header(const StreamHeader& h)
{
  ByteWriter w;
  w.bytes(std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(kMagic), 4));
  w.u8(h.version);
  w.u8(uint8_t(h.bitdepth));
  w.u32(h.omega);
  w.u32(h.q_centi);
  w.f64(h.tau);
  w.u8(uint8_t(h.num_layers));
  w.u64(h.model_hash);
  w.u8(uint8_t(h.lambda_index));
  w.u64(h.total_points);
  for (int l = 0; l < h.num_layers; ++l)
    w.u64(h.layer_points[std::size_t(l)]);
  for (int l = 0; l < h.num_layers; ++l)
    w.u8(h.layer_empty[std::size_t(l)]);
  return w.take();
}

void
append_chunk(std::vector<uint8_t>& stream, std::span<const uint8_t> payload)
{
  ByteWriter w;
  w.u32(uint32_t(payload.size()));
  stream.insert(stream.end(), w.data().begin(), w.data().end());
  stream.insert(stream.end(), payload.begin(), payload.end());
}

const ChunkRef*
StreamLayout::find(ChunkKind kind, int layer) const
{
  for (const auto& c : chunks)
    if (c.kind == kind && (kind != ChunkKind::kLatent || c.layer == layer))
      return &c;
  return nullptr;
}

std::size_t
StreamLayout::prefix_bytes(int layer) const
{
  if (layer < 1 || layer > header.num_layers)
    fail(ErrorCode::kOutOfRange, "layer out of range");
  if (layer < decodable_layer || decodable_layer == 0)
    fail(ErrorCode::kTruncatedStream, "stream does not reach layer " + std::to_string(layer));
  std::size_t end = header_bytes;
  for (const auto& c : chunks) {
    if (c.kind == ChunkKind::kLatent && c.layer < layer)
      break;
    end = c.offset + c.length;
  }
  return end;
}

StreamLayout
inspect_stream(std::span<const uint8_t> bytes)
{
  ByteReader r(bytes, ErrorCode::kMalformedHeader);
  StreamLayout out;
  StreamHeader& h = out.header;
  if (r.text(4) != std::string(kMagic, 4))
    fail(ErrorCode::kMalformedHeader, "not a SPAC stream");
  h.version = r.u8();
  if (h.version != kStreamVersion)
    fail(ErrorCode::kMalformedHeader, "unsupported stream version");
  h.bitdepth = r.u8();
  h.omega = r.u32();
  h.q_centi = r.u32();
  h.tau = r.f64();
  h.num_layers = r.u8();
  h.model_hash = r.u64();
  h.lambda_index = r.u8();
  h.total_points = r.u64();
  if (h.bitdepth < kMinBitdepth || h.bitdepth > kMaxBitdepth || h.num_layers < 1 || h.num_layers > kMaxLayers)
    fail(ErrorCode::kMalformedHeader, "header field out of range");
  uint64_t sum = 0;
  for (int l = 0; l < h.num_layers; ++l) {
    h.layer_points.push_back(r.u64());
    sum += h.layer_points.back();
  }
  for (int l = 0; l < h.num_layers; ++l) {
    h.layer_empty.push_back(r.u8());
    if ((h.layer_empty.back() != 0) != (h.layer_points[std::size_t(l)] == 0))
      fail(ErrorCode::kMalformedHeader, "empty flag disagrees with layer size");
  }
  if (sum != h.total_points || h.total_points == 0)
    fail(ErrorCode::kMalformedHeader, "layer sizes do not add up");
  out.header_bytes = r.position();
  out.total_bytes = bytes.size();

  // Walk complete chunks in their implied order.
  std::size_t pos = out.header_bytes;
  for (ChunkRef c : expected_chunks(h)) {
    if (bytes.size() - pos < 4)
      break;
    ByteReader lr(bytes.subspan(pos, 4));
    const std::size_t len = lr.u32();
    if (bytes.size() - pos - 4 < len)
      break;
    c.offset = pos + 4;
    c.length = len;
    out.chunks.push_back(c);
    pos = c.offset + len;
  }
  if (pos != bytes.size() && out.chunks.size() == expected_chunks(h).size())
    fail(ErrorCode::kCorruptChunk, "trailing bytes after the last chunk");

  // Layers decodable from the chunks present.
  const bool masks = out.find(ChunkKind::kMasks) != nullptr;
  const bool hyper = !h.has_hyper() || out.find(ChunkKind::kHyper) != nullptr;
  if (masks && hyper) {
    for (int l = h.num_layers; l >= 1; --l) {
      if (h.layer_points[std::size_t(l - 1)] > 0 && out.find(ChunkKind::kLatent, l) == nullptr)
        break;
      out.decodable_layer = l;
    }
  }
  return out;
}

std::vector<uint8_t>
truncate_to_layer(std::span<const uint8_t> bytes, int layer)
{
  const StreamLayout layout = inspect_stream(bytes);
  const std::size_t n = layout.prefix_bytes(layer);
  return std::vector<uint8_t>(bytes.begin(), bytes.begin() + std::ptrdiff_t(n));
}

std::string
describe_stream(const StreamLayout& layout)
{
  const StreamHeader& h = layout.header;
  std::ostringstream os;
  os << "version " << int(h.version) << "\n"
     << "bitdepth " << h.bitdepth << "\n"
     << "omega " << h.omega << "\n"
     << "q_percent " << double(h.q_centi) / 100.0 << "\n"
     << "tau " << h.tau << "\n"
     << "layers " << h.num_layers << "\n"
     << "model_hash " << std::hex << h.model_hash << std::dec << "\n"
     << "lambda_index " << h.lambda_index << "\n"
     << "points " << h.total_points << "\n";
  for (int l = 1; l <= h.num_layers; ++l)
    os << "layer " << l << " points " << h.layer_points[std::size_t(l - 1)]
       << (h.layer_empty[std::size_t(l - 1)] ? " empty" : "") << "\n";
  os << "header_bytes " << layout.header_bytes << "\n";
  for (const auto& c : layout.chunks) {
    os << "chunk ";
    switch (c.kind) {
      case ChunkKind::kMasks: os << "masks"; break;
      case ChunkKind::kHyper: os << "hyper"; break;
      case ChunkKind::kLatent: os << "latent " << c.layer; break;
    }
    os << " bytes " << c.length + 4 << "\n";
  }
  os << "total_bytes " << layout.total_bytes << "\n"
     << "decodable_up_to_layer " << layout.decodable_layer << "\n";
  return os.str();
}

}  // namespace spac::codec
