// Copyright 2026 The spac Authors
// SPDX-License-Identifier: Apache-2.0

#include "spac/nn/model.hpp"

#include <cmath>

#include "spac/bytes.hpp"
#include "spac/error.hpp"
#include "spac/rng.hpp"

namespace spac::nn {

namespace {

constexpr char kMagic[] = "SPACW";
constexpr std::size_t kMagicSize = 5;

std::string
layer_name(const char* stem, int layer)
{
  return stem + std::to_string(layer);
}

}  // namespace

uint64_t
fnv1a64(std::span<const uint8_t> bytes, uint64_t seed)
{
  uint64_t h = seed;
  for (uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

NetworkConfig
NetworkConfig::with_layers(int num_layers)
{
  NetworkConfig c;
  c.num_layers = num_layers;
  c.depths.clear();
  for (int l = 1; l <= num_layers; ++l)
    c.depths.push_back(l + 1);
  return c;
}

void
NetworkConfig::validate() const
{
  auto bad = [](const std::string& what) { fail(ErrorCode::kInvalidArgument, "network config: " + what); };
  if (num_layers < 1 || num_layers > 6)
    bad("layer count must be in [1, 6]");
  if (static_cast<int>(depths.size()) != num_layers)
    bad("one depth per layer required");
  for (int i = 0; i < num_layers; ++i) {
    if (depths[i] < 1)
      bad("depths must be positive");
    if (i > 0 && depths[i] <= depths[i - 1])
      bad("depths must increase with the layer index");
  }
  if (width < 1 || latent_dim < 1 || hyper_dim < 1 || context_rows < 1)
    bad("dimensions must be positive");
  if (heads != 1)
    bad("only single-head attention is supported");
  if (!(delta_min > 0.0) || !(delta_max > delta_min))
    bad("step range must satisfy 0 < min < max");
}

//============================================================================

void
ModelWeights::add(const std::string& name, Matrix value)
{
  params_.emplace(name, Tensor::parameter(std::move(value)));
}

ModelWeights
ModelWeights::initialize(const NetworkConfig& config, uint64_t seed)
{
  config.validate();
  ModelWeights m;
  m.config_ = config;
  Rng rng(seed);
  const int W = config.width;
  const int dy = config.latent_dim;
  const int dz = config.hyper_dim;

  auto glorot = [&](int in, int out) {
    const double a = std::sqrt(6.0 / double(in + out));
    Matrix v(in, out);
    for (Eigen::Index i = 0; i < v.size(); ++i)
      v.data()[i] = rng.uniform(-a, a);
    return v;
  };
  auto zeros = [](int r, int c) { return Matrix(Matrix::Zero(r, c)); };
  auto conv = [&](const std::string& p, int in, int out) {
    m.add(p + ".self", glorot(in, out));
    m.add(p + ".neigh", glorot(in, out));
    m.add(p + ".bias", zeros(1, out));
  };
  auto attention = [&](const std::string& p) {
    m.add(p + ".q", glorot(W, W));
    m.add(p + ".k", glorot(W, W));
    m.add(p + ".v", glorot(W, W));
    m.add(p + ".o", glorot(W, W));
    m.add(p + ".o_bias", zeros(1, W));
  };

  for (int l = 1; l <= config.num_layers; ++l) {
    const std::string f = layer_name("fnet", l);
    for (int k = 0; k < config.depth(l); ++k)
      conv(f + ".conv" + std::to_string(k), k == 0 ? 3 : W, W);
    attention(f + ".attn");
    conv(f + ".refine.a", W + 3, W);
    conv(f + ".refine.b", W, W);
    m.add(f + ".head.w", glorot(W, dy));
    m.add(f + ".head.b", zeros(1, dy));

    const std::string r = layer_name("refnet", l);
    m.add(r + ".in.w", glorot(dy, W));
    m.add(r + ".in.b", zeros(1, W));
    m.add(r + ".pos.w", glorot(3, W));
    for (int k = 0; k < config.depth(l); ++k)
      conv(r + ".conv" + std::to_string(k), W, W);

    const std::string a = layer_name("adapt", l);
    m.add(a + ".w", glorot(W, dy));
    m.add(a + ".b", zeros(1, dy));

    m.add(layer_name("ctx", l) + ".w", glorot(config.context_rows * dy, dy));

    const std::string p = layer_name("param", l);
    m.add(p + ".w1", glorot(2 * dy, W));
    m.add(p + ".b1", zeros(1, W));
    m.add(p + ".w2", glorot(W, 2 * dy));
    m.add(p + ".b2", zeros(1, 2 * dy));

    const std::string h = layer_name("hsq", l);
    m.add(h + ".w", glorot(2 * dy, dy));
    m.add(h + ".b", Matrix(Matrix::Constant(1, dy, -2.0)));
  }

  attention("recon.attn");
  conv("recon.conv", W, W);
  // Small head so the initial reconstruction sits near mid-gray.
  m.add("recon.head.w", Matrix(0.1 * glorot(W, 3)));
  m.add("recon.head.b", Matrix(Matrix::Constant(1, 3, 0.5)));

  m.add("hyper.enc.w1", glorot(dy, W));
  m.add("hyper.enc.b1", zeros(1, W));
  m.add("hyper.enc.w2", glorot(W, dz));
  m.add("hyper.enc.b2", zeros(1, dz));
  m.add("hyper.prior.mean", zeros(1, dz));
  m.add("hyper.prior.log_scale", zeros(1, dz));
  m.add("hyper.dec.w", glorot(dz, W));
  m.add("hyper.dec.b", zeros(1, W));
  return m;
}

const Tensor&
ModelWeights::at(const std::string& name) const
{
  auto it = params_.find(name);
  if (it == params_.end())
    fail(ErrorCode::kConfigMismatch, "missing parameter " + name);
  return it->second;
}

Tensor&
ModelWeights::at(const std::string& name)
{
  auto it = params_.find(name);
  if (it == params_.end())
    fail(ErrorCode::kConfigMismatch, "missing parameter " + name);
  return it->second;
}

std::size_t
ModelWeights::parameter_count() const
{
  std::size_t n = 0;
  for (const auto& [_, t] : params_)
    n += static_cast<std::size_t>(t.value().size());
  return n;
}

void
ModelWeights::zero_grad()
{
  for (auto& [_, t] : params_)
    t.zero_grad();
}

void
ModelWeights::round_to_float()
{
  for (auto& [_, t] : params_)
    for (Eigen::Index i = 0; i < t.value().size(); ++i)
      t.mutable_value().data()[i] = static_cast<double>(static_cast<float>(t.value().data()[i]));
}

//============================================================================

std::vector<uint8_t>
ModelWeights::serialize() const
{
  ByteWriter w;
  w.text(std::string_view(kMagic, kMagicSize));
  w.u32(kCheckpointVersion);
  w.i32(config_.num_layers);
  w.i32(config_.width);
  w.i32(config_.latent_dim);
  w.i32(config_.hyper_dim);
  w.i32(config_.heads);
  w.i32(config_.context_rows);
  w.f64(config_.delta_min);
  w.f64(config_.delta_max);
  w.u32(static_cast<uint32_t>(config_.depths.size()));
  for (int d : config_.depths)
    w.i32(d);

  w.u32(static_cast<uint32_t>(params_.size()));
  uint64_t offset = 0;
  for (const auto& [name, t] : params_) {
    w.u32(static_cast<uint32_t>(name.size()));
    w.text(name);
    w.u32(static_cast<uint32_t>(t.rows()));
    w.u32(static_cast<uint32_t>(t.cols()));
    w.u64(offset);
    offset += static_cast<uint64_t>(t.value().size());
  }
  w.u64(offset);
  for (const auto& [name, t] : params_) {
    for (Eigen::Index i = 0; i < t.value().size(); ++i) {
      const double v = t.value().data()[i];
      if (!std::isfinite(v))
        fail(ErrorCode::kNumericalError, "non-finite value in parameter " + name);
      w.f32(static_cast<float>(v));
    }
  }
  const uint64_t h = fnv1a64(w.data());
  w.u64(h);
  return w.take();
}

ModelWeights
ModelWeights::deserialize(std::span<const uint8_t> bytes)
{
  if (bytes.size() < kMagicSize + 8)
    fail(ErrorCode::kMalformedHeader, "checkpoint too short");
  const auto body = bytes.first(bytes.size() - 8);
  ByteReader tail(bytes.last(8));
  if (tail.u64() != fnv1a64(body))
    fail(ErrorCode::kHashMismatch, "checkpoint hash does not match its contents");

  ByteReader r(body, ErrorCode::kMalformedHeader);
  if (r.text(kMagicSize) != std::string_view(kMagic, kMagicSize))
    fail(ErrorCode::kMalformedHeader, "not a SPACW checkpoint");
  if (r.u32() != kCheckpointVersion)
    fail(ErrorCode::kMalformedHeader, "unsupported checkpoint version");
  ModelWeights m;
  NetworkConfig& c = m.config_;
  c.num_layers = r.i32();
  c.width = r.i32();
  c.latent_dim = r.i32();
  c.hyper_dim = r.i32();
  c.heads = r.i32();
  c.context_rows = r.i32();
  c.delta_min = r.f64();
  c.delta_max = r.f64();
  const uint32_t nd = r.u32();
  if (nd > 64)
    fail(ErrorCode::kMalformedHeader, "implausible depth list");
  c.depths.resize(nd);
  for (auto& d : c.depths)
    d = r.i32();
  c.validate();

  struct Entry {
    std::string name;
    uint32_t rows, cols;
    uint64_t offset;
  };
  const uint32_t count = r.u32();
  std::vector<Entry> entries;
  for (uint32_t i = 0; i < count; ++i) {
    Entry e;
    const uint32_t len = r.u32();
    e.name = r.text(len);
    e.rows = r.u32();
    e.cols = r.u32();
    e.offset = r.u64();
    entries.push_back(std::move(e));
  }
  const uint64_t total = r.u64();
  if (total * 4 != r.remaining())
    fail(ErrorCode::kMalformedHeader, "payload size does not match manifest");
  const auto payload = r.bytes(r.remaining());
  for (const auto& e : entries) {
    const uint64_t n = uint64_t(e.rows) * e.cols;
    if (e.offset + n > total)
      fail(ErrorCode::kMalformedHeader, "parameter " + e.name + " exceeds payload");
    ByteReader pr(payload.subspan(e.offset * 4, n * 4), ErrorCode::kMalformedHeader);
    Matrix v(e.rows, e.cols);
    for (uint64_t i = 0; i < n; ++i)
      v.data()[i] = static_cast<double>(pr.f32());
    m.add(e.name, std::move(v));
  }

  // The manifest must describe exactly the parameters of this configuration.
  const ModelWeights ref = initialize(c, 0);
  if (ref.params_.size() != m.params_.size())
    fail(ErrorCode::kConfigMismatch, "checkpoint parameter set does not match its configuration");
  for (const auto& [name, t] : ref.params_) {
    const Tensor& got = m.at(name);
    if (got.shape() != t.shape())
      fail(ErrorCode::kConfigMismatch, "shape mismatch for parameter " + name);
  }
  return m;
}

void
ModelWeights::save(const std::filesystem::path& path) const
{
  write_file(path.string(), serialize());
}

ModelWeights
ModelWeights::load(const std::filesystem::path& path)
{
  return deserialize(read_file(path.string()));
}

uint64_t
ModelWeights::hash() const
{
  const auto bytes = serialize();
  ByteReader r(std::span<const uint8_t>(bytes).last(8));
  return r.u64();
}

}  // namespace spac::nn
