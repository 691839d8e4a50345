// Copyright 2026 The spac Authors
// SPDX-License-Identifier: Apache-2.0

#include "spac/codec/train.hpp"

#include <cmath>
#if defined(__GLIBC__)
#include <malloc.h>
#endif
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "spac/bytes.hpp"
#include "spac/codec/codec.hpp"
#include "spac/error.hpp"
#include "spac/nn/adam.hpp"
#include "spac/nn/blocks.hpp"

namespace spac::codec {

using nn::Tensor;

TrainingSample
prepare_sample(const PointCloud& pc, const GroupSpec& spec, int num_layers, int threads)
{
  if (pc.colorspace != ColorSpace::kRGB8)
    fail(ErrorCode::kWrongColorSpace, "training expects RGB8 colours");
  pc.validate();
  TrainingSample s;
  s.cloud = pc;
  s.stack = decompose(pc, num_layers, spec, threads);
  s.inputs = prepare_layers(pc, s.stack.sources, s.stack.sets);
  return s;
}

double
rd_total(double distortion, double entropy_bits, double hyper_bits, double lambda1, double lambda2)
{
  return distortion + lambda1 * entropy_bits + lambda2 * hyper_bits;
}

namespace {

Tensor
sum_all(std::vector<Tensor>& parts)
{
  if (parts.empty())
    return Tensor::scalar(0.0);
  return nn::sum(nn::concat_rows(parts));
}

}  // namespace

RDLossBreakdown
rd_loss(const TrainingSample& sample, const nn::ModelWeights& w, const RDLossOptions& options, Rng& rng)
{
  const auto& cfg = w.config();
  const int L = cfg.num_layers;
  if (sample.stack.num_layers != L)
    fail(ErrorCode::kConfigMismatch, "sample layer count differs from the model");
  const int dy = cfg.latent_dim;
  const int dz = cfg.hyper_dim;

  std::vector<Tensor> y(static_cast<std::size_t>(L));
  for (int l = 1; l <= L; ++l) {
    const LayerInput& in = sample.inputs[std::size_t(l - 1)];
    if (in.points == 0)
      continue;
    y[std::size_t(l - 1)] = nn::fnet_forward(w, l, Tensor::constant(in.colors), Tensor::constant(in.normals),
                                             in.layout);
  }

  const LayerInput& base = sample.inputs[std::size_t(L - 1)];
  Tensor z_tilde = Tensor::constant(nn::Matrix::Zero(1, dz));
  Tensor z_bits = Tensor::scalar(0.0);
  if (base.points > 0) {
    const Tensor z = nn::hyper_encode(w, y[std::size_t(L - 1)]);
    if (options.straight_through) {
      z_tilde = nn::straight_through_quantize(z, Tensor::constant(nn::Matrix::Ones(1, dz)));
    } else {
      nn::Matrix u(1, dz);
      for (int c = 0; c < dz; ++c)
        u(0, c) = rng.uniform(-0.5, 0.5);
      z_tilde = nn::add(z, Tensor::constant(std::move(u)));
    }
    const nn::HyperPrior prior = nn::hyper_prior(w);
    z_bits = nn::sum(nn::gaussian_bits(z_tilde, prior.mean, prior.scale));
  }
  const Tensor h = nn::hyper_decode(w, z_tilde);

  std::vector<Tensor> distortion_terms, entropy_terms;
  Tensor base_rate = Tensor::scalar(0.0);
  const Tensor zero_row = Tensor::constant(nn::Matrix::Zero(1, dy));
  for (int l = L; l >= 1; --l) {
    const LayerInput& in = sample.inputs[std::size_t(l - 1)];
    if (in.points == 0)
      continue;
    const Tensor a = nn::layer_adapter(w, l, h);
    const Tensor& yl = y[std::size_t(l - 1)];
    std::vector<Tensor> rows, bits;
    rows.reserve(std::size_t(yl.rows()));
    bits.reserve(std::size_t(yl.rows()));
    std::vector<Tensor> window(std::size_t(cfg.context_rows));
    for (Eigen::Index t = 0; t < yl.rows(); ++t) {
      for (int k = 1; k <= cfg.context_rows; ++k)
        window[std::size_t(k - 1)] = t >= k ? rows[std::size_t(t - k)] : zero_row;
      const Tensor ctx = nn::context_features(w, l, nn::concat_cols(window));
      const nn::RowParams p = nn::param_head(w, l, ctx, a);
      const Tensor yt = nn::slice_rows(yl, t, 1);
      const Tensor q = options.straight_through ? nn::straight_through_quantize(yt, p.delta)
                                                : nn::quantize_train(yt, p.delta, rng);
      bits.push_back(nn::sum(nn::laplace_bits(q, p.mu, p.scale, p.delta)));
      rows.push_back(q);
    }
    const double inv_points = 1.0 / double(in.points);
    const Tensor rate = nn::scale(sum_all(bits), inv_points);
    entropy_terms.push_back(rate);
    if (l == L)
      base_rate = rate;

    if (!options.identity_reconstruction) {
      const Tensor yhat = nn::concat_rows(rows);
      const Tensor feats = nn::refnet_forward(w, l, yhat, Tensor::constant(in.rel_pos), in.layout);
      const Tensor colors = nn::reconnet_forward(w, feats, in.layout, false);
      const Tensor diff = nn::mask_rows(nn::sub(colors, Tensor::constant(in.colors)), in.layout);
      distortion_terms.push_back(nn::scale(nn::sum(nn::hadamard(diff, diff)), inv_points));
    }
  }

  const Tensor D = sum_all(distortion_terms);
  const Tensor E = sum_all(entropy_terms);
  Tensor H = base_rate;
  if (base.points > 0)
    H = nn::add(base_rate, nn::scale(z_bits, 1.0 / double(base.points)));
  const Tensor total = nn::add(nn::add(D, nn::scale(E, options.lambda1)), nn::scale(H, options.lambda2));

  RDLossBreakdown out;
  out.distortion = D.item();
  out.entropy_bits = E.item();
  out.hyper_bits = H.item();
  out.total = total.item();
  out.total_tensor = total;
  return out;
}

//============================================================================

namespace {

constexpr char kResumeMagic[] = "SPACR";
constexpr uint32_t kResumeVersion = 1;

struct ResumeState {
  int next_step = 0;
  nn::AdamState adam;
  std::vector<TrainLogRow> log;
};

void
save_resume(const std::string& path, const TrainConfig& cfg, const nn::ModelWeights& w, const ResumeState& s)
{
  ByteWriter out;
  out.text(std::string_view(kResumeMagic, 5));
  out.u32(kResumeVersion);
  out.u64(cfg.seed);
  out.f64(cfg.lambda1);
  out.u32(uint32_t(s.next_step));
  out.u32(uint32_t(w.params().size()));
  for (const auto& [name, t] : w.params()) {
    out.u32(uint32_t(name.size()));
    out.text(name);
    out.u32(uint32_t(t.rows()));
    out.u32(uint32_t(t.cols()));
    for (Eigen::Index i = 0; i < t.value().size(); ++i)
      out.f64(t.value().data()[i]);
  }
  s.adam.serialize(out);
  out.u32(uint32_t(s.log.size()));
  for (const auto& r : s.log) {
    out.u32(uint32_t(r.step));
    out.f64(r.distortion);
    out.f64(r.entropy_bits);
    out.f64(r.hyper_bits);
    out.f64(r.total);
  }
  const std::string tmp = path + ".tmp";
  write_file(tmp, out.data());
  std::filesystem::rename(tmp, path);
}

ResumeState
load_resume(const std::string& path, const TrainConfig& cfg, nn::ModelWeights& w)
{
  const auto bytes = read_file(path);
  ByteReader in(bytes, ErrorCode::kMalformedHeader);
  if (in.text(5) != std::string_view(kResumeMagic, 5) || in.u32() != kResumeVersion)
    fail(ErrorCode::kMalformedHeader, "not a training state file: " + path);
  if (in.u64() != cfg.seed || in.f64() != cfg.lambda1)
    fail(ErrorCode::kConfigMismatch, "training state was written with a different seed or lambda");
  ResumeState s;
  s.next_step = int(in.u32());
  const uint32_t count = in.u32();
  if (count != w.params().size())
    fail(ErrorCode::kConfigMismatch, "training state does not match the network configuration");
  for (uint32_t k = 0; k < count; ++k) {
    const std::string name = in.text(in.u32());
    const uint32_t rows = in.u32();
    const uint32_t cols = in.u32();
    nn::Tensor& t = w.at(name);
    if (t.rows() != Eigen::Index(rows) || t.cols() != Eigen::Index(cols))
      fail(ErrorCode::kConfigMismatch, "training state shape mismatch for " + name);
    for (Eigen::Index i = 0; i < t.value().size(); ++i)
      t.mutable_value().data()[i] = in.f64();
  }
  s.adam = nn::AdamState::deserialize(in);
  const uint32_t n = in.u32();
  for (uint32_t k = 0; k < n; ++k) {
    TrainLogRow r;
    r.step = int(in.u32());
    r.distortion = in.f64();
    r.entropy_bits = in.f64();
    r.hyper_bits = in.f64();
    r.total = in.f64();
    s.log.push_back(r);
  }
  return s;
}

uint64_t
step_seed(uint64_t seed, uint64_t step, uint64_t item)
{
  // splitmix64 finalizer over the combined key
  uint64_t x = seed + 0x9e3779b97f4a7c15ULL * (step * 1024 + item + 1);
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

void
write_loss_csv(const std::string& path, const std::vector<TrainLogRow>& log)
{
  std::ofstream out(path, std::ios::trunc);
  if (!out)
    fail(ErrorCode::kIoError, "cannot write " + path);
  out << "step,D,entropy_bits,hyper_bits,total\n" << std::setprecision(17);
  for (const auto& r : log)
    out << r.step << ',' << r.distortion << ',' << r.entropy_bits << ',' << r.hyper_bits << ',' << r.total << '\n';
  if (!out)
    fail(ErrorCode::kIoError, "write failed for " + path);
}

TrainResult
train(const std::vector<TrainingSample>& dataset, const TrainConfig& cfg)
{
  if (dataset.empty())
    fail(ErrorCode::kInvalidArgument, "train: empty dataset");
  if (!(cfg.lambda1 > 0.0) || !(cfg.lambda2 >= 0.0))
    fail(ErrorCode::kInvalidArgument, "train: lambda1 must be positive and lambda2 nonnegative");
  if (cfg.batch_size < 1 || cfg.max_steps < 0 || cfg.halve_every < 1)
    fail(ErrorCode::kInvalidArgument, "train: batch size, step count and schedule must be positive");

#if defined(__GLIBC__)
  // Keep large activation buffers on the heap between steps instead of
  // returning them to the kernel after every backward pass.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  nn::ModelWeights w = nn::ModelWeights::initialize(cfg.network, cfg.seed);
  ResumeState state;
  if (!cfg.resume_path.empty() && std::filesystem::exists(cfg.resume_path))
    state = load_resume(cfg.resume_path, cfg, w);

  RDLossOptions opts;
  opts.lambda1 = cfg.lambda1;
  opts.lambda2 = cfg.lambda2;
  opts.straight_through = cfg.straight_through;
  const std::size_t n = dataset.size();
  const double inv_batch = 1.0 / double(cfg.batch_size);

  for (int step = state.next_step; step < cfg.max_steps; ++step) {
    const uint64_t epoch = uint64_t(step) * uint64_t(cfg.batch_size) / n;
    const double lr = cfg.learning_rate * std::pow(0.5, double(epoch / uint64_t(cfg.halve_every)));
    TrainLogRow row;
    row.step = step;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const std::size_t item = (std::size_t(step) * std::size_t(cfg.batch_size) + std::size_t(b)) % n;
      Rng rng(step_seed(cfg.seed, uint64_t(step), uint64_t(b)));
      const RDLossBreakdown loss = rd_loss(dataset[item], w, opts, rng);
      if (!std::isfinite(loss.total))
        fail(ErrorCode::kNumericalError,
             "training diverged at step " + std::to_string(step) + " (D " + std::to_string(loss.distortion) +
                 ", entropy " + std::to_string(loss.entropy_bits) + ", hyper " +
                 std::to_string(loss.hyper_bits) + ")");
      nn::scale(loss.total_tensor, inv_batch).backward();
      row.distortion += loss.distortion * inv_batch;
      row.entropy_bits += loss.entropy_bits * inv_batch;
      row.hyper_bits += loss.hyper_bits * inv_batch;
      row.total += loss.total * inv_batch;
    }
    state.log.push_back(row);
    nn::adam_step(w, state.adam, lr);
    state.next_step = step + 1;
    if (cfg.save_every > 0 && state.next_step % cfg.save_every == 0) {
      if (!cfg.resume_path.empty())
        save_resume(cfg.resume_path, cfg, w, state);
      if (!cfg.csv_path.empty())
        write_loss_csv(cfg.csv_path, state.log);
    }
  }
  if (!cfg.resume_path.empty())
    save_resume(cfg.resume_path, cfg, w, state);
  if (!cfg.csv_path.empty())
    write_loss_csv(cfg.csv_path, state.log);

  TrainResult out;
  w.round_to_float();
  w.zero_grad();
  out.weights = std::move(w);
  out.log = std::move(state.log);
  return out;
}

}  // namespace spac::codec
