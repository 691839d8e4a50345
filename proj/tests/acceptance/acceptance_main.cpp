// Copyright 2026 The spac Authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance run.  Prints one PASS or FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "spac/codec/bitstream.hpp"
#include "spac/codec/codec.hpp"
#include "spac/codec/rd.hpp"
#include "spac/codec/synthetic.hpp"
#include "spac/codec/train.hpp"
#include "spac/entropy/models.hpp"
#include "spac/entropy/range_coder.hpp"
#include "spac/error.hpp"
#include "spac/eval/metrics.hpp"
#include "spac/freq_sampler.hpp"
#include "spac/layer_pyramid.hpp"
#include "spac/nn/blocks.hpp"
#include "support.hpp"

namespace spac {
namespace {

using Clock = std::chrono::steady_clock;
using testing::uniform_int;

double
seconds_since(Clock::time_point t0)
{
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string
fmt(const char* format, auto... args)
{
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

GroupSpec
spec_with(int omega, double q, double tau)
{
  GroupSpec s;
  s.omega = omega;
  s.q_percent = q;
  s.tau = tau;
  return s;
}

nn::NetworkConfig
codec_config(int latent_dim = 4, int width = 8)
{
  nn::NetworkConfig c = nn::NetworkConfig::with_layers(4);
  c.width = width;
  c.latent_dim = latent_dim;
  c.hyper_dim = 3;
  return c;
}

codec::CodecOptions
codec_options(int threads = 1)
{
  codec::CodecOptions o;
  o.spec.tau = 0.1;
  o.num_layers = 4;
  o.threads = threads;
  return o;
}

//============================================================================

Outcome
pipeline_losslessness()
{
  const auto t0 = Clock::now();
  Rng rng(1);
  int bad = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const PointCloud pc = testing::textured_cloud(rng, 50 + rng.below(400), 9);
    const int layers = 1 + trial % 4;
    const LayerStack st = decompose(pc, layers, spec_with(64, 60, rng.uniform(0.01, 0.3)));
    if (!(recompose(st, 1) == pc))
      ++bad;
  }
  const double dt = seconds_since(t0);
  return {bad == 0 && dt < 30.0, fmt("%d/200 clouds differ, %.1f s", bad, dt)};
}

Outcome
frequency_partition()
{
  Rng rng(2);
  int bad_partition = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(16);
    std::vector<Color> g(n);
    for (auto& c : g)
      c = {double(rng.below(256)), double(rng.below(256)), double(rng.below(256))};
    const auto split = select_high_points(g, spec_with(16, rng.uniform(1, 100), rng.uniform(1e-4, 0.9)));
    std::vector<std::size_t> all = split.high_indices;
    all.insert(all.end(), split.low_indices.begin(), split.low_indices.end());
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> expect(n);
    std::iota(expect.begin(), expect.end(), 0);
    if (all != expect)
      ++bad_partition;
  }

  const std::vector<Color> flat(64, Color{12, 200, 7});
  const bool constant_empty = select_high_points(flat, spec_with(64, 60, 1e-3)).high_indices.empty();

  std::vector<Color> step;
  for (double v : {100, 100, 100, 100, 200, 200, 200, 200})
    step.push_back({v, 0, 0});
  const std::vector<std::size_t> golden = {0, 2, 3, 4, 5, 7};
  const auto got = select_high_points(step, spec_with(8, 60, 0.05)).high_indices;
  const bool golden_ok = got == golden && testing::reference_selection(step, 60, 0.05) == golden;

  return {bad_partition == 0 && constant_empty && golden_ok,
          fmt("partition failures %d/1000, constant group empty %s, 8-point golden %s", bad_partition,
              constant_empty ? "yes" : "no", golden_ok ? "matches" : "differs")};
}

Outcome
fft_accuracy()
{
  Rng rng(3);
  double worst_fwd = 0.0, worst_rt = 0.0;
  for (std::size_t n = 8; n <= 1024; n *= 2) {
    std::vector<Complex> x(n);
    for (auto& v : x)
      v = {rng.uniform(-100, 100), rng.uniform(-100, 100)};
    const Spectrum fast = dft_forward(x);
    const auto slow = testing::naive_dft(x);
    const auto back = dft_inverse(fast);
    double num = 0.0, den = 0.0, rt = 0.0, mag = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      num = std::max(num, std::abs(fast[k] - slow[k]));
      den = std::max(den, std::abs(slow[k]));
      rt = std::max(rt, std::abs(back[k] - x[k]));
      mag = std::max(mag, std::abs(x[k]));
    }
    worst_fwd = std::max(worst_fwd, num / den);
    worst_rt = std::max(worst_rt, rt / mag);
  }
  return {worst_fwd <= 1e-9 && worst_rt <= 1e-9,
          fmt("max rel error vs naive DFT %.2e, round trip %.2e", worst_fwd, worst_rt)};
}

double
laplace_sample(Rng& rng, double mu, double b)
{
  const double u = rng.uniform(-0.5, 0.5);
  return mu - b * std::copysign(std::log(1.0 - 2.0 * std::abs(u)), u);
}

Outcome
range_coder()
{
  using namespace entropy;
  Rng rng(4);
  int fuzz_bad = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = std::size_t(uniform_int(rng, 0, 400));
    std::vector<FrequencyTable> tables;
    std::vector<uint32_t> symbols;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> p(std::size_t(uniform_int(rng, 2, 40)));
      for (auto& v : p) {
        const double u = rng.uniform(0.0, 1.0);
        v = u < 0.2 ? 1e-9 : std::pow(u, 4.0);
      }
      tables.push_back(FrequencyTable::from_probabilities(p));
      symbols.push_back(uint32_t(uniform_int(rng, 0, int64_t(p.size()) - 1)));
    }
    if (rc_decode(rc_encode(symbols, tables), tables) != symbols)
      ++fuzz_bad;
  }

  const FrequencyTable fair = FrequencyTable::from_probabilities(std::vector<double>{0.5, 0.5});
  std::vector<uint32_t> bits(10000);
  for (auto& s : bits)
    s = uint32_t(rng.below(2));
  const std::vector<FrequencyTable> fair_tables(bits.size(), fair);
  const std::size_t fair_len = rc_encode(bits, fair_tables).size();
  const bool fair_ok = fair_len >= 1249 && fair_len <= 1259;

  int rate_bad = 0;
  double worst_gap = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const int count = int(uniform_int(rng, 1, 64) * uniform_int(rng, 1, 16));
    RangeEncoder enc;
    double estimate = 0.0;
    for (int i = 0; i < count; ++i) {
      const double mu = rng.uniform(-20, 20);
      const double b = std::exp(rng.uniform(-3, 4));
      const double delta = rng.uniform(0.05, 4.0);
      const int64_t k = int64_t(std::nearbyint(laplace_sample(rng, mu, b) / delta));
      const DiscreteModel model = laplace_model(mu, b, delta);
      encode_value(enc, model, k);
      estimate += model.bits(k);
    }
    const double gap = std::abs(8.0 * double(enc.finish().size()) - estimate);
    worst_gap = std::max(worst_gap, gap);
    if (gap > 64.0 + 0.02 * estimate)
      ++rate_bad;
  }
  return {fuzz_bad == 0 && fair_ok && rate_bad == 0,
          fmt("fuzz failures %d/1000, fair binary %zu bytes, rate bound violations %d/500 (max gap %.1f bits)",
              fuzz_bad, fair_len, rate_bad, worst_gap)};
}

//============================================================================

nn::NetworkConfig
gradient_config()
{
  nn::NetworkConfig c = nn::NetworkConfig::with_layers(2);
  c.width = 6;
  c.latent_dim = 3;
  c.hyper_dim = 2;
  c.context_rows = 2;
  return c;
}

struct GradientReport {
  double worst = 0.0;
  std::string worst_name;
  int checked = 0;

  void
  add(const std::string& name, double e)
  {
    ++checked;
    if (e > worst) {
      worst = e;
      worst_name = name;
    }
  }
};

bool
has_prefix(const std::string& s, const std::string& p)
{
  return s.compare(0, p.size(), p) == 0;
}

Outcome
gradient_checks()
{
  using namespace nn;
  using testing::gradient_error;
  using testing::random_matrix;
  const auto t0 = Clock::now();
  GradientReport report;

  ModelWeights w = testing::jittered(gradient_config(), 11);
  Rng rng(12);
  BlockLayout layout;
  layout.blocks = 2;
  layout.valid = {1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0};
  Tensor x = Tensor::parameter(random_matrix(rng, 16, 6));
  Tensor colors = Tensor::parameter(random_matrix(rng, 16, 3, 0, 255));
  const Tensor normals = Tensor::constant(random_matrix(rng, 16, 3));
  const Tensor rel_pos = Tensor::constant(random_matrix(rng, 16, 3, -0.5, 0.5));
  Tensor latents = Tensor::parameter(random_matrix(rng, 2, 3));
  const Matrix probe16 = random_matrix(rng, 16, 6);
  auto probe = [&](const Tensor& t) {
    return sum(hadamard(t, Tensor::constant(probe16.leftCols(t.cols()).topRows(t.rows()))));
  };
  auto check = [&](const std::string& label, const std::vector<std::string>& prefixes, auto&& loss,
                   std::vector<Tensor> inputs, double floor = 1e-6) {
    for (const auto& [name, t] : w.params())
      for (const auto& p : prefixes)
        if (has_prefix(name, p))
          report.add(label + ":" + name, gradient_error(t, loss, 1e-4, floor));
    for (auto& in : inputs)
      report.add(label + ":input", gradient_error(in, loss));
  };

  check("conv", {"fnet1.conv1."}, [&] { return probe(neighbor_conv(w, "fnet1.conv1", x, layout)); }, {x});
  check("attention", {"fnet1.attn."}, [&] { return probe(offset_attention(w, "fnet1.attn", x, layout)); }, {x});
  check("refine", {"fnet1.refine."}, [&] { return probe(geometry_refine(w, "fnet1.refine", x, normals, layout)); },
        {x});
  check("analysis", {"fnet2."}, [&] { return probe(fnet_forward(w, 2, colors, normals, layout)); }, {});
  check("synthesis", {"refnet1.", "recon."},
        [&] { return probe(reconnet_forward(w, refnet_forward(w, 1, latents, rel_pos, layout), layout, false)); },
        {latents});

  Tensor base = Tensor::parameter(random_matrix(rng, 5, 3));
  Tensor ctx_in = Tensor::parameter(random_matrix(rng, 1, 6));
  const Matrix r = random_matrix(rng, 1, 3, 0.5, 1.5);
  check("heads", {"hyper.enc.", "hyper.dec.", "adapt1.", "ctx1.", "param1.", "hsq1."},
        [&] {
          const Tensor a = layer_adapter(w, 1, hyper_decode(w, hyper_encode(w, base)));
          const RowParams p = param_head(w, 1, context_features(w, 1, ctx_in), a);
          const Tensor c = Tensor::constant(r);
          return add(add(sum(hadamard(p.mu, c)), sum(hadamard(p.scale, c))), sum(hadamard(p.delta, c)));
        },
        {base, ctx_in});

  // Loss-level checks: the rate-distortion total is around 1e4, so absolute
  // differences below 1e-3 are rounding noise.
  const codec::TrainingSample sample =
      codec::prepare_sample(codec::synthetic_cloud(160, 3, 8), spec_with(64, 60, 0.1), 2);
  for (bool straight : {false, true}) {
    w = testing::jittered(gradient_config(), straight ? 22 : 21);
    codec::RDLossOptions o;
    o.lambda1 = 100;
    o.straight_through = straight;
    auto loss = [&] {
      Rng noise(5);
      return codec::rd_loss(sample, w, o, noise).total_tensor;
    };
    for (const auto& [name, t] : w.params()) {
      // Hard rounding makes the loss piecewise constant in parameters that
      // only feed the quantizer inputs.
      if (straight && (has_prefix(name, "fnet") || has_prefix(name, "hyper.enc.")))
        continue;
      report.add((straight ? "rounding:" : "noise:") + name, gradient_error(t, loss, 1e-4, 1e-3));
    }
  }
  const double dt = seconds_since(t0);
  return {report.worst < 1e-3 && dt < 120.0,
          fmt("%d tensors, max rel error %.2e (%s), %.1f s", report.checked, report.worst, report.worst_name.c_str(),
              dt)};
}

//============================================================================

Outcome
latent_agreement()
{
  Rng rng(6);
  int bad = 0;
  for (int model = 0; model < 50; ++model) {
    const auto w = nn::ModelWeights::initialize(codec_config(2 + int(rng.below(6)), 4 + int(rng.below(8))),
                                                1000 + uint64_t(model));
    const PointCloud pc = testing::textured_cloud(rng, 200 + rng.below(300), 8);
    const codec::EncodeResult e = codec::encode(pc, w, codec_options());
    const codec::DecodeResult d = codec::decode(e.bytes, pc, w, 1);
    bool same = e.z_hat.size() > 0;
    for (std::size_t l = 0; l < 4; ++l)
      same = same && d.latents[l] == e.latents[l];
    if (!same)
      ++bad;
  }
  return {bad == 0, fmt("%d/50 models with differing latents", bad)};
}

Outcome
progressive_decoding()
{
  const PointCloud pc = codec::synthetic_cloud(2000, 31, 8);
  const auto w = nn::ModelWeights::initialize(codec_config(), 7);
  const codec::EncodeResult e = codec::encode(pc, w, codec_options());
  const codec::StreamLayout layout = codec::inspect_stream(e.bytes);

  std::size_t parts = e.header_bytes + e.mask_bytes + e.hyper_bytes;
  for (std::size_t b : e.latent_bytes)
    parts += b;
  const bool accounting = parts == e.bytes.size() && layout.total_bytes == e.bytes.size();

  int bad = 0;
  std::ostringstream sizes;
  for (int l = 4; l >= 1; --l) {
    const auto prefix = codec::truncate_to_layer(e.bytes, l);
    sizes << " l" << l << "=" << prefix.size();
    const codec::DecodeResult d = codec::decode(prefix, pc, w, l);
    const codec::DecodeResult full = codec::decode(e.bytes, pc, w, l);
    PointCloud expected = recompose(e.stack, l);
    std::vector<Vec3i> got_geometry = d.cloud.geometry, want_geometry = expected.geometry;
    std::sort(got_geometry.begin(), got_geometry.end());
    std::sort(want_geometry.begin(), want_geometry.end());
    const bool ok = prefix.size() == layout.prefix_bytes(l) && got_geometry == want_geometry &&
                    d.cloud.colors == full.cloud.colors;
    bool rejects_lower = l == 1;
    if (l > 1) {
      try {
        codec::decode(prefix, pc, w, l - 1);
      } catch (const Error& err) {
        rejects_lower = err.code() == ErrorCode::kTruncatedStream;
      }
    }
    if (!ok || !rejects_lower)
      ++bad;
  }
  return {bad == 0 && accounting,
          fmt("%d/4 prefixes wrong, byte accounting %s (%zu bytes), prefixes%s", bad, accounting ? "exact" : "off",
              e.bytes.size(), sizes.str().c_str())};
}

//============================================================================

struct ToyRun {
  double first_loss = 0.0;
  double final_loss = 0.0;
  std::vector<codec::LayerRD> rd;  // layers 4..1
};

constexpr int kToySteps = 2400;

ToyRun
toy_training(const std::vector<codec::TrainingSample>& data, const GroupSpec& spec, double lambda1)
{
  codec::TrainConfig c;
  c.network = nn::NetworkConfig::with_layers(4);
  c.network.width = 16;
  c.network.latent_dim = 8;
  c.network.hyper_dim = 4;
  c.spec = spec;
  c.lambda1 = lambda1;
  c.lambda2 = 1.0;
  c.learning_rate = 1e-3;
  c.halve_every = 1000;
  c.max_steps = kToySteps;
  c.seed = 1;
  const codec::TrainResult r = codec::train(data, c);
  ToyRun run;
  run.first_loss = r.log.front().total;
  // The noise path makes single-step losses jumpy; average the tail.
  const std::size_t tail = std::min<std::size_t>(20, r.log.size());
  for (std::size_t i = r.log.size() - tail; i < r.log.size(); ++i)
    run.final_loss += r.log[i].total / double(tail);
  codec::CodecOptions o;
  o.spec = spec;
  o.num_layers = 4;
  run.rd = codec::rd_points(data.front().cloud, r.weights, o);
  return run;
}

Outcome
toy_rate_distortion()
{
  const auto t0 = Clock::now();
  const GroupSpec spec = spec_with(1024, 60, 0.1);
  const std::vector<codec::TrainingSample> data = {
      codec::prepare_sample(codec::synthetic_cloud(8000, 7, 10), spec, 4)};
  const ToyRun high = toy_training(data, spec, 1000);
  const ToyRun low = toy_training(data, spec, 100);
  const double dt = seconds_since(t0);

  const bool drop = high.final_loss <= 0.5 * high.first_loss && low.final_loss <= 0.5 * low.first_loss;
  const double bpp_high = high.rd.back().bpp, bpp_low = low.rd.back().bpp;
  const double full_psnr = low.rd.back().psnr.y;
  bool monotone = true;
  std::ostringstream curve;
  for (std::size_t i = 0; i < low.rd.size(); ++i) {
    curve << " " << fmt("%.2f", low.rd[i].psnr.y);
    if (i > 0 && low.rd[i].psnr.y < low.rd[i - 1].psnr.y - 0.1)
      monotone = false;
  }
  const bool pass = drop && bpp_high <= bpp_low && full_psnr >= 30.0 && monotone && dt <= 1800.0;
  return {pass, fmt("%d steps each, %.0f s; loss %.0f->%.0f and %.0f->%.0f; bpp %.4f (1000) vs %.4f (100); "
                    "full Y-PSNR %.2f dB; Y-PSNR by layers 4..1:%s",
                    kToySteps, dt, high.first_loss, high.final_loss, low.first_loss, low.final_loss, bpp_high,
                    bpp_low, full_psnr, curve.str().c_str())};
}

//============================================================================

Outcome
bd_metrics()
{
  eval::RDCurve ref;
  for (auto [r, p] : {std::pair{0.1, 30.0}, {0.2, 33.0}, {0.4, 36.0}, {0.8, 38.5}})
    ref.points.push_back({r, p});
  eval::RDCurve cheaper = ref, better = ref;
  for (auto& p : cheaper.points)
    p.rate *= 0.9;
  for (auto& p : better.points)
    p.psnr += 0.5;
  const double same = eval::bd_rate(ref, ref);
  const double same_psnr = eval::bd_psnr(ref, ref);
  const double rate = eval::bd_rate(ref, cheaper);
  const double gain = eval::bd_psnr(ref, better);
  const bool pass = std::abs(same) < 1e-9 && std::abs(same_psnr) < 1e-9 && std::abs(rate + 10.0) <= 0.1 &&
                    std::abs(gain - 0.5) <= 0.01;
  return {pass, fmt("identical %.2e%% / %.2e dB, 0.9x rate %.4f%%, +0.5 dB shift %.4f dB", same, same_psnr, rate,
                    gain)};
}

Outcome
determinism()
{
  const PointCloud pc = codec::synthetic_cloud(1500, 17, 8);
  const auto w = nn::ModelWeights::initialize(codec_config(), 3);
  const auto reference = codec::encode(pc, w, codec_options(1)).bytes;
  bool bytes_same = true;
  for (int threads : {1, 2, 4})
    bytes_same = bytes_same && codec::encode(pc, w, codec_options(threads)).bytes == reference;

  const GroupSpec spec = spec_with(64, 60, 0.1);
  const std::vector<codec::TrainingSample> data = {codec::prepare_sample(codec::synthetic_cloud(300, 5, 8), spec, 2)};
  auto run = [&](int threads) {
    codec::TrainConfig c;
    c.network = gradient_config();
    c.spec = spec;
    c.learning_rate = 3e-3;
    c.max_steps = 15;
    c.seed = 9;
    c.threads = threads;
    std::vector<double> curve;
    for (const auto& row : codec::train(data, c).log)
      curve.insert(curve.end(), {row.distortion, row.entropy_bits, row.hyper_bits, row.total});
    return curve;
  };
  const auto first = run(1);
  const bool curves_same = run(1) == first && run(2) == first;
  return {bytes_same && curves_same, fmt("encoded bytes %s across threads 1/2/4, loss curves %s",
                                         bytes_same ? "identical" : "differ", curves_same ? "identical" : "differ")};
}

}  // namespace
}  // namespace spac

int
main()
{
  using namespace spac;
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"pipeline losslessness", pipeline_losslessness},
      {"frequency sampling partition", frequency_partition},
      {"FFT accuracy", fft_accuracy},
      {"range coder", range_coder},
      {"gradient checks", gradient_checks},
      {"encoder/decoder latent agreement", latent_agreement},
      {"progressive decodability", progressive_decoding},
      {"toy rate-distortion run", toy_rate_distortion},
      {"BD metrics", bd_metrics},
      {"determinism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", int(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
