// Copyright 2026 The spac Authors
// SPDX-License-Identifier: Apache-2.0
//
// spac: encode, decode, train and evaluate progressive point cloud
// attribute streams.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "spac/bytes.hpp"
#include "spac/codec/bitstream.hpp"
#include "spac/codec/codec.hpp"
#include "spac/codec/rd.hpp"
#include "spac/codec/synthetic.hpp"
#include "spac/codec/train.hpp"
#include "spac/error.hpp"
#include "spac/eval/metrics.hpp"
#include "spac/layer_pyramid.hpp"
#include "spac/ply.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kDataError = 2, kInternal = 3 };

struct Options {
  int threads = int(std::max(1u, std::thread::hardware_concurrency()));
  uint64_t seed = 1;
  int verbosity = 0;

  std::string input;
  std::string output;
  std::string model;
  std::string geometry;
  std::string reference;
  std::string test;
  std::string dataset;
  std::string report;
  std::vector<std::string> models;

  int omega = 1024;
  double q = 60.0;
  double tau = 1e-3;
  int layers = spac::kDefaultLayers;
  int lambda_index = 0;
  std::vector<int> lambda_indices;
  int upto_layer = 1;
  bool ascii = false;
  bool pchip = false;
  std::string label = "layer1";

  // train
  int steps = 2000;
  double learning_rate = 1e-4;
  int halve_every = 500;
  int batch = 1;
  int width = 64;
  int latent_dim = 32;
  int hyper_dim = 16;
  std::size_t synthetic_points = 8000;
  int synthetic_clouds = 1;
  bool resume = false;
};

spac::GroupSpec
group_spec(const Options& o)
{
  spac::GroupSpec s;
  s.omega = o.omega;
  s.q_percent = o.q;
  s.tau = o.tau;
  s.validate();
  return s;
}

void
write_json(const json& j, const std::string& path)
{
  if (path.empty()) {
    std::cout << j.dump(2) << "\n";
    return;
  }
  std::ofstream out(path);
  if (!(out << j.dump(2) << "\n"))
    spac::fail(spac::ErrorCode::kIoError, "cannot write " + path);
}

json
psnr_json(const spac::eval::YuvPsnr& p)
{
  return {{"Y", p.y}, {"U", p.u}, {"V", p.v}, {"YUV", p.combined}};
}

//============================================================================

int
run_encode(const Options& o)
{
  const spac::PointCloud pc = spac::load_ply(o.input);
  const spac::nn::ModelWeights w = spac::nn::ModelWeights::load(o.model);
  spac::codec::CodecOptions co;
  co.spec = group_spec(o);
  co.num_layers = w.config().num_layers;
  co.lambda_index = o.lambda_index;
  co.threads = o.threads;
  const auto enc = spac::codec::encode(pc, w, co);
  spac::write_file(o.output, enc.bytes);
  if (o.verbosity > 0) {
    std::cerr << "encoded " << pc.size() << " points into " << enc.bytes.size() << " bytes ("
              << double(enc.bytes.size()) * 8.0 / double(pc.size()) << " bpp)\n";
  }
  return kOk;
}

int
run_decode(const Options& o)
{
  const auto bytes = spac::read_file(o.input);
  const spac::PointCloud geometry = spac::load_ply(o.geometry);
  const spac::nn::ModelWeights w = spac::nn::ModelWeights::load(o.model);
  const auto dec = spac::codec::decode(bytes, geometry, w, o.upto_layer, o.threads);
  spac::save_ply(dec.cloud, o.output, o.ascii ? spac::PlyFormat::kAscii : spac::PlyFormat::kBinaryLittleEndian);
  if (o.verbosity > 0)
    std::cerr << "decoded " << dec.cloud.size() << " points up to layer " << o.upto_layer << "\n";
  return kOk;
}

std::vector<spac::PointCloud>
training_clouds(const Options& o)
{
  std::vector<spac::PointCloud> clouds;
  if (!o.dataset.empty()) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(o.dataset)) {
      if (e.is_regular_file() && e.path().extension() == ".ply")
        files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files)
      clouds.push_back(spac::load_ply(f.string()));
    if (clouds.empty())
      spac::fail(spac::ErrorCode::kInvalidArgument, "no .ply files in " + o.dataset);
  } else {
    for (int i = 0; i < o.synthetic_clouds; ++i)
      clouds.push_back(spac::codec::synthetic_cloud(o.synthetic_points, o.seed + uint64_t(i), 10));
  }
  return clouds;
}

int
run_train(const Options& o)
{
  const spac::GroupSpec spec = group_spec(o);
  std::vector<spac::codec::TrainingSample> data;
  for (const auto& pc : training_clouds(o))
    data.push_back(spac::codec::prepare_sample(pc, spec, o.layers, o.threads));

  fs::create_directories(o.output);
  std::vector<int> indices = o.lambda_indices.empty() ? std::vector<int>{o.lambda_index} : o.lambda_indices;
  for (int idx : indices) {
    if (idx < 0 || idx >= int(spac::codec::kLambdaLadder.size()))
      spac::fail(spac::ErrorCode::kOutOfRange, "lambda index " + std::to_string(idx) + " outside [0, 5]");
    spac::codec::TrainConfig cfg;
    cfg.lambda1 = spac::codec::kLambdaLadder[std::size_t(idx)];
    cfg.learning_rate = o.learning_rate;
    cfg.halve_every = o.halve_every;
    cfg.batch_size = o.batch;
    cfg.max_steps = o.steps;
    cfg.seed = o.seed;
    cfg.spec = spec;
    cfg.threads = o.threads;
    cfg.network = spac::nn::NetworkConfig::with_layers(o.layers);
    cfg.network.width = o.width;
    cfg.network.latent_dim = o.latent_dim;
    cfg.network.hyper_dim = o.hyper_dim;
    cfg.network.validate();
    const std::string stem = (fs::path(o.output) / ("lambda" + std::to_string(idx))).string();
    cfg.csv_path = stem + "_loss.csv";
    if (o.resume)
      cfg.resume_path = stem + ".resume";
    const auto result = spac::codec::train(data, cfg);
    result.weights.save(stem + ".spacw");
    if (o.verbosity > 0 && !result.log.empty()) {
      std::cerr << "lambda " << cfg.lambda1 << ": loss " << result.log.front().total << " -> "
                << result.log.back().total << "\n";
    }
  }
  return kOk;
}

int
run_eval(const Options& o)
{
  if (!o.models.empty()) {
    // RD mode: every prefix of every model's stream.
    const spac::PointCloud pc = spac::load_ply(o.input);
    std::vector<spac::eval::RDRow> rows;
    json out = json::array();
    for (const auto& path : o.models) {
      const auto w = spac::nn::ModelWeights::load(path);
      spac::codec::CodecOptions co;
      co.spec = group_spec(o);
      co.num_layers = w.config().num_layers;
      co.threads = o.threads;
      const std::string label = fs::path(path).stem().string();
      for (const auto& p : spac::codec::rd_points(pc, w, co)) {
        rows.push_back({"layer" + std::to_string(p.layer), p.bpp, p.psnr});
        json j = {{"model", label}, {"layer", p.layer}, {"bytes", p.bytes}, {"bpp", p.bpp}, {"points", p.points}};
        j["psnr"] = psnr_json(p.psnr);
        out.push_back(j);
      }
    }
    if (!o.report.empty())
      spac::eval::write_rd_report(o.report, rows);
    write_json(out, o.output);
    return kOk;
  }
  if (o.reference.empty() || o.test.empty())
    throw CLI::ValidationError("eval needs --reference and --test, or --input with --models");
  const auto p = spac::eval::psnr_yuv(spac::load_ply(o.reference), spac::load_ply(o.test));
  write_json(psnr_json(p), o.output);
  return kOk;
}

int
run_sample(const Options& o)
{
  const spac::PointCloud pc = spac::load_ply(o.input);
  const auto stack = spac::decompose(pc, o.layers, group_spec(o), o.threads);
  fs::create_directories(o.output);
  const auto fmt = o.ascii ? spac::PlyFormat::kAscii : spac::PlyFormat::kBinaryLittleEndian;
  json layers = json::array();
  for (int l = 1; l <= stack.num_layers; ++l) {
    const std::string name = "layer" + std::to_string(l) + ".ply";
    spac::save_ply(stack.layer(l), (fs::path(o.output) / name).string(), fmt);
    layers.push_back({{"layer", l},
                      {"file", name},
                      {"points", stack.layer(l).size()},
                      {"fraction", pc.empty() ? 0.0 : double(stack.layer(l).size()) / double(pc.size())},
                      {"role", l == stack.num_layers ? "base" : "residual"}});
  }
  json stats = {{"points", pc.size()},
                {"omega", o.omega},
                {"q_percent", o.q},
                {"tau", o.tau},
                {"num_layers", stack.num_layers},
                {"exhausted_from", stack.exhausted_from},
                {"layers", layers}};
  write_json(stats, (fs::path(o.output) / "stats.json").string());
  return kOk;
}

spac::eval::RDCurve
labelled_curve(const std::string& path, const std::string& label)
{
  const auto curves = spac::eval::curves_by_label(spac::eval::read_rd_report(path));
  auto it = std::find_if(curves.begin(), curves.end(), [&](const auto& c) { return c.first == label; });
  if (it == curves.end())
    spac::fail(spac::ErrorCode::kInvalidArgument, path + " has no curve labelled " + label);
  auto c = it->second;
  std::sort(c.points.begin(), c.points.end(),
            [](const spac::eval::RDPoint& a, const spac::eval::RDPoint& b) { return a.rate < b.rate; });
  return c;
}

int
run_bd(const Options& o)
{
  const auto ref = labelled_curve(o.reference, o.label);
  const auto test = labelled_curve(o.test, o.label);
  const auto mode = o.pchip ? spac::eval::BdInterpolation::kPchip : spac::eval::BdInterpolation::kCubic;
  json j = {{"reference", o.reference},
            {"test", o.test},
            {"interpolation", o.pchip ? "pchip" : "cubic"},
            {"bd_rate_percent", spac::eval::bd_rate(ref, test, mode)},
            {"bd_psnr_db", spac::eval::bd_psnr(ref, test, mode)}};
  write_json(j, o.output);
  return kOk;
}

int
run_info(const Options& o)
{
  const auto bytes = spac::read_file(o.input);
  std::cout << spac::codec::describe_stream(spac::codec::inspect_stream(bytes));
  return kOk;
}

void
add_group_flags(CLI::App* cmd, Options& o)
{
  cmd->add_option("--omega", o.omega, "Points per frequency-sampling group (power of two)");
  cmd->add_option("--q", o.q, "Spectrum retention threshold, percent of the peak magnitude");
  cmd->add_option("--tau", o.tau, "High-frequency selection threshold, fraction of the peak");
}

}  // namespace

int
main(int argc, char** argv)
{
  CLI::App app{"spac: progressive point cloud attribute codec"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--seed", o.seed, "Random seed (SPAC_SEED overrides)");
  app.add_flag("-v,--verbose", o.verbosity, "More output on stderr");

  auto* enc = app.add_subcommand("encode", "PLY -> .spac");
  enc->add_option("--input", o.input, "Input PLY")->required()->check(CLI::ExistingFile);
  enc->add_option("--output", o.output, "Output stream")->required();
  enc->add_option("--model", o.model, "Model checkpoint")->required()->check(CLI::ExistingFile);
  enc->add_option("--lambda-index", o.lambda_index, "Rate point recorded in the header")->check(CLI::Range(0, 5));
  add_group_flags(enc, o);

  auto* dec = app.add_subcommand("decode", ".spac + geometry PLY -> PLY");
  dec->add_option("--input", o.input, "Input stream")->required()->check(CLI::ExistingFile);
  dec->add_option("--geometry", o.geometry, "PLY supplying the geometry")->required()->check(CLI::ExistingFile);
  dec->add_option("--model", o.model, "Model checkpoint")->required()->check(CLI::ExistingFile);
  dec->add_option("--output", o.output, "Output PLY")->required();
  dec->add_option("--upto-layer", o.upto_layer, "Finest layer to reconstruct (1 = full)")->check(CLI::Range(1, 6));
  dec->add_flag("--ascii", o.ascii, "Write ASCII PLY");

  auto* tr = app.add_subcommand("train", "Train one checkpoint per lambda");
  tr->add_option("--dataset", o.dataset, "Directory of PLY files (synthetic clouds when omitted)")
      ->check(CLI::ExistingDirectory);
  tr->add_option("--output", o.output, "Checkpoint directory")->required();
  tr->add_option("--lambda-index", o.lambda_indices, "Lambda ladder indices (0 = 1000 ... 5 = 100)");
  tr->add_option("--steps", o.steps, "Training steps")->check(CLI::NonNegativeNumber);
  tr->add_option("--lr", o.learning_rate, "Initial learning rate")->check(CLI::PositiveNumber);
  tr->add_option("--halve-every", o.halve_every, "Epochs between learning-rate halvings")->check(CLI::PositiveNumber);
  tr->add_option("--batch", o.batch, "Clouds per step")->check(CLI::PositiveNumber);
  tr->add_option("--layers", o.layers, "Number of layers")->check(CLI::Range(1, spac::kMaxLayers));
  tr->add_option("--width", o.width, "Feature width")->check(CLI::PositiveNumber);
  tr->add_option("--latent-dim", o.latent_dim, "Latent channels per block")->check(CLI::PositiveNumber);
  tr->add_option("--hyper-dim", o.hyper_dim, "Hyper latent channels")->check(CLI::PositiveNumber);
  tr->add_option("--synthetic-points", o.synthetic_points, "Points per synthetic cloud");
  tr->add_option("--synthetic-clouds", o.synthetic_clouds, "Synthetic clouds")->check(CLI::PositiveNumber);
  tr->add_flag("--resume", o.resume, "Continue from the saved training state");
  add_group_flags(tr, o);

  auto* ev = app.add_subcommand("eval", "PSNR of a decoded PLY, or RD points of models");
  ev->add_option("--reference", o.reference, "Reference PLY")->check(CLI::ExistingFile);
  ev->add_option("--test", o.test, "Test PLY")->check(CLI::ExistingFile);
  ev->add_option("--input", o.input, "Cloud to encode in RD mode")->check(CLI::ExistingFile);
  ev->add_option("--models", o.models, "Checkpoints to evaluate in RD mode")->check(CLI::ExistingFile);
  ev->add_option("--report", o.report, "RD CSV to write in RD mode");
  ev->add_option("--output", o.output, "JSON output (stdout when omitted)");
  add_group_flags(ev, o);

  auto* sm = app.add_subcommand("sample", "Split a PLY into its layers");
  sm->add_option("--input", o.input, "Input PLY")->required()->check(CLI::ExistingFile);
  sm->add_option("--output", o.output, "Output directory")->required();
  sm->add_option("--layers", o.layers, "Number of layers")->check(CLI::Range(1, spac::kMaxLayers));
  sm->add_flag("--ascii", o.ascii, "Write ASCII PLY");
  add_group_flags(sm, o);

  auto* bd = app.add_subcommand("bd", "Bjontegaard deltas between two RD CSVs");
  bd->add_option("--reference", o.reference, "Reference RD CSV")->required()->check(CLI::ExistingFile);
  bd->add_option("--test", o.test, "Test RD CSV")->required()->check(CLI::ExistingFile);
  bd->add_option("--label", o.label, "Curve to compare (eval writes layer1 ... layerL)");
  bd->add_flag("--pchip", o.pchip, "Piecewise cubic interpolation instead of the cubic fit");
  bd->add_option("--output", o.output, "JSON output (stdout when omitted)");

  auto* info = app.add_subcommand("info", "Dump a stream header and chunk table");
  info->add_option("--input", o.input, "Input stream")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  if (const char* env = std::getenv("SPAC_SEED")) {
    try {
      o.seed = std::stoull(env);
    } catch (const std::exception&) {
      std::cerr << "error: SPAC_SEED must be an unsigned integer\n";
      return kUsage;
    }
  }

  try {
    if (*enc)
      return run_encode(o);
    if (*dec)
      return run_decode(o);
    if (*tr)
      return run_train(o);
    if (*ev)
      return run_eval(o);
    if (*sm)
      return run_sample(o);
    if (*bd)
      return run_bd(o);
    if (*info)
      return run_info(o);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const spac::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kUsage;
}
