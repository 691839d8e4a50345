// Copyright 2026 The spac Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spac/codec/layer_input.hpp"
#include "spac/freq_sampler.hpp"
#include "spac/layer_pyramid.hpp"
#include "spac/nn/model.hpp"
#include "spac/rng.hpp"

namespace spac::codec {

inline constexpr std::array<double, 6> kLambdaLadder = {1000, 800, 600, 400, 200, 100};

// One training cloud with its decomposition and network inputs, computed
// once.
struct TrainingSample {
  PointCloud cloud;
  LayerStack stack;
  std::vector<LayerInput> inputs;
};

TrainingSample prepare_sample(const PointCloud& pc, const GroupSpec& spec, int num_layers, int threads = 1);

// D is the sum over layers of the per-point squared colour error (8-bit
// units, summed over channels).  Rates are bits per point of the layer:
// entropy sums every layer, hyper is the base layer plus the hyper latent
// (both per base point).
struct RDLossBreakdown {
  double distortion = 0.0;
  double entropy_bits = 0.0;
  double hyper_bits = 0.0;
  double total = 0.0;
  nn::Tensor total_tensor;  // graph root for backward
};

double rd_total(double distortion, double entropy_bits, double hyper_bits, double lambda1, double lambda2);

struct RDLossOptions {
  double lambda1 = 1000.0;
  double lambda2 = 1.0;
  // Hard rounding with identity gradient in place of additive noise.
  bool straight_through = false;
  // Debug: identity reconstruction (decoded colours replaced by the
  // originals), isolating the rate terms.
  bool identity_reconstruction = false;
};

RDLossBreakdown rd_loss(const TrainingSample& sample, const nn::ModelWeights& w, const RDLossOptions& options,
                        Rng& rng);

struct TrainConfig {
  double lambda1 = 1000.0;
  double lambda2 = 1.0;
  double learning_rate = 1e-4;
  int halve_every = 500;  // epochs
  int batch_size = 1;
  int max_steps = 2000;
  uint64_t seed = 1;
  bool straight_through = false;
  nn::NetworkConfig network;
  GroupSpec spec;
  int threads = 1;
  std::string csv_path;     // loss curve, written when set
  std::string resume_path;  // training state, read if present and rewritten
  int save_every = 100;
};

struct TrainLogRow {
  int step = 0;
  double distortion = 0.0;
  double entropy_bits = 0.0;
  double hyper_bits = 0.0;
  double total = 0.0;
};

struct TrainResult {
  nn::ModelWeights weights;  // rounded to float, as saved
  std::vector<TrainLogRow> log;
};

// Seeded, resumable loop over the dataset; each step averages the loss of
// `batch_size` consecutive samples.
TrainResult train(const std::vector<TrainingSample>& dataset, const TrainConfig& config);

void write_loss_csv(const std::string& path, const std::vector<TrainLogRow>& log);

}  // namespace spac::codec
