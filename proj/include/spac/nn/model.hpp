// Copyright 2026 The spac Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "spac/nn/tensor.hpp"

namespace spac::nn {

struct NetworkConfig {
  int num_layers = 4;
  // Conv-block count of the analysis and synthesis stacks, per layer
  // (index 0 is layer 1).  Must be strictly increasing.
  std::vector<int> depths = {2, 3, 4, 5};
  int width = 64;
  int latent_dim = 32;
  int hyper_dim = 16;
  int heads = 1;
  int context_rows = 4;
  double delta_min = 0.05;
  double delta_max = 4.0;

  // Default depths are layer + 1.
  static NetworkConfig with_layers(int num_layers);
  void validate() const;
  int depth(int layer) const { return depths.at(layer - 1); }
  bool operator==(const NetworkConfig&) const = default;
};

inline constexpr uint32_t kCheckpointVersion = 1;

// Named parameter set of a full model.  Every parameter is a leaf tensor
// that requires a gradient.
class ModelWeights {
 public:
  ModelWeights() = default;

  // Glorot-uniform matrices, zero biases, with a few biases given fixed
  // starting points (colour head 0.5, step head -2).
  static ModelWeights initialize(const NetworkConfig& config, uint64_t seed);

  const NetworkConfig& config() const { return config_; }
  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);
  bool contains(const std::string& name) const { return params_.count(name) != 0; }
  const std::map<std::string, Tensor>& params() const { return params_; }
  std::size_t parameter_count() const;

  void zero_grad();
  // Rounds every value to the nearest float, as stored on disk.
  void round_to_float();

  // SPACW container; the trailing 8 bytes are the FNV-1a 64 hash of all
  // preceding bytes.
  std::vector<uint8_t> serialize() const;
  static ModelWeights deserialize(std::span<const uint8_t> bytes);
  void save(const std::filesystem::path& path) const;
  static ModelWeights load(const std::filesystem::path& path);

  // Hash of the serialized form; identifies the model inside bitstreams.
  uint64_t hash() const;

 private:
  void add(const std::string& name, Matrix value);

  NetworkConfig config_;
  std::map<std::string, Tensor> params_;
};

uint64_t fnv1a64(std::span<const uint8_t> bytes, uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace spac::nn
