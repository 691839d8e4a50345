// Copyright 2026 The spac Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "spac/bytes.hpp"
#include "spac/nn/model.hpp"

namespace spac::nn {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  uint64_t step = 0;
  std::map<std::string, Matrix> m;
  std::map<std::string, Matrix> v;

  void serialize(ByteWriter& w) const;
  static AdamState deserialize(ByteReader& r);
};

// One bias-corrected Adam update from the accumulated gradients, which are
// cleared afterwards.  Parameters outside the graph see a zero gradient.
void adam_step(ModelWeights& weights, AdamState& state, double lr, const AdamOptions& opts = {});

}  // namespace spac::nn
