// Copyright 2026 The spac Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "spac/nn/tensor.hpp"

namespace spac::entropy {

// Decoded latent rows of one layer, appended in coding order.  Context for
// position t may only be requested once every row before t is present and
// reads nothing at or after t.
class CausalRows {
 public:
  CausalRows(int dim, int window);

  void append(const nn::RowVector& row);
  std::size_t size() const { return rows_.size(); }
  const nn::RowVector& row(std::size_t i) const { return rows_.at(i); }

  // Rows t-1, t-2, ..., t-window concatenated (newest first), zeros before
  // the start.  Throws kOutOfRange unless t == size(), i.e. the request is
  // made exactly when row t is next to be coded.
  nn::RowVector window_input(std::size_t t) const;

  nn::Matrix to_matrix() const;

 private:
  int dim_;
  int window_;
  std::vector<nn::RowVector> rows_;
};

}  // namespace spac::entropy
