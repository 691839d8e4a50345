// Copyright 2026 The spac Authors
// SPDX-License-Identifier: Apache-2.0

#include "spac/entropy/context.hpp"

#include "spac/error.hpp"

namespace spac::entropy {

CausalRows::CausalRows(int dim, int window) : dim_(dim), window_(window)
{
  if (dim < 1 || window < 1)
    fail(ErrorCode::kInvalidArgument, "causal rows: dimensions must be positive");
}

void
CausalRows::append(const nn::RowVector& row)
{
  if (row.size() != dim_)
    fail(ErrorCode::kInvalidArgument, "causal rows: row width mismatch");
  rows_.push_back(row);
}

nn::RowVector
CausalRows::window_input(std::size_t t) const
{
  if (t != rows_.size())
    fail(ErrorCode::kOutOfRange, "causal rows: context requested out of coding order");
  nn::RowVector out = nn::RowVector::Zero(std::size_t(window_) * std::size_t(dim_));
  for (int k = 1; k <= window_; ++k) {
    if (t < std::size_t(k))
      break;
    out.segment((k - 1) * dim_, dim_) = rows_[t - std::size_t(k)];
  }
  return out;
}

nn::Matrix
CausalRows::to_matrix() const
{
  nn::Matrix m(Eigen::Index(rows_.size()), dim_);
  for (std::size_t i = 0; i < rows_.size(); ++i)
    m.row(Eigen::Index(i)) = rows_[i];
  return m;
}

}  // namespace spac::entropy
