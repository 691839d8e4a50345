// Copyright 2026 The spac Authors
// SPDX-License-Identifier: Apache-2.0

#include "spac/nn/adam.hpp"

#include <cmath>

namespace spac::nn {

void
adam_step(ModelWeights& weights, AdamState& state, double lr, const AdamOptions& opts)
{
  ++state.step;
  const double c1 = 1.0 - std::pow(opts.beta1, double(state.step));
  const double c2 = 1.0 - std::pow(opts.beta2, double(state.step));
  for (const auto& [name, param] : weights.params()) {
    Tensor t = param;
    const Matrix g = t.grad();
    auto [mit, m_new] = state.m.try_emplace(name, Matrix::Zero(t.rows(), t.cols()));
    auto [vit, v_new] = state.v.try_emplace(name, Matrix::Zero(t.rows(), t.cols()));
    Matrix& m = mit->second;
    Matrix& v = vit->second;
    m = opts.beta1 * m + (1.0 - opts.beta1) * g;
    v = opts.beta2 * v + (1.0 - opts.beta2) * g.cwiseProduct(g);
    Matrix& value = t.mutable_value();
    for (Eigen::Index i = 0; i < value.size(); ++i) {
      const double mh = m.data()[i] / c1;
      const double vh = v.data()[i] / c2;
      value.data()[i] -= lr * mh / (std::sqrt(vh) + opts.epsilon);
    }
    t.zero_grad();
  }
}

void
AdamState::serialize(ByteWriter& w) const
{
  w.u64(step);
  w.u32(static_cast<uint32_t>(m.size()));
  for (const auto& [name, mm] : m) {
    const Matrix& vv = v.at(name);
    w.u32(static_cast<uint32_t>(name.size()));
    w.text(name);
    w.u32(static_cast<uint32_t>(mm.rows()));
    w.u32(static_cast<uint32_t>(mm.cols()));
    for (Eigen::Index i = 0; i < mm.size(); ++i)
      w.f64(mm.data()[i]);
    for (Eigen::Index i = 0; i < vv.size(); ++i)
      w.f64(vv.data()[i]);
  }
}

AdamState
AdamState::deserialize(ByteReader& r)
{
  AdamState s;
  s.step = r.u64();
  const uint32_t n = r.u32();
  for (uint32_t k = 0; k < n; ++k) {
    const std::string name = r.text(r.u32());
    const uint32_t rows = r.u32();
    const uint32_t cols = r.u32();
    Matrix mm(rows, cols), vv(rows, cols);
    for (Eigen::Index i = 0; i < mm.size(); ++i)
      mm.data()[i] = r.f64();
    for (Eigen::Index i = 0; i < vv.size(); ++i)
      vv.data()[i] = r.f64();
    s.m.emplace(name, std::move(mm));
    s.v.emplace(name, std::move(vv));
  }
  return s;
}

}  // namespace spac::nn
