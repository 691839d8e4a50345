// Copyright 2026 The spac Authors
// SPDX-License-Identifier: Apache-2.0

#include "spac/nn/ops.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "spac/error.hpp"

namespace spac::nn {

namespace {

void
accumulate(const NodePtr& in, const Matrix& g)
{
  if (in->requires_grad)
    in->grad_buffer() += g;
}

void
require_same_shape(const Tensor& a, const Tensor& b, const char* op)
{
  if (a.rows() != b.rows() || a.cols() != b.cols())
    fail(ErrorCode::kInvalidArgument, std::string(op) + ": shape mismatch");
}

void
require_layout(const Tensor& x, const BlockLayout& layout, const char* op)
{
  if (static_cast<std::size_t>(x.rows()) != layout.rows() || layout.valid.size() != layout.rows())
    fail(ErrorCode::kInvalidArgument, std::string(op) + ": rows do not match block layout");
}

// Valid slots of a block in canonical order: lexicographic on the rows of
// `a`, then of `b` (when given).  Equal rows contribute equal terms, so any
// slot permutation yields the same order of values and the same sums.
inline double
dot(const double* a, const double* b, Eigen::Index n)
{
  double s = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    s += a[i] * b[i];
  return s;
}

inline void
axpy(double alpha, const double* x, double* y, Eigen::Index n)
{
  for (Eigen::Index i = 0; i < n; ++i)
    y[i] += alpha * x[i];
}

int
canonical_slots(const Matrix& a, const Matrix* b, const BlockLayout& layout, std::size_t block,
                std::array<int, kBlockWidth>& order)
{
  const std::size_t base = block * kBlockWidth;
  int n = 0;
  for (int s = 0; s < kBlockWidth; ++s)
    if (layout.valid[base + s])
      order[n++] = s;
  // Three-way lexicographic comparison of two rows.
  auto cmp_row = [](const Matrix& m, std::size_t r1, std::size_t r2) {
    const double* x = m.data() + r1 * std::size_t(m.cols());
    const double* y = m.data() + r2 * std::size_t(m.cols());
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (x[c] != y[c])
        return x[c] < y[c] ? -1 : 1;
    }
    return 0;
  };
  std::sort(order.begin(), order.begin() + n, [&](int i, int j) {
    const int c = cmp_row(a, base + std::size_t(i), base + std::size_t(j));
    if (c != 0)
      return c < 0;
    return b != nullptr && cmp_row(*b, base + std::size_t(i), base + std::size_t(j)) < 0;
  });
  return n;
}

}  // namespace

int
BlockLayout::count(std::size_t block) const
{
  int c = 0;
  for (int s = 0; s < kBlockWidth; ++s)
    c += valid[block * kBlockWidth + s] ? 1 : 0;
  return c;
}

BlockLayout
BlockLayout::full(std::size_t blocks)
{
  BlockLayout l;
  l.blocks = blocks;
  l.valid.assign(blocks * kBlockWidth, 1);
  return l;
}

//============================================================================

Tensor
matmul(const Tensor& a, const Tensor& b)
{
  if (a.cols() != b.rows())
    fail(ErrorCode::kInvalidArgument, "matmul: inner dimensions differ");
  Matrix out = a.value() * b.value();
  return make_result(std::move(out), {a.node(), b.node()}, [](Node& n) {
    const auto& A = n.inputs[0];
    const auto& B = n.inputs[1];
    if (A->requires_grad)
      A->grad_buffer() += n.grad * B->value.transpose();
    if (B->requires_grad)
      B->grad_buffer() += A->value.transpose() * n.grad;
  });
}

Tensor
add(const Tensor& a, const Tensor& b)
{
  require_same_shape(a, b, "add");
  return make_result(a.value() + b.value(), {a.node(), b.node()}, [](Node& n) {
    accumulate(n.inputs[0], n.grad);
    accumulate(n.inputs[1], n.grad);
  });
}

Tensor
sub(const Tensor& a, const Tensor& b)
{
  require_same_shape(a, b, "sub");
  return make_result(a.value() - b.value(), {a.node(), b.node()}, [](Node& n) {
    accumulate(n.inputs[0], n.grad);
    accumulate(n.inputs[1], -n.grad);
  });
}

Tensor
hadamard(const Tensor& a, const Tensor& b)
{
  require_same_shape(a, b, "hadamard");
  Matrix out = a.value().cwiseProduct(b.value());
  return make_result(std::move(out), {a.node(), b.node()}, [](Node& n) {
    const auto& A = n.inputs[0];
    const auto& B = n.inputs[1];
    if (A->requires_grad)
      A->grad_buffer() += n.grad.cwiseProduct(B->value);
    if (B->requires_grad)
      B->grad_buffer() += n.grad.cwiseProduct(A->value);
  });
}

Tensor
add_bias(const Tensor& a, const Tensor& bias)
{
  if (bias.rows() != 1 || bias.cols() != a.cols())
    fail(ErrorCode::kInvalidArgument, "add_bias: bias must be 1 x cols");
  Matrix out = a.value().rowwise() + bias.value().row(0);
  return make_result(std::move(out), {a.node(), bias.node()}, [](Node& n) {
    accumulate(n.inputs[0], n.grad);
    if (n.inputs[1]->requires_grad)
      n.inputs[1]->grad_buffer() += n.grad.colwise().sum();
  });
}

Tensor
scale(const Tensor& a, double s)
{
  return make_result(a.value() * s, {a.node()}, [s](Node& n) { accumulate(n.inputs[0], n.grad * s); });
}

Tensor
add_scalar(const Tensor& a, double s)
{
  Matrix out = a.value().array() + s;
  return make_result(std::move(out), {a.node()}, [](Node& n) { accumulate(n.inputs[0], n.grad); });
}

Tensor
relu(const Tensor& a)
{
  Matrix out = a.value().cwiseMax(0.0);
  return make_result(std::move(out), {a.node()}, [](Node& n) {
    const Matrix& x = n.inputs[0]->value;
    Matrix g = (x.array() > 0.0).select(n.grad, 0.0);
    accumulate(n.inputs[0], g);
  });
}

Tensor
sigmoid(const Tensor& a)
{
  Matrix out = a.value().unaryExpr([](double x) {
    if (x >= 0)
      return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
  return make_result(std::move(out), {a.node()}, [](Node& n) {
    Matrix g = n.grad.array() * n.value.array() * (1.0 - n.value.array());
    accumulate(n.inputs[0], g);
  });
}

Tensor
exp(const Tensor& a)
{
  Matrix out = a.value().array().exp();
  return make_result(std::move(out), {a.node()}, [](Node& n) {
    accumulate(n.inputs[0], n.grad.cwiseProduct(n.value));
  });
}

Tensor
clamp(const Tensor& a, double lo, double hi)
{
  Matrix out = a.value().cwiseMax(lo).cwiseMin(hi);
  return make_result(std::move(out), {a.node()}, [lo, hi](Node& n) {
    const Matrix& x = n.inputs[0]->value;
    Matrix g = (x.array() >= lo && x.array() <= hi).select(n.grad, 0.0);
    accumulate(n.inputs[0], g);
  });
}

//============================================================================

Tensor
concat_cols(const Tensor& a, const Tensor& b)
{
  if (a.rows() != b.rows())
    fail(ErrorCode::kInvalidArgument, "concat_cols: row counts differ");
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a.value(), b.value();
  const Eigen::Index ca = a.cols();
  return make_result(std::move(out), {a.node(), b.node()}, [ca](Node& n) {
    if (n.inputs[0]->requires_grad)
      n.inputs[0]->grad_buffer() += n.grad.leftCols(ca);
    if (n.inputs[1]->requires_grad)
      n.inputs[1]->grad_buffer() += n.grad.rightCols(n.grad.cols() - ca);
  });
}

Tensor
slice_cols(const Tensor& a, Eigen::Index start, Eigen::Index count)
{
  if (start < 0 || count < 0 || start + count > a.cols())
    fail(ErrorCode::kInvalidArgument, "slice_cols: range outside tensor");
  Matrix out = a.value().middleCols(start, count);
  return make_result(std::move(out), {a.node()}, [start, count](Node& n) {
    n.inputs[0]->grad_buffer().middleCols(start, count) += n.grad;
  });
}

Tensor
concat_cols(std::span<const Tensor> parts)
{
  if (parts.empty())
    fail(ErrorCode::kInvalidArgument, "concat_cols: no inputs");
  const Eigen::Index rows = parts[0].rows();
  Eigen::Index total = 0;
  std::vector<NodePtr> inputs;
  inputs.reserve(parts.size());
  for (const auto& p : parts) {
    if (p.rows() != rows)
      fail(ErrorCode::kInvalidArgument, "concat_cols: row counts differ");
    total += p.cols();
    inputs.push_back(p.node());
  }
  Matrix out(rows, total);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return make_result(std::move(out), std::move(inputs), [](Node& n) {
    Eigen::Index at = 0;
    for (const auto& in : n.inputs) {
      const Eigen::Index c = in->value.cols();
      if (in->requires_grad)
        in->grad_buffer() += n.grad.middleCols(at, c);
      at += c;
    }
  });
}

Tensor
slice_rows(const Tensor& a, Eigen::Index start, Eigen::Index count)
{
  if (start < 0 || count < 0 || start + count > a.rows())
    fail(ErrorCode::kInvalidArgument, "slice_rows: range outside tensor");
  Matrix out = a.value().middleRows(start, count);
  return make_result(std::move(out), {a.node()}, [start, count](Node& n) {
    n.inputs[0]->grad_buffer().middleRows(start, count) += n.grad;
  });
}

Tensor
concat_rows(std::span<const Tensor> rows)
{
  if (rows.empty())
    fail(ErrorCode::kInvalidArgument, "concat_rows: no inputs");
  Eigen::Index total = 0;
  const Eigen::Index cols = rows[0].cols();
  std::vector<NodePtr> inputs;
  inputs.reserve(rows.size());
  for (const auto& r : rows) {
    if (r.cols() != cols)
      fail(ErrorCode::kInvalidArgument, "concat_rows: column counts differ");
    total += r.rows();
    inputs.push_back(r.node());
  }
  Matrix out(total, cols);
  Eigen::Index at = 0;
  for (const auto& r : rows) {
    out.middleRows(at, r.rows()) = r.value();
    at += r.rows();
  }
  return make_result(std::move(out), std::move(inputs), [](Node& n) {
    Eigen::Index at = 0;
    for (const auto& in : n.inputs) {
      const Eigen::Index r = in->value.rows();
      if (in->requires_grad)
        in->grad_buffer() += n.grad.middleRows(at, r);
      at += r;
    }
  });
}

Tensor
repeat_rows(const Tensor& row, Eigen::Index n_rows)
{
  if (row.rows() != 1)
    fail(ErrorCode::kInvalidArgument, "repeat_rows: input must be a single row");
  Matrix out = row.value().replicate(n_rows, 1);
  return make_result(std::move(out), {row.node()}, [](Node& n) {
    n.inputs[0]->grad_buffer() += n.grad.colwise().sum();
  });
}

Tensor
row_mean(const Tensor& a)
{
  if (a.rows() == 0)
    fail(ErrorCode::kInvalidArgument, "row_mean: empty tensor");
  Matrix out = a.value().colwise().mean();
  const double inv = 1.0 / static_cast<double>(a.rows());
  return make_result(std::move(out), {a.node()}, [inv](Node& n) {
    const auto r = n.inputs[0]->value.rows();
    n.inputs[0]->grad_buffer() += (n.grad * inv).replicate(r, 1);
  });
}

Tensor
sum(const Tensor& a)
{
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return make_result(std::move(out), {a.node()}, [](Node& n) {
    n.inputs[0]->grad_buffer().array() += n.grad(0, 0);
  });
}

Tensor
mean(const Tensor& a)
{
  if (a.value().size() == 0)
    fail(ErrorCode::kInvalidArgument, "mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

//============================================================================

Tensor
mask_rows(const Tensor& x, const BlockLayout& layout)
{
  require_layout(x, layout, "mask_rows");
  Matrix out = x.value();
  for (std::size_t r = 0; r < layout.rows(); ++r)
    if (!layout.valid[r])
      out.row(r).setZero();
  return make_result(std::move(out), {x.node()}, [valid = layout.valid](Node& n) {
    Matrix g = n.grad;
    for (std::size_t r = 0; r < valid.size(); ++r)
      if (!valid[r])
        g.row(r).setZero();
    accumulate(n.inputs[0], g);
  });
}

Tensor
neighbor_mean(const Tensor& x, const BlockLayout& layout)
{
  require_layout(x, layout, "neighbor_mean");
  const Matrix& xv = x.value();
  Matrix out = Matrix::Zero(x.rows(), x.cols());
  std::array<int, kBlockWidth> order{};
  for (std::size_t b = 0; b < layout.blocks; ++b) {
    const int cnt = canonical_slots(xv, nullptr, layout, b, order);
    if (cnt < 2)
      continue;
    const std::size_t base = b * kBlockWidth;
    RowVector total = RowVector::Zero(x.cols());
    for (int m = 0; m < cnt; ++m)
      total += xv.row(Eigen::Index(base + order[m]));
    const double inv = 1.0 / (cnt - 1);
    for (int m = 0; m < cnt; ++m) {
      const auto r = Eigen::Index(base + order[m]);
      out.row(r) = (total - xv.row(r)) * inv;
    }
  }
  return make_result(std::move(out), {x.node()}, [layout](Node& n) {
    Matrix& g = n.inputs[0]->grad_buffer();
    for (std::size_t b = 0; b < layout.blocks; ++b) {
      const std::size_t base = b * kBlockWidth;
      const int cnt = layout.count(b);
      if (cnt < 2)
        continue;
      const double inv = 1.0 / (cnt - 1);
      RowVector total = RowVector::Zero(n.grad.cols());
      for (int i = 0; i < kBlockWidth; ++i)
        if (layout.valid[base + i])
          total += n.grad.row(base + i);
      for (int j = 0; j < kBlockWidth; ++j)
        if (layout.valid[base + j])
          g.row(base + j) += (total - n.grad.row(base + j)) * inv;
    }
  });
}

Tensor
block_attention(const Tensor& q, const Tensor& k, const Tensor& v, const BlockLayout& layout)
{
  require_layout(q, layout, "block_attention");
  require_same_shape(q, k, "block_attention");
  if (v.rows() != q.rows())
    fail(ErrorCode::kInvalidArgument, "block_attention: value rows differ");
  const Matrix& qv = q.value();
  const Matrix& kv = k.value();
  const Matrix& vv = v.value();
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(q.cols(), 1)));

  const Eigen::Index dk = q.cols();
  const Eigen::Index dv = v.cols();
  // weights[(8b + i) * 8 + j]
  std::vector<double> weights(layout.blocks * kBlockWidth * kBlockWidth, 0.0);
  Matrix out = Matrix::Zero(q.rows(), dv);
  std::array<int, kBlockWidth> order{};
  for (std::size_t b = 0; b < layout.blocks; ++b) {
    const std::size_t base = b * kBlockWidth;
    const int cnt = canonical_slots(kv, &vv, layout, b, order);
    for (int mi = 0; mi < cnt; ++mi) {
      const std::size_t i = base + std::size_t(order[mi]);
      const double* qi = qv.data() + i * std::size_t(dk);
      std::array<double, kBlockWidth> score{};
      double mx = -std::numeric_limits<double>::infinity();
      for (int mj = 0; mj < cnt; ++mj) {
        const int j = order[mj];
        score[j] = dot(qi, kv.data() + (base + std::size_t(j)) * std::size_t(dk), dk) * inv_sqrt;
        mx = std::max(mx, score[j]);
      }
      double z = 0.0;
      for (int mj = 0; mj < cnt; ++mj) {
        const int j = order[mj];
        score[j] = std::exp(score[j] - mx);
        z += score[j];
      }
      double* w = &weights[i * kBlockWidth];
      double* dst = out.data() + i * std::size_t(dv);
      for (int mj = 0; mj < cnt; ++mj) {
        const int j = order[mj];
        w[j] = score[j] / z;
        axpy(w[j], vv.data() + (base + std::size_t(j)) * std::size_t(dv), dst, dv);
      }
    }
  }
  return make_result(
      std::move(out), {q.node(), k.node(), v.node()},
      [layout, weights = std::move(weights), inv_sqrt](Node& n) {
        const auto& Q = n.inputs[0];
        const auto& K = n.inputs[1];
        const auto& V = n.inputs[2];
        const Eigen::Index dk = Q->value.cols();
        const Eigen::Index dv = V->value.cols();
        Matrix gq = Matrix::Zero(Q->value.rows(), dk);
        Matrix gk = Matrix::Zero(K->value.rows(), dk);
        Matrix gv = Matrix::Zero(V->value.rows(), dv);
        for (std::size_t b = 0; b < layout.blocks; ++b) {
          const std::size_t base = b * kBlockWidth;
          for (int ii = 0; ii < kBlockWidth; ++ii) {
            const std::size_t i = base + std::size_t(ii);
            if (!layout.valid[i])
              continue;
            const double* w = &weights[i * kBlockWidth];
            const double* gi = n.grad.data() + i * std::size_t(dv);
            std::array<double, kBlockWidth> dw{};
            double total = 0.0;
            for (int jj = 0; jj < kBlockWidth; ++jj) {
              const std::size_t j = base + std::size_t(jj);
              if (!layout.valid[j])
                continue;
              axpy(w[jj], gi, gv.data() + j * std::size_t(dv), dv);
              dw[jj] = dot(gi, V->value.data() + j * std::size_t(dv), dv);
              total += w[jj] * dw[jj];
            }
            for (int jj = 0; jj < kBlockWidth; ++jj) {
              const std::size_t j = base + std::size_t(jj);
              if (!layout.valid[j])
                continue;
              const double ds = w[jj] * (dw[jj] - total) * inv_sqrt;
              axpy(ds, K->value.data() + j * std::size_t(dk), gq.data() + i * std::size_t(dk), dk);
              axpy(ds, Q->value.data() + i * std::size_t(dk), gk.data() + j * std::size_t(dk), dk);
            }
          }
        }
        accumulate(Q, gq);
        accumulate(K, gk);
        accumulate(V, gv);
      });
}

Tensor
masked_pool(const Tensor& x, const BlockLayout& layout)
{
  require_layout(x, layout, "masked_pool");
  const Matrix& xv = x.value();
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(layout.blocks), x.cols());
  std::array<int, kBlockWidth> order{};
  for (std::size_t b = 0; b < layout.blocks; ++b) {
    const int cnt = canonical_slots(xv, nullptr, layout, b, order);
    if (cnt == 0)
      continue;
    auto dst = out.row(Eigen::Index(b));
    for (int m = 0; m < cnt; ++m)
      dst += xv.row(Eigen::Index(b * kBlockWidth + order[m]));
    dst /= double(cnt);
  }
  return make_result(std::move(out), {x.node()}, [layout](Node& n) {
    Matrix& g = n.inputs[0]->grad_buffer();
    for (std::size_t b = 0; b < layout.blocks; ++b) {
      const int cnt = layout.count(b);
      for (int j = 0; j < kBlockWidth; ++j)
        if (layout.valid[b * kBlockWidth + j])
          g.row(b * kBlockWidth + j) += n.grad.row(b) / cnt;
    }
  });
}

Tensor
broadcast_blocks(const Tensor& y, const BlockLayout& layout)
{
  if (static_cast<std::size_t>(y.rows()) != layout.blocks)
    fail(ErrorCode::kInvalidArgument, "broadcast_blocks: one row per block expected");
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(layout.rows()), y.cols());
  for (std::size_t r = 0; r < layout.rows(); ++r)
    if (layout.valid[r])
      out.row(r) = y.value().row(r / kBlockWidth);
  return make_result(std::move(out), {y.node()}, [layout](Node& n) {
    Matrix& g = n.inputs[0]->grad_buffer();
    for (std::size_t r = 0; r < layout.rows(); ++r)
      if (layout.valid[r])
        g.row(r / kBlockWidth) += n.grad.row(r);
  });
}

//============================================================================

namespace {

constexpr double kLn2 = std::numbers::ln2;

double
laplace_density(double x, double mu, double b)
{
  return std::exp(-std::abs(x - mu) / b) / (2.0 * b);
}

// Mass of Laplace(mu, b) on [y - half, y + half], stable in both tails.
double
laplace_mass(double y, double mu, double b, double half)
{
  const double t = std::abs(y - mu);
  if (t >= half)
    return 0.5 * std::exp(-(t - half) / b) * -std::expm1(-2.0 * half / b);
  return 1.0 - 0.5 * std::exp(-(half - t) / b) - 0.5 * std::exp(-(t + half) / b);
}

double
normal_density(double x)
{
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

double
normal_cdf(double x)
{
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

}  // namespace

Tensor
laplace_bits(const Tensor& y, const Tensor& mu, const Tensor& b, const Tensor& delta)
{
  require_same_shape(y, mu, "laplace_bits");
  require_same_shape(y, b, "laplace_bits");
  require_same_shape(y, delta, "laplace_bits");
  Matrix out(y.rows(), y.cols());
  for (Eigen::Index i = 0; i < y.value().size(); ++i) {
    const double d = delta.value().data()[i];
    const double s = b.value().data()[i];
    if (!(d > 0.0) || !(s > 0.0))
      fail(ErrorCode::kNumericalError, "laplace_bits: non-positive scale or step");
    const double p = laplace_mass(y.value().data()[i], mu.value().data()[i], s, 0.5 * d);
    out.data()[i] = -std::log2(std::max(p, kLikelihoodFloor));
  }
  return make_result(std::move(out), {y.node(), mu.node(), b.node(), delta.node()}, [](Node& n) {
    const Matrix& Y = n.inputs[0]->value;
    const Matrix& M = n.inputs[1]->value;
    const Matrix& B = n.inputs[2]->value;
    const Matrix& D = n.inputs[3]->value;
    Matrix gy(Y.rows(), Y.cols()), gm(Y.rows(), Y.cols()), gb(Y.rows(), Y.cols()), gd(Y.rows(), Y.cols());
    for (Eigen::Index i = 0; i < Y.size(); ++i) {
      const double y = Y.data()[i], mu = M.data()[i], b = B.data()[i], half = 0.5 * D.data()[i];
      const double p = laplace_mass(y, mu, b, half);
      if (p < kLikelihoodFloor) {
        gy.data()[i] = gm.data()[i] = gb.data()[i] = gd.data()[i] = 0.0;
        continue;
      }
      const double up = y + half, lo = y - half;
      const double fu = laplace_density(up, mu, b), fl = laplace_density(lo, mu, b);
      const double dbits = -n.grad.data()[i] / (p * kLn2);
      gy.data()[i] = dbits * (fu - fl);
      gm.data()[i] = dbits * (fl - fu);
      gb.data()[i] = dbits * -(fu * (up - mu) - fl * (lo - mu)) / b;
      gd.data()[i] = dbits * 0.5 * (fu + fl);
    }
    accumulate(n.inputs[0], gy);
    accumulate(n.inputs[1], gm);
    accumulate(n.inputs[2], gb);
    accumulate(n.inputs[3], gd);
  });
}

Tensor
gaussian_bits(const Tensor& z, const Tensor& mu, const Tensor& sigma)
{
  require_same_shape(z, mu, "gaussian_bits");
  require_same_shape(z, sigma, "gaussian_bits");
  auto mass = [](double z, double mu, double s) {
    // Reflect into the left tail where erfc keeps precision.
    const double t = -std::abs(z - mu);
    return normal_cdf((t + 0.5) / s) - normal_cdf((t - 0.5) / s);
  };
  Matrix out(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.value().size(); ++i) {
    const double s = sigma.value().data()[i];
    if (!(s > 0.0))
      fail(ErrorCode::kNumericalError, "gaussian_bits: non-positive scale");
    const double p = mass(z.value().data()[i], mu.value().data()[i], s);
    out.data()[i] = -std::log2(std::max(p, kLikelihoodFloor));
  }
  return make_result(std::move(out), {z.node(), mu.node(), sigma.node()}, [mass](Node& n) {
    const Matrix& Z = n.inputs[0]->value;
    const Matrix& M = n.inputs[1]->value;
    const Matrix& S = n.inputs[2]->value;
    Matrix gz(Z.rows(), Z.cols()), gm(Z.rows(), Z.cols()), gs(Z.rows(), Z.cols());
    for (Eigen::Index i = 0; i < Z.size(); ++i) {
      const double z = Z.data()[i], mu = M.data()[i], s = S.data()[i];
      const double p = mass(z, mu, s);
      if (p < kLikelihoodFloor) {
        gz.data()[i] = gm.data()[i] = gs.data()[i] = 0.0;
        continue;
      }
      const double a = (z + 0.5 - mu) / s, c = (z - 0.5 - mu) / s;
      const double pa = normal_density(a), pc = normal_density(c);
      const double dbits = -n.grad.data()[i] / (p * kLn2);
      gz.data()[i] = dbits * (pa - pc) / s;
      gm.data()[i] = -gz.data()[i];
      gs.data()[i] = dbits * -(a * pa - c * pc) / s;
    }
    accumulate(n.inputs[0], gz);
    accumulate(n.inputs[1], gm);
    accumulate(n.inputs[2], gs);
  });
}

Tensor
straight_through_quantize(const Tensor& y, const Tensor& delta)
{
  require_same_shape(y, delta, "straight_through_quantize");
  Matrix out(y.rows(), y.cols());
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    const double d = delta.value().data()[i];
    out.data()[i] = d * std::nearbyint(y.value().data()[i] / d);
  }
  // Identity to y; the step gets the exact local derivative round(y / delta).
  return make_result(std::move(out), {y.node(), delta.node()}, [](Node& n) {
    accumulate(n.inputs[0], n.grad);
    const Matrix& yv = n.inputs[0]->value;
    const Matrix& dv = n.inputs[1]->value;
    Matrix g(yv.rows(), yv.cols());
    for (Eigen::Index i = 0; i < g.size(); ++i)
      g.data()[i] = n.grad.data()[i] * std::nearbyint(yv.data()[i] / dv.data()[i]);
    accumulate(n.inputs[1], g);
  });
}

}  // namespace spac::nn
