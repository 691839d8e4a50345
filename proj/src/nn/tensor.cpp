// Copyright 2026 The spac Authors
// SPDX-License-Identifier: Apache-2.0

#include "spac/nn/tensor.hpp"

#include <cmath>
#include <unordered_set>

#include "spac/error.hpp"

namespace spac::nn {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled)
{
  g_grad_enabled = false;
}

NoGradGuard::~NoGradGuard()
{
  g_grad_enabled = previous_;
}

bool
grad_enabled()
{
  return g_grad_enabled;
}

Tensor
Tensor::constant(Matrix value)
{
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return Tensor(std::move(n));
}

Tensor
Tensor::parameter(Matrix value)
{
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  return Tensor(std::move(n));
}

Tensor
Tensor::scalar(double v)
{
  Matrix m(1, 1);
  m(0, 0) = v;
  return constant(std::move(m));
}

Matrix
Tensor::grad() const
{
  if (node_->grad.size() == 0)
    return Matrix::Zero(rows(), cols());
  return node_->grad;
}

double
Tensor::item() const
{
  if (rows() != 1 || cols() != 1)
    fail(ErrorCode::kInvalidArgument, "item() on a non-scalar tensor");
  return node_->value(0, 0);
}

void
Tensor::zero_grad()
{
  node_->grad.resize(0, 0);
}

void
Tensor::backward() const
{
  const double v = item();
  if (!std::isfinite(v))
    fail(ErrorCode::kNumericalError, "backward from a non-finite loss");
  if (!node_->requires_grad)
    return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->inputs.size()) {
      Node* child = n->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second)
        stack.emplace_back(child, 0);
      continue;
    }
    order.push_back(n);
    stack.pop_back();
  }

  node_->grad_buffer()(0, 0) += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->grad.size() != 0)
      n->backward_fn(*n);
  }
}

Tensor
make_result(Matrix value, std::vector<NodePtr> inputs, std::function<void(Node&)> backward)
{
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  for (const auto& in : inputs) {
    if (g_grad_enabled && in->requires_grad) {
      n->requires_grad = true;
      break;
    }
  }
  if (n->requires_grad) {
    n->inputs = std::move(inputs);
    n->backward_fn = std::move(backward);
  }
  return Tensor(std::move(n));
}

}  // namespace spac::nn
