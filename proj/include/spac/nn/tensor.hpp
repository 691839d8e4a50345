// Copyright 2026 The spac Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Core>

namespace spac::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

struct Node;
using NodePtr = std::shared_ptr<Node>;

// One vertex of the recorded graph.  backward_fn reads this node's grad and
// accumulates into the grads of `inputs`.
struct Node {
  Matrix value;
  Matrix grad;  // empty until the first accumulation
  bool requires_grad = false;
  std::vector<NodePtr> inputs;
  std::function<void(Node&)> backward_fn;

  Matrix& grad_buffer()
  {
    if (grad.size() == 0)
      grad = Matrix::Zero(value.rows(), value.cols());
    return grad;
  }
};

//============================================================================
// 2-D tensor handle with shared ownership of its graph node.  Copies alias
// the same node.

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(NodePtr node) : node_(std::move(node)) {}

  static Tensor constant(Matrix value);
  static Tensor parameter(Matrix value);
  static Tensor scalar(double v);

  bool defined() const { return node_ != nullptr; }
  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  // Gradient, or a zero matrix of matching shape when nothing reached it.
  Matrix grad() const;
  bool requires_grad() const { return node_ && node_->requires_grad; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  std::array<Eigen::Index, 2> shape() const { return {rows(), cols()}; }
  double item() const;

  void zero_grad();

  // Reverse pass from a 1x1 tensor.  Gradients accumulate into every
  // reachable node that requires them.  Throws kNumericalError if the value
  // is not finite.
  void backward() const;

  const NodePtr& node() const { return node_; }

 private:
  NodePtr node_;
};

// While alive, results on this thread record no graph (inference mode).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// Builds a result node; requires_grad is inherited from the inputs and the
// backward function is dropped when no input needs a gradient.
Tensor make_result(Matrix value, std::vector<NodePtr> inputs, std::function<void(Node&)> backward);

}  // namespace spac::nn
