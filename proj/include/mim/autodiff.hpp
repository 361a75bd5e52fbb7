#pragma once

// Reverse-mode differentiation over Tensor-valued nodes. Each op records its
// parents and a backward rule; backward() walks the graph once in reverse
// topological order. Graphs are rebuilt on every forward pass and freed when
// the last Var referencing them goes away.

#include <functional>
#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

#include "mim/tensor.hpp"

namespace mim::ad {

// Receives dL/d(out) and one accumulation buffer per parent (null when that
// parent does not need a gradient). Buffers arrive zero-filled or holding
// contributions from other consumers; rules must add, never assign.
using BackwardFn =
    std::function<void(const Tensor& grad_out, std::span<Tensor* const> parent_grads)>;

struct Node {
  Tensor value;
  std::vector<std::shared_ptr<Node>> parents;
  BackwardFn backward;
  bool requires_grad = false;
};

class Var {
 public:
  Var() = default;

  static Var constant(Tensor value);
  static Var parameter(Tensor value);

  const Tensor& value() const { return node_->value; }
  // Only leaves may be mutated in place (optimizer updates, checkpoint loads).
  Tensor& leaf_value();

  const Shape& shape() const { return node_->value.shape(); }
  std::size_t rows() const { return node_->value.rows(); }
  std::size_t cols() const { return node_->value.cols(); }
  std::size_t size() const { return node_->value.size(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool defined() const { return static_cast<bool>(node_); }
  const Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& node_ptr() const { return node_; }

 private:
  friend Var make_op(Tensor value, std::vector<Var> parents, BackwardFn backward);
  std::shared_ptr<Node> node_;
};

// Builds a result node. Throws NumericError if value has a non-finite entry.
// The backward rule is dropped when no parent needs a gradient or when a
// NoGradGuard is active on this thread.
Var make_op(Tensor value, std::vector<Var> parents, BackwardFn backward);

// Suppresses graph recording on the current thread for its lifetime.
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

class Gradients {
 public:
  // dL/dv, or zeros shaped like v when v is unreachable from the loss.
  Tensor of(const Var& v) const;
  bool reached(const Var& v) const { return grads_.count(v.node()) != 0; }

 private:
  friend Gradients backward(const Var& loss);
  std::unordered_map<const Node*, Tensor> grads_;
};

// Throws ShapeError unless loss holds exactly one element.
Gradients backward(const Var& loss);

}  // namespace mim::ad
