#include "mim/autodiff.hpp"

#include <algorithm>

#include "mim/error.hpp"

namespace mim::ad {
namespace {
thread_local bool t_grad_enabled = true;
}

Var Var::constant(Tensor value) {
  Var v;
  v.node_ = std::make_shared<Node>();
  MIM_CHECK(value.all_finite(), NumericError, "non-finite constant");
  v.node_->value = std::move(value);
  return v;
}

Var Var::parameter(Tensor value) {
  Var v = constant(std::move(value));
  v.node_->requires_grad = true;
  return v;
}

Tensor& Var::leaf_value() {
  MIM_CHECK(node_ && node_->parents.empty(), Error, "leaf_value() on a non-leaf node");
  return node_->value;
}

Var make_op(Tensor value, std::vector<Var> parents, BackwardFn backward) {
  MIM_CHECK(value.all_finite(), NumericError,
            "non-finite value produced by op with output shape " + shape_str(value.shape()));
  Var out;
  out.node_ = std::make_shared<Node>();
  out.node_->value = std::move(value);
  if (!t_grad_enabled) return out;
  const bool needs = std::any_of(parents.begin(), parents.end(),
                                 [](const Var& p) { return p.requires_grad(); });
  if (!needs) return out;
  out.node_->requires_grad = true;
  out.node_->backward = std::move(backward);
  out.node_->parents.reserve(parents.size());
  for (auto& p : parents) out.node_->parents.push_back(p.node_ptr());
  return out;
}

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }
bool grad_enabled() { return t_grad_enabled; }

Tensor Gradients::of(const Var& v) const {
  auto it = grads_.find(v.node());
  if (it != grads_.end()) return it->second;
  return Tensor(v.shape());
}

Gradients backward(const Var& loss) {
  MIM_CHECK(loss.defined() && loss.size() == 1, ShapeError,
            "backward() needs a scalar loss, got shape " +
                (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
  Gradients out;
  if (!loss.requires_grad()) return out;

  // Iterative post-order DFS gives a topological order (parents before children).
  std::vector<Node*> order;
  std::unordered_map<const Node*, bool> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{const_cast<Node*>(loss.node()), 0}};
  visited[loss.node()] = true;
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && !visited[p]) {
        visited[p] = true;
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  auto& grads = out.grads_;
  grads[loss.node()] = Tensor(loss.shape(), 1.0);
  std::vector<Tensor*> parent_bufs;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (!node->backward) continue;
    auto git = grads.find(node);
    if (git == grads.end()) continue;
    parent_bufs.clear();
    for (auto& p : node->parents) {
      if (!p->requires_grad) {
        parent_bufs.push_back(nullptr);
        continue;
      }
      auto [pit, inserted] = grads.try_emplace(p.get());
      if (inserted) pit->second = Tensor(p->value.shape());
      parent_bufs.push_back(&pit->second);
    }
    // try_emplace above may rehash; re-find this node's gradient afterwards.
    const Tensor& g = grads.find(node)->second;
    node->backward(g, parent_bufs);
  }
  return out;
}

}  // namespace mim::ad
