#pragma once

// Minimal reverse-mode tape over Tensor<T>.  Each operation creates a Node that
// keeps its parents and a closure propagating the node's gradient to them.

#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "cfpnet/tensor.hpp"

namespace cfpnet {

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;  // allocated lazily
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;
  bool requires_grad = false;

  Tensor<T>& grad_buffer() {
    if (grad.empty()) grad = Tensor<T>(value.shape());
    return grad;
  }
};

/// Handle to a tape node.  Copies share the node.
template <typename T>
class Var {
public:
  Var() = default;
  explicit Var(Tensor<T> value) : node_(std::make_shared<Node<T>>()) { node_->value = std::move(value); }

  const Tensor<T>& value() const { return node_->value; }
  Tensor<T>& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  const Tensor<T>& grad() const { return node_->grad; }
  bool has_grad() const { return !node_->grad.empty(); }

  std::shared_ptr<Node<T>> node() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

private:
  std::shared_ptr<Node<T>> node_;
};

/// Propagates gradients from root (seeded with seed, or ones when seed is empty).
template <typename T>
void backward(const Var<T>& root, const Tensor<T>* seed = nullptr) {
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  // iterative post-order DFS
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{root.node().get(), 0}};
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* p = node->parents[next++].get();
      if (seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  Tensor<T>& g = root.node()->grad_buffer();
  if (seed) {
    g.require_same(*seed, "backward seed");
    g = *seed;
  } else {
    g.fill(T(1));
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
}

}  // namespace cfpnet
