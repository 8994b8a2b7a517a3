#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "inpaint/tensor.hpp"

namespace inpaint {

namespace detail {

struct Node {
  Tensor value;
  Tensor grad;  // empty until something flows into it
  bool requires_grad = false;
  bool leaf = true;
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates into inputs' grads.
  std::function<void(Node&)> backward;

  Tensor& grad_buffer();
};

// Gradient buffer of input i, or nullptr when that input takes no gradient.
inline Tensor* input_grad(Node& self, std::size_t i) {
  const auto& in = self.inputs[i];
  return in && in->requires_grad ? &in->grad_buffer() : nullptr;
}

}  // namespace detail

// Handle to a node of a reverse-mode tape. Copies share the node, so a Var
// held by a module and the same Var captured in a graph refer to one tensor.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  Scalar item() const;

  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool on);

  // Empty tensor when no gradient has reached this node.
  const Tensor& grad() const { return node_->grad; }
  Tensor& mutable_grad() { return node_->grad_buffer(); }
  void zero_grad();

  // Seeds d(self)/d(self) = 1 and propagates to every reachable leaf.
  // Leaf gradients accumulate across calls; interior gradients are reset,
  // so several roots sharing a subgraph may be back-propagated in turn.
  void backward() const;

  Var detach() const { return Var(node_->value, false); }

  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

// Disables graph recording on the current thread for its lifetime.
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

// Builds a result node. The backward closure is kept only if recording is
// enabled and at least one input requires a gradient.
Var make_result(Tensor value, std::vector<Var> inputs,
                std::function<void(detail::Node&)> backward);

}  // namespace inpaint
