#include "inpaint/autograd.hpp"

#include <unordered_set>

#include "inpaint/errors.hpp"

namespace inpaint {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

namespace detail {

Tensor& Node::grad_buffer() {
  if (grad.shape() != value.shape()) grad = Tensor(value.shape(), 0);
  return grad;
}

}  // namespace detail

Var::Var(Tensor value, bool requires_grad)
    : node_(std::make_shared<detail::Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Scalar Var::item() const {
  if (node_->value.size() != 1) {
    throw ValidationError("item() on non-scalar tensor " + shape().str());
  }
  return node_->value[0];
}

void Var::set_requires_grad(bool on) {
  if (!node_->leaf) throw ValidationError("requires_grad can only be toggled on leaves");
  node_->requires_grad = on;
}

void Var::zero_grad() {
  if (!node_->grad.empty()) node_->grad.fill(0);
}

void Var::backward() const {
  if (node_->value.size() != 1) {
    throw ValidationError("backward() needs a scalar root, got " + shape().str());
  }
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order (inputs first).
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->inputs.size()) {
      detail::Node* child = n->inputs[next++].get();
      if (child && child->requires_grad && !seen.contains(child)) {
        seen.insert(child);
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  for (detail::Node* n : order) {
    if (!n->leaf) n->grad = Tensor(n->value.shape(), 0);
  }
  node_->grad_buffer()[0] += 1;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->backward) n->backward(*n);
  }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

Var make_result(Tensor value, std::vector<Var> inputs,
                std::function<void(detail::Node&)> backward) {
  Var out(std::move(value), false);
  auto& node = *out.node();
  node.leaf = false;
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& in : inputs) needs = needs || in.requires_grad();
  }
  if (needs) {
    node.requires_grad = true;
    node.inputs.reserve(inputs.size());
    for (const auto& in : inputs) node.inputs.push_back(in.node());
    node.backward = std::move(backward);
  }
  return out;
}

}  // namespace inpaint
