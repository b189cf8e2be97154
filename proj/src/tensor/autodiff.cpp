#include "vpf/autodiff.hpp"

#include <unordered_set>

#include "vpf/kernels.hpp"

namespace vpf {
namespace {

thread_local bool t_grad_enabled = true;

}  // namespace

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

const Tensor& Var::value() const {
  if (!node_) throw std::logic_error("use of undefined Var");
  return node_->value;
}

const Tensor& Var::grad() const {
  if (!node_) throw std::logic_error("use of undefined Var");
  return node_->grad;
}

bool Var::requires_grad() const { return node_ && node_->requires_grad; }
bool Var::is_leaf() const { return node_ && node_->leaf; }

void Var::zero_grad() {
  if (node_) node_->grad = Tensor();
}

void Var::assign(Tensor value) {
  if (!node_) throw std::logic_error("assign to undefined Var");
  if (!node_->leaf) throw std::logic_error("assign is only valid on leaf variables");
  if (value.shape() != node_->value.shape()) {
    throw ShapeError("assign: shape " + shape_str(value.shape()) + " does not match " +
                     shape_str(node_->value.shape()));
  }
  node_->value = std::move(value);
}

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : saved_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = saved_; }

Var make_result(Tensor value, std::vector<Var> inputs,
                std::function<void(const Tensor&)> backward) {
  if (nan_check_enabled() && !value.all_finite()) {
    throw NumericError("non-finite value produced by op with output shape " +
                       shape_str(value.shape()));
  }
  Var out(std::move(value), false);
  if (!t_grad_enabled) return out;
  bool any = false;
  for (const Var& v : inputs) any = any || v.requires_grad();
  if (!any) return out;
  Node& n = *out.node_;
  n.requires_grad = true;
  n.leaf = false;
  n.parents.reserve(inputs.size());
  for (const Var& v : inputs) {
    if (v.requires_grad()) n.parents.push_back(v.node());
  }
  n.backward = std::move(backward);
  return out;
}

void accumulate_grad(const Var& v, const Tensor& g) {
  if (!v.requires_grad()) return;
  Node& n = *v.node();
  if (g.shape() != n.value.shape()) {
    throw ShapeError("gradient shape " + shape_str(g.shape()) + " does not match value shape " +
                     shape_str(n.value.shape()));
  }
  if (g.dtype() != n.value.dtype()) throw std::logic_error("gradient dtype mismatch");
  if (!n.grad.defined()) {
    n.grad = g;
    return;
  }
  Tensor sum = n.grad.unique() ? n.grad : n.grad.clone();
  visit_dtype(g.dtype(), [&](auto tag) {
    using T = decltype(tag);
    kernels::axpy(g.numel(), T(1), g.data<T>(), sum.mutable_data<T>());
  });
  n.grad = std::move(sum);
}

void backward(const Var& loss) {
  if (!loss.defined()) throw std::logic_error("backward on undefined Var");
  if (loss.numel() != 1) {
    throw ShapeError("backward requires a scalar loss, got shape " + shape_str(loss.shape()));
  }
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    if (!n->leaf) n->grad = Tensor();
  }
  loss.node()->grad = Tensor::full(loss.shape(), 1.0, loss.dtype());
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->leaf || !n->grad.defined()) continue;
    Tensor g = std::move(n->grad);
    n->grad = Tensor();
    n->backward(g);
  }
}

}  // namespace vpf
