#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "vpf/tensor.hpp"

namespace vpf {

struct Node;

/// Handle to a node of the differentiation graph. Leaves created with
/// requires_grad accumulate gradients across backward() calls until
/// zero_grad().
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Tensor& value() const;
  /// Undefined tensor until a backward pass reaches this node.
  const Tensor& grad() const;
  bool requires_grad() const;
  bool is_leaf() const;

  const Shape& shape() const { return value().shape(); }
  int rank() const { return value().rank(); }
  int64_t dim(int axis) const { return value().dim(axis); }
  int64_t numel() const { return value().numel(); }
  DType dtype() const { return value().dtype(); }

  void zero_grad();
  /// Replaces a leaf's value (optimizer updates, checkpoint loads).
  void assign(Tensor value);

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  friend Var make_result(Tensor, std::vector<Var>, std::function<void(const Tensor&)>);
  std::shared_ptr<Node> node_;
};

struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  bool leaf = true;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(const Tensor&)> backward;
};

/// Builds an op output. When gradients are disabled or no input requires
/// them, the result is a constant and `backward` is dropped.
Var make_result(Tensor value, std::vector<Var> inputs,
                std::function<void(const Tensor& grad_out)> backward);

/// Adds `g` into v's gradient buffer (no-op if v does not require grad).
void accumulate_grad(const Var& v, const Tensor& g);

/// Reverse-mode pass from a single-element loss.
void backward(const Var& loss);

bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool saved_;
};

}  // namespace vpf
