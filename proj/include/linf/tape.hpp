#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>

#include "linf/tensor.hpp"

namespace linf {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  Tape* tape() const { return tape_; }
  std::uint32_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

/// Define-by-run reverse-mode tape. Nodes are stored in creation order, which is
/// a topological order, so backward is a single reverse sweep.
class Tape {
 public:
  /// Receives the gradient and value of the node's output; accumulates into its parents.
  using BackwardFn = std::function<void(Tape&, const Tensor& out_grad, const Tensor& out_value)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var leaf(Tensor value);

  /// Records an op output. The backward closure is dropped if no parent needs gradients.
  Var record(Tensor value, std::span<const Var> parents, BackwardFn backward);
  Var record(Tensor value, std::initializer_list<Var> parents, BackwardFn backward) {
    return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()), std::move(backward));
  }

  /// Populates gradients for every requires-grad node reachable from `loss`.
  /// Throws UsageError if `loss` is not a single element.
  void backward(Var loss);

  const Tensor& value(Var v) const { return nodes_[v.id_].value; }
  bool requires_grad(Var v) const { return nodes_[v.id_].requires_grad; }

  /// Gradient buffer, or nullptr if none has been accumulated.
  const Tensor* grad(Var v) const;

  /// Zero-initialised on first use. Only call for requires-grad nodes.
  Tensor& grad_accumulator(Var v);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool has_grad = false;
    BackwardFn backward;
  };

  Var push(Node node);
  std::deque<Node> nodes_;
};

}  // namespace linf
