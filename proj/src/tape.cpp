#include "linf/tape.hpp"

#include "linf/errors.hpp"

namespace linf {

const Tensor& Var::value() const { return tape_->value(*this); }
bool Var::requires_grad() const { return tape_->requires_grad(*this); }

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::leaf(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::record(Tensor value, std::span<const Var> parents, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  for (const Var& p : parents) {
    if (p.tape_ != this) throw UsageError("op mixes variables from different tapes");
    n.requires_grad = n.requires_grad || nodes_[p.id_].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

const Tensor* Tape::grad(Var v) const {
  const Node& n = nodes_[v.id_];
  return n.has_grad ? &n.grad : nullptr;
}

Tensor& Tape::grad_accumulator(Var v) {
  Node& n = nodes_[v.id_];
  if (!n.has_grad) {
    n.grad = Tensor(n.value.shape());
    n.has_grad = true;
  }
  return n.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape_ != this) throw UsageError("backward on a variable from another tape");
  if (value(loss).size() != 1) {
    throw UsageError("backward requires a scalar loss, got shape " + shape_string(value(loss).shape()));
  }
  if (!requires_grad(loss)) return;
  grad_accumulator(loss)[0] += 1.0;
  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad || !n.backward) continue;
    n.backward(*this, n.grad, n.value);
  }
}

}  // namespace linf
