#include "laser/diffcore/tape.hpp"

#include "laser/error.hpp"

namespace laser::diff {

const Tensor& Var::value() const { return tape_->value(id_); }

Var Tape::constant(Tensor value) {
  if (!value.all_finite()) throw NumericError("non-finite constant placed on tape");
  nodes_.push_back(Node{std::move(value), {}, false, false, {}, {}, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::variable(Tensor value) {
  if (!value.all_finite()) throw NumericError("non-finite variable placed on tape");
  nodes_.push_back(Node{std::move(value), {}, false, true, {}, {}, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(const Parameter& param) {
  if (!param.value.all_finite()) {
    throw NumericError("parameter '" + param.name + "' holds non-finite values");
  }
  nodes_.push_back(Node{param.value, {}, false, true, {}, {}, &param});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::vector<std::size_t> parents, BackwardFn fn, const char* op) {
  if (!value.all_finite()) {
    throw NumericError(std::string("non-finite value produced by ") + op);
  }
  bool needs = false;
  for (std::size_t p : parents) needs = needs || nodes_[p].requires_grad;
  Node node{std::move(value), {}, false, needs, std::move(parents), {}, nullptr};
  if (needs) node.backward = std::move(fn);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Tensor& Tape::grad_buffer(std::size_t id) {
  Node& node = nodes_[id];
  if (!node.has_grad) {
    node.grad = Tensor::zeros_like(node.value);
    node.has_grad = true;
  }
  return node.grad;
}

Tensor Tape::grad(Var v) const {
  const Node& node = nodes_[v.id()];
  return node.has_grad ? node.grad : Tensor::zeros_like(node.value);
}

GradientMap Tape::backward(Var loss) {
  if (&loss.tape() != this) throw ContractError("backward: loss node belongs to another tape");
  if (loss.value().size() != 1) {
    throw ContractError("backward: loss must be scalar, got shape " +
                        shape_string(loss.value().shape()));
  }
  for (Node& node : nodes_) {
    node.has_grad = false;
    node.grad = Tensor();
  }
  grad_buffer(loss.id()).fill(1.0);

  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.has_grad || !node.backward) continue;
    node.backward(*this, i);
  }

  GradientMap grads;
  for (const Node& node : nodes_) {
    if (!node.param) continue;
    auto [it, inserted] = grads.try_emplace(node.param, Tensor::zeros_like(node.value));
    if (node.has_grad) {
      auto dst = it->second.data();
      auto src = node.grad.data();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
  }
  return grads;
}

bool Tape::topologically_ordered() const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    for (std::size_t p : nodes_[i].parents) {
      if (p >= i) return false;
    }
  }
  return true;
}

}  // namespace laser::diff
