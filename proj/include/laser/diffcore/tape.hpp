#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "laser/diffcore/tensor.hpp"

namespace laser::diff {

// A named learnable tensor. Networks own their parameters; the tape only
// refers to them, and gradients are reported keyed by parameter address.
struct Parameter {
  std::string name;
  Tensor value;
};

using GradientMap = std::unordered_map<const Parameter*, Tensor>;

class Tape;

// Handle to a node on a Tape. Cheap to copy; valid as long as the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Records primitive ops in execution order so that the reverse sweep can run
// over node ids from back to front. One tape per training step.
class Tape {
 public:
  // Propagates gradient of this node into its parents. Reads values and the
  // node's own gradient through the tape.
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Differentiable leaf that is not a Parameter (inputs under test).
  Var variable(Tensor value);
  Var parameter(const Parameter& param);

  // Used by ops. `fn` may be empty when no parent requires a gradient.
  Var record(Tensor value, std::vector<std::size_t> parents, BackwardFn fn, const char* op);

  // Reverse sweep from a scalar node. Returns gradients for every parameter
  // recorded on the tape; parameters not reachable from `loss` get zeros.
  GradientMap backward(Var loss);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  // Gradient accumulated by the last backward(); zeros if the node was not reached.
  Tensor grad(Var v) const;

  // Gradient of node `id` during the sweep (allocated on first use).
  const Tensor& grad_of(std::size_t id) const { return nodes_[id].grad; }
  Tensor& grad_buffer(std::size_t id);

  std::size_t size() const { return nodes_.size(); }
  // Parents precede children: the invariant the reverse sweep relies on.
  bool topologically_ordered() const;

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    std::vector<std::size_t> parents;
    BackwardFn backward;
    const Parameter* param = nullptr;
  };

  std::vector<Node> nodes_;
};

}  // namespace laser::diff
