#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "quarc/tensor.hpp"

namespace quarc {

struct Parameter {
  std::string name;
  Tensor value;
  bool trainable = true;
};

// Ordered, uniquely named parameters of one model.
class ParameterSet {
 public:
  std::size_t add(std::string name, Tensor value, bool trainable = true);

  std::size_t size() const noexcept { return items_.size(); }
  Parameter& operator[](std::size_t idx) { return items_[idx]; }
  const Parameter& operator[](std::size_t idx) const { return items_[idx]; }
  std::optional<std::size_t> find(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;

  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

  // Real scalars over trainable parameters (4 per quaternion entry).
  std::size_t trainable_scalars() const;

 private:
  std::vector<Parameter> items_;
};

// One gradient tensor per parameter, aligned with a ParameterSet.
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(const ParameterSet& params);

  std::size_t size() const noexcept { return grads_.size(); }
  Tensor& operator[](std::size_t idx) { return grads_[idx]; }
  const Tensor& operator[](std::size_t idx) const { return grads_[idx]; }

  void zero();
  void add(const Gradients& other);
  void scale(double s);

 private:
  std::vector<Tensor> grads_;
};

using NodeId = std::size_t;
inline constexpr NodeId kNoNode = static_cast<NodeId>(-1);

class Tape;
using BackwardFn = std::function<void(Tape&, NodeId self)>;

// Record of executed operations for one forward pass. Nodes are appended in
// execution order, so every node's inputs precede it. A tape belongs to one
// thread; tapes over the same ParameterSet may run concurrently.
class Tape {
 public:
  explicit Tape(const ParameterSet* params = nullptr) : params_(params) {}

  NodeId constant(Tensor value);
  // Leaf whose gradient is kept (used for inputs under test).
  NodeId variable(Tensor value);
  NodeId param(std::size_t index);
  NodeId param(std::string_view name);

  // Appends an operation result. `backward` runs only when some input
  // requires a gradient.
  NodeId record(Tensor value, std::initializer_list<NodeId> inputs, BackwardFn backward);
  NodeId record(Tensor value, const std::vector<NodeId>& inputs, BackwardFn backward);

  const Tensor& value(NodeId id) const;
  bool requires_grad(NodeId id) const { return nodes_.at(id).requires_grad; }
  // Gradient accumulator of a node, allocated on first use.
  Tensor& grad(NodeId id);
  bool has_grad(NodeId id) const { return nodes_.at(id).grad_ready; }

  std::size_t size() const noexcept { return nodes_.size(); }
  const ParameterSet* params() const noexcept { return params_; }

  // Reverse sweep from a scalar real node. Parameter gradients are added
  // into `out`, which must be aligned with this tape's ParameterSet.
  void backward(NodeId loss, Gradients& out);
  Gradients backward(NodeId loss);

 private:
  struct Node {
    Tensor value;
    const Tensor* external = nullptr;
    Tensor grad;
    bool grad_ready = false;
    bool requires_grad = false;
    std::ptrdiff_t param_index = -1;
    BackwardFn backward;
  };

  const ParameterSet* params_;
  std::vector<Node> nodes_;
};

}  // namespace quarc
