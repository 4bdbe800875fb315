#include "quarc/autodiff.hpp"

#include <algorithm>

#include "quarc/error.hpp"

namespace quarc {

std::size_t ParameterSet::add(std::string name, Tensor value, bool trainable) {
  if (find(name)) throw ContractError("parameter name '" + name + "' is already registered");
  items_.push_back({std::move(name), std::move(value), trainable});
  return items_.size() - 1;
}

std::optional<std::size_t> ParameterSet::find(std::string_view name) const {
  for (std::size_t i = 0; i < items_.size(); ++i)
    if (items_[i].name == name) return i;
  return std::nullopt;
}

std::size_t ParameterSet::index_of(std::string_view name) const {
  if (auto idx = find(name)) return *idx;
  throw ContractError("no parameter named '" + std::string(name) + "'");
}

std::size_t ParameterSet::trainable_scalars() const {
  std::size_t n = 0;
  for (const auto& p : items_)
    if (p.trainable) n += p.value.real_dim();
  return n;
}

Gradients::Gradients(const ParameterSet& params) {
  grads_.reserve(params.size());
  for (const auto& p : params) grads_.push_back(Tensor::zeros_like(p.value));
}

void Gradients::zero() {
  for (auto& g : grads_) g.fill(0.0);
}

void Gradients::add(const Gradients& other) {
  if (other.size() != size()) throw ContractError("Gradients::add: parameter sets differ");
  for (std::size_t p = 0; p < grads_.size(); ++p) {
    auto dst = grads_[p].data();
    auto src = other.grads_[p].data();
    for (std::size_t e = 0; e < dst.size(); ++e) dst[e] += src[e];
  }
}

void Gradients::scale(double s) {
  for (auto& g : grads_)
    for (auto& v : g.data()) v *= s;
}

NodeId Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return nodes_.size() - 1;
}

NodeId Tape::variable(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return nodes_.size() - 1;
}

NodeId Tape::param(std::size_t index) {
  if (!params_ || index >= params_->size()) throw ContractError("Tape::param: index out of range");
  Node n;
  n.external = &(*params_)[index].value;
  n.requires_grad = (*params_)[index].trainable;
  n.param_index = static_cast<std::ptrdiff_t>(index);
  nodes_.push_back(std::move(n));
  return nodes_.size() - 1;
}

NodeId Tape::param(std::string_view name) {
  if (!params_) throw ContractError("Tape::param: tape has no parameter set");
  return param(params_->index_of(name));
}

NodeId Tape::record(Tensor value, std::initializer_list<NodeId> inputs, BackwardFn backward) {
  return record(std::move(value), std::vector<NodeId>(inputs), std::move(backward));
}

NodeId Tape::record(Tensor value, const std::vector<NodeId>& inputs, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  for (auto in : inputs) {
    if (in >= nodes_.size()) throw ContractError("Tape::record: input node does not precede the operation");
    n.requires_grad = n.requires_grad || nodes_[in].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return nodes_.size() - 1;
}

const Tensor& Tape::value(NodeId id) const {
  const Node& n = nodes_.at(id);
  return n.external ? *n.external : n.value;
}

Tensor& Tape::grad(NodeId id) {
  Node& n = nodes_.at(id);
  if (!n.grad_ready) {
    n.grad = Tensor::zeros_like(n.external ? *n.external : n.value);
    n.grad_ready = true;
  }
  return n.grad;
}

void Tape::backward(NodeId loss, Gradients& out) {
  const Tensor& lv = value(loss);
  if (lv.is_quaternion() || lv.numel() != 1)
    throw ContractError("backward: loss must be a real scalar, got " + lv.describe());
  if (params_ && out.size() != params_->size())
    throw ContractError("backward: gradient map is not aligned with the parameter set");
  grad(loss)[0] = 1.0;
  for (NodeId id = loss + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.requires_grad || !n.grad_ready) continue;
    if (n.backward) n.backward(*this, id);
    if (n.param_index >= 0) {
      auto dst = out[static_cast<std::size_t>(n.param_index)].data();
      auto src = n.grad.data();
      for (std::size_t e = 0; e < dst.size(); ++e) dst[e] += src[e];
    }
  }
}

Gradients Tape::backward(NodeId loss) {
  Gradients g = params_ ? Gradients(*params_) : Gradients();
  backward(loss, g);
  return g;
}

}  // namespace quarc
