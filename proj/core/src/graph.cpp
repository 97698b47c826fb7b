#include "wsol/graph.hpp"

#include <algorithm>

#include "wsol/errors.hpp"

namespace wsol {

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::leaf: return "leaf";
    case OpKind::matmul: return "matmul";
    case OpKind::transpose: return "transpose";
    case OpKind::reshape: return "reshape";
    case OpKind::softmax_rows: return "softmax_rows";
    case OpKind::add: return "add";
    case OpKind::sub: return "sub";
    case OpKind::mul: return "mul";
    case OpKind::relu: return "relu";
    case OpKind::sigmoid: return "sigmoid";
    case OpKind::square: return "square";
    case OpKind::scale: return "scale";
    case OpKind::add_constant: return "add_constant";
    case OpKind::reduce_sum: return "reduce_sum";
    case OpKind::reduce_mean: return "reduce_mean";
    case OpKind::conv2d: return "conv2d";
    case OpKind::max_pool: return "max_pool";
    case OpKind::stop_gradient: return "stop_gradient";
    case OpKind::l2_distance: return "l2_distance";
    case OpKind::cross_entropy: return "cross_entropy";
    case OpKind::standardize: return "standardize";
  }
  return "unknown";
}

const Tensor& Var::value() const { return graph_->value(*this); }
bool Var::requires_grad() const { return graph_->requires_grad(*this); }

const Tensor& Graph::value(Var v) const {
  if (v.graph_ != this) throw ArgumentError("variable belongs to a different graph");
  return nodes_.at(v.id_).value;
}

Var Graph::make(Node node) {
  if (backward_done_) throw StateError("graph already differentiated; build a new graph to re-forward");
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Graph::input(Tensor value) {
  Node n;
  n.value = std::move(value);
  return make(std::move(n));
}

Var Graph::parameter(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  return make(std::move(n));
}

Var Graph::record(OpKind kind, std::vector<std::size_t> inputs, Tensor value, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  n.kind = kind;
  n.requires_grad = std::any_of(inputs.begin(), inputs.end(),
                                [this](std::size_t id) { return nodes_.at(id).requires_grad; });
  n.inputs = std::move(inputs);
  if (n.requires_grad) n.backward = std::move(backward);
  return make(std::move(n));
}

std::span<double> Graph::grad_buffer(std::size_t id) {
  auto& n = nodes_.at(id);
  if (n.grad.empty()) n.grad.assign(n.value.numel(), 0.0);
  return n.grad;
}

Tensor Graph::grad(Var v) const {
  if (v.graph_ != this) throw ArgumentError("variable belongs to a different graph");
  if (!backward_done_) throw StateError("grad() requested before backward()");
  const auto& n = nodes_.at(v.id_);
  if (n.grad.empty()) return Tensor(n.value.shape());
  return Tensor(n.value.shape(), n.grad);
}

GradientMap Graph::backward(Var loss) {
  if (loss.graph_ != this) throw ArgumentError("loss belongs to a different graph");
  if (backward_done_) throw StateError("backward() already ran on this graph");
  const auto& root = nodes_.at(loss.id_);
  if (root.value.numel() != 1)
    throw ArgumentError("backward() needs a scalar loss, got shape " + shape_str(root.value.shape()));
  backward_done_ = true;

  GradientMap out;
  if (!root.requires_grad) {
    for (std::size_t id = 0; id < nodes_.size(); ++id)
      if (nodes_[id].requires_grad && nodes_[id].kind == OpKind::leaf)
        out.emplace(id, Tensor(nodes_[id].value.shape()));
    return out;
  }

  grad_buffer(loss.id_)[0] = 1.0;
  for (std::size_t id = loss.id_ + 1; id-- > 0;) {
    auto& n = nodes_[id];
    if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
    // Input buffers are separate allocations, so this span stays valid.
    n.backward(*this, id, std::span<const double>(n.grad));
  }
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    const auto& n = nodes_[id];
    if (n.requires_grad && n.kind == OpKind::leaf)
      out.emplace(id, n.grad.empty() ? Tensor(n.value.shape()) : Tensor(n.value.shape(), n.grad));
  }
  return out;
}

}  // namespace wsol
