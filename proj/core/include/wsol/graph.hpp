#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <map>
#include <span>
#include <string_view>
#include <vector>

#include "wsol/tensor.hpp"

namespace wsol {

enum class OpKind {
  leaf,
  matmul,
  transpose,
  reshape,
  softmax_rows,
  add,
  sub,
  mul,
  relu,
  sigmoid,
  square,
  scale,
  add_constant,
  reduce_sum,
  reduce_mean,
  conv2d,
  max_pool,
  stop_gradient,
  l2_distance,
  cross_entropy,
  standardize,
};

std::string_view op_name(OpKind kind);

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;

  Graph& graph() const { return *graph_; }
  std::size_t id() const noexcept { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t numel() const { return value().numel(); }
  bool requires_grad() const;
  bool valid() const noexcept { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* g, std::size_t id) : graph_(g), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

using GradientMap = std::map<std::size_t, Tensor>;

/// Tape of recorded operations for reverse-mode differentiation.
///
/// Nodes are appended in creation order, which is a topological order since an
/// op can only consume nodes that already exist. Recorded values are never
/// mutated. backward() runs once per graph; build a new graph to re-forward.
class Graph {
 public:
  /// Accumulates into the gradients of the op's inputs given the gradient of
  /// its output `self`. Only called when the output requires a gradient.
  using BackwardFn = std::function<void(Graph& g, std::size_t self, std::span<const double> out_grad)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Constant leaf; no gradient is tracked.
  Var input(Tensor value);
  /// Differentiable leaf.
  Var parameter(Tensor value);

  const Tensor& value(Var v) const;
  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id()).requires_grad; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  OpKind kind(Var v) const { return nodes_.at(v.id()).kind; }
  std::size_t size() const noexcept { return nodes_.size(); }
  bool backward_done() const noexcept { return backward_done_; }

  /// Gradient of the last backward() loss with respect to v. Nodes that were
  /// not reached get an all-zero tensor.
  Tensor grad(Var v) const;

  /// Reverse pass from a single-element loss. Returns gradients of every
  /// differentiable leaf keyed by node id.
  GradientMap backward(Var loss);

  // Op-author interface.
  Var record(OpKind kind, std::vector<std::size_t> inputs, Tensor value, BackwardFn backward);
  /// Mutable gradient buffer of node `id` (allocated zeroed on first use).
  std::span<double> grad_buffer(std::size_t id);

 private:
  struct Node {
    Tensor value;
    std::vector<double> grad;
    bool requires_grad = false;
    OpKind kind = OpKind::leaf;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
  };

  Var make(Node node);

  std::deque<Node> nodes_;  // deque: references to values stay valid as nodes are added
  bool backward_done_ = false;
};

}  // namespace wsol
