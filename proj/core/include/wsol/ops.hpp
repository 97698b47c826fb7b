#pragma once

#include <cstddef>
#include <vector>

#include "wsol/graph.hpp"

namespace wsol {

/// [m,k] x [k,n] -> [m,n].
Var matmul(Var a, Var b);
/// [m,n] -> [n,m].
Var transpose(Var a);
Var reshape(Var a, Shape shape);

/// Row-wise softmax of a matrix, max-shifted. Throws NumericError on NaN.
Var softmax_rows(Var a);

// Binary ops accept equal shapes, a single-element operand (broadcast to
// every element), or an operand whose shape equals the other's shape without
// its leading axis (a [H,W] mask against a [C,H,W] map). Gradients of a
// broadcast operand are summed over the broadcast positions.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);

Var relu(Var a);
Var sigmoid(Var a);
Var square(Var a);
Var scale(Var a, double factor);
Var add_constant(Var a, double c);

enum class ElementwiseKind { add, mul, sub, relu, sigmoid, square };
/// Dispatcher over the elementwise set; `b` is required for binary kinds.
Var elementwise(ElementwiseKind kind, Var a, Var b = {});

enum class ReduceKind { mean, sum };
/// Reduces over `axes` (distinct, in range). Reduced axes are removed; a full
/// reduction yields shape [1].
Var reduce(ReduceKind kind, Var a, const std::vector<std::size_t>& axes);
Var sum(Var a, const std::vector<std::size_t>& axes);
Var mean(Var a, const std::vector<std::size_t>& axes);
Var sum_all(Var a);
Var mean_all(Var a);

/// Blocks gradient flow: same value, treated as a constant by backward().
Var stop_gradient(Var a);

/// [C,H,W] * [O,C,K,K] -> [O,H,W]; stride 1, zero padding K/2, K odd.
Var conv2d(Var x, Var weights);
/// 2x2 max pooling with stride 2 over [C,H,W]; odd trailing rows/cols dropped.
Var max_pool2(Var x);

/// (x - mean(x)) / sqrt(var(x) + eps) over all elements of x; no learned
/// scale or shift.
Var standardize(Var x, double eps = 1e-5);

/// Euclidean distance between equal-shaped tensors, shape [1]. The gradient
/// at zero distance is taken as zero.
Var l2_distance(Var a, Var b);

/// -log softmax(logits)[label] for a logit vector, computed via log-sum-exp.
Var cross_entropy_logits(Var logits, std::size_t label);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

}  // namespace wsol
