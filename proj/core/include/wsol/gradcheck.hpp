#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "wsol/graph.hpp"

namespace wsol {

/// Builds a scalar loss from differentiable inputs inside `g`. Must be a pure
/// function of the input values.
using ScalarGraphFn = std::function<Var(Graph& g, std::span<const Var> inputs)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// |a - n| / max(|a|, |n|, 1e-8)
double relative_error(double analytic, double numeric);

/// Compares reverse-mode gradients of `fn` against central differences
/// (f(x + eps) - f(x - eps)) / (2 eps) for every coordinate of every input.
/// Throws OracleError if two evaluations at the same point disagree.
GradCheckResult finite_difference_check(const ScalarGraphFn& fn, std::vector<Tensor> inputs, double eps = 1e-3);

/// Single-input convenience overload.
double finite_difference_check(const std::function<Var(Graph&, Var)>& fn, const Tensor& x, double eps = 1e-3);

}  // namespace wsol
