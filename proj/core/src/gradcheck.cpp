#include "wsol/gradcheck.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "wsol/errors.hpp"

namespace wsol {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

namespace {

double evaluate(const ScalarGraphFn& fn, const std::vector<Tensor>& inputs) {
  Graph g;
  std::vector<Var> vars;
  vars.reserve(inputs.size());
  for (const auto& t : inputs) vars.push_back(g.input(t));
  const Var out = fn(g, vars);
  if (out.numel() != 1) throw ArgumentError("finite_difference_check: function must return a scalar");
  return out.value()[0];
}

}  // namespace

GradCheckResult finite_difference_check(const ScalarGraphFn& fn, std::vector<Tensor> inputs, double eps) {
  if (!(eps > 0.0)) throw ArgumentError("finite_difference_check: eps must be positive");

  std::vector<Tensor> analytic;
  {
    Graph g;
    std::vector<Var> vars;
    for (const auto& t : inputs) vars.push_back(g.parameter(t));
    const Var loss = fn(g, vars);
    g.backward(loss);
    for (const auto& v : vars) analytic.push_back(g.grad(v));
  }

  const double f0 = evaluate(fn, inputs);
  const double f0_again = evaluate(fn, inputs);
  if (std::bit_cast<std::uint64_t>(f0) != std::bit_cast<std::uint64_t>(f0_again))
    throw OracleError("finite_difference_check: function is not deterministic");

  GradCheckResult result;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    for (std::size_t i = 0; i < inputs[t].numel(); ++i) {
      const double orig = inputs[t][i];
      inputs[t][i] = orig + eps;
      const double fp = evaluate(fn, inputs);
      inputs[t][i] = orig - eps;
      const double fm = evaluate(fn, inputs);
      inputs[t][i] = orig;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double err = relative_error(analytic[t][i], numeric);
      if (err > result.max_rel_error || (t == 0 && i == 0)) {
        result.max_rel_error = err;
        result.worst_input = t;
        result.worst_index = i;
        result.worst_analytic = analytic[t][i];
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

double finite_difference_check(const std::function<Var(Graph&, Var)>& fn, const Tensor& x, double eps) {
  return finite_difference_check([&fn](Graph& g, std::span<const Var> in) { return fn(g, in[0]); },
                                 std::vector<Tensor>{x}, eps)
      .max_rel_error;
}

}  // namespace wsol
