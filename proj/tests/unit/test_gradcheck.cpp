#include <doctest.h>

#include "oracles.hpp"
#include "wsol/errors.hpp"
#include "wsol/gradcheck.hpp"
#include "wsol/ops.hpp"

using namespace wsol;

TEST_CASE("relative error definition") {
  CHECK(relative_error(1.0, 1.0) == 0.0);
  CHECK(relative_error(2.0, 1.0) == 0.5);
  CHECK(relative_error(0.0, 0.0) == 0.0);
  CHECK(relative_error(1e-9, 0.0) == doctest::Approx(0.1));
}

TEST_CASE("sum has unit gradient") {
  CounterRng rng(20);
  const double err = finite_difference_check([](Graph&, Var x) { return sum_all(x); }, oracle::random_tensor({7}, rng));
  CHECK(err <= 1e-10);
}

TEST_CASE("sum of squares at 1,2,3") {
  const double err =
      finite_difference_check([](Graph&, Var x) { return sum_all(square(x)); }, Tensor::vector({1, 2, 3}));
  CHECK(err <= 1e-8);
}

TEST_CASE("a wrong gradient is detected") {
  // relu at a kink: the one-sided analytic derivative (0) disagrees with the
  // central difference (0.5).
  const double err = finite_difference_check([](Graph&, Var x) { return sum_all(relu(x)); }, Tensor::vector({0.0}));
  CHECK(err == doctest::Approx(1.0));
}

TEST_CASE("non-deterministic functions are rejected") {
  int calls = 0;
  auto fn = [&calls](Graph& g, Var x) { return add(sum_all(x), g.input(Tensor::scalar(++calls))); };
  CHECK_THROWS_AS(finite_difference_check(fn, Tensor::vector({1.0})), OracleError);
}

TEST_CASE("the worst coordinate is reported") {
  const auto r = finite_difference_check(
      [](Graph&, std::span<const Var> v) { return add(sum_all(square(v[0])), sum_all(relu(v[1]))); },
      {Tensor::vector({1, 2}), Tensor::vector({0.5, 0.0})}, 1e-4);
  CHECK(r.worst_input == 1);
  CHECK(r.worst_index == 1);
  CHECK(r.worst_analytic == 0.0);
  CHECK(r.worst_numeric == doctest::Approx(0.5));
}
