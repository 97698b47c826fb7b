#pragma once

#include <cstddef>

namespace wsol::detail {

// Row-major GEMM: C = alpha * op(A) * op(B) + beta * C, with op(A) of shape
// [m,k] and op(B) of shape [k,n]. When trans_a is set, A is stored [k,m].
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, double alpha,
          const double* a, const double* b, double beta, double* c);

}  // namespace wsol::detail
