#include "linalg.hpp"

#include <Eigen/Core>

namespace wsol::detail {

namespace {
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;
}  // namespace

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, double alpha,
          const double* a, const double* b, double beta, double* c) {
  const auto M = static_cast<Eigen::Index>(m);
  const auto N = static_cast<Eigen::Index>(n);
  const auto K = static_cast<Eigen::Index>(k);
  MutMap out(c, M, N);
  if (beta == 0.0)
    out.setZero();
  else if (beta != 1.0)
    out *= beta;
  ConstMap A(a, trans_a ? K : M, trans_a ? M : K);
  ConstMap B(b, trans_b ? N : K, trans_b ? K : N);
  if (!trans_a && !trans_b)
    out.noalias() += alpha * A * B;
  else if (trans_a && !trans_b)
    out.noalias() += alpha * A.transpose() * B;
  else if (!trans_a && trans_b)
    out.noalias() += alpha * A * B.transpose();
  else
    out.noalias() += alpha * A.transpose() * B.transpose();
}

}  // namespace wsol::detail
