#include "wsol/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "linalg.hpp"
#include "wsol/errors.hpp"

namespace wsol {

namespace {

void require_valid(Var a) {
  if (!a.valid()) throw ArgumentError("operation on an empty variable");
}

void require_same_graph(Var a, Var b) {
  require_valid(a);
  require_valid(b);
  if (&a.graph() != &b.graph()) throw ArgumentError("operands belong to different graphs");
}

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) throw ShapeError(std::string(op) + " expects a matrix, got " + shape_str(t.shape()));
}

// ---------------------------------------------------------------------------
// Broadcasting for binary ops

enum class Broadcast { same, b_scalar, a_scalar, b_leading, a_leading };

bool drops_leading_axis(const Shape& big, const Shape& small) {
  return big.size() == small.size() + 1 && std::equal(small.begin(), small.end(), big.begin() + 1);
}

struct BinaryLayout {
  Broadcast mode = Broadcast::same;
  Shape out_shape;
  std::size_t n = 0;
  std::size_t a_count = 0;
  std::size_t b_count = 0;

  std::size_t ia(std::size_t i) const {
    if (mode == Broadcast::a_scalar) return 0;
    if (mode == Broadcast::a_leading) return i % a_count;
    return i;
  }
  std::size_t ib(std::size_t i) const {
    if (mode == Broadcast::b_scalar) return 0;
    if (mode == Broadcast::b_leading) return i % b_count;
    return i;
  }
};

BinaryLayout layout_for(const Tensor& a, const Tensor& b, const char* op) {
  BinaryLayout l;
  if (a.shape() == b.shape())
    l.mode = Broadcast::same;
  else if (b.numel() == 1)
    l.mode = Broadcast::b_scalar;
  else if (a.numel() == 1)
    l.mode = Broadcast::a_scalar;
  else if (drops_leading_axis(a.shape(), b.shape()))
    l.mode = Broadcast::b_leading;
  else if (drops_leading_axis(b.shape(), a.shape()))
    l.mode = Broadcast::a_leading;
  else
    throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  const bool a_small = l.mode == Broadcast::a_scalar || l.mode == Broadcast::a_leading;
  l.out_shape = a_small ? b.shape() : a.shape();
  l.n = shape_numel(l.out_shape);
  l.a_count = a.numel();
  l.b_count = b.numel();
  return l;
}

// fwd(x, y) -> value; da/db(x, y) -> partial derivatives.
template <class Fwd, class DA, class DB>
Var binary(Var a, Var b, OpKind kind, const char* name, Fwd fwd, DA da, DB db) {
  require_same_graph(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const BinaryLayout l = layout_for(av, bv, name);
  Tensor out(l.out_shape);
  for (std::size_t i = 0; i < l.n; ++i) out[i] = fwd(av[l.ia(i)], bv[l.ib(i)]);
  const std::size_t ida = a.id(), idb = b.id();
  return a.graph().record(kind, {ida, idb}, std::move(out),
                          [ida, idb, l, da, db](Graph& g, std::size_t, std::span<const double> go) {
                            const Tensor& x = g.value(ida);
                            const Tensor& y = g.value(idb);
                            if (g.requires_grad(ida)) {
                              auto ga = g.grad_buffer(ida);
                              for (std::size_t i = 0; i < l.n; ++i) {
                                const std::size_t i_a = l.ia(i), i_b = l.ib(i);
                                ga[i_a] += go[i] * da(x[i_a], y[i_b]);
                              }
                            }
                            if (g.requires_grad(idb)) {
                              auto gb = g.grad_buffer(idb);
                              for (std::size_t i = 0; i < l.n; ++i) {
                                const std::size_t i_a = l.ia(i), i_b = l.ib(i);
                                gb[i_b] += go[i] * db(x[i_a], y[i_b]);
                              }
                            }
                          });
}

// fwd(x) -> y; deriv(x, y) -> dy/dx.
template <class Fwd, class Deriv>
Var unary(Var a, OpKind kind, Fwd fwd, Deriv deriv) {
  require_valid(a);
  const Tensor& av = a.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.numel(); ++i) out[i] = fwd(av[i]);
  const std::size_t ida = a.id();
  return a.graph().record(kind, {ida}, std::move(out),
                          [ida, deriv](Graph& g, std::size_t self, std::span<const double> go) {
                            const Tensor& x = g.value(ida);
                            const Tensor& y = g.value(self);
                            auto ga = g.grad_buffer(ida);
                            for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * deriv(x[i], y[i]);
                          });
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

// ---------------------------------------------------------------------------
// Linear algebra

Var matmul(Var a, Var b) {
  require_same_graph(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_matrix(av, "matmul");
  require_matrix(bv, "matmul");
  const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  if (bv.dim(0) != k)
    throw ShapeError("matmul: inner extents differ, " + shape_str(av.shape()) + " x " + shape_str(bv.shape()));
  Tensor out(Shape{m, n});
  detail::gemm(false, false, m, n, k, 1.0, av.data().data(), bv.data().data(), 0.0, out.data().data());
  const std::size_t ida = a.id(), idb = b.id();
  return a.graph().record(OpKind::matmul, {ida, idb}, std::move(out),
                          [ida, idb, m, n, k](Graph& g, std::size_t, std::span<const double> go) {
                            if (g.requires_grad(ida))  // dA += dOut * B^T
                              detail::gemm(false, true, m, k, n, 1.0, go.data(), g.value(idb).data().data(), 1.0,
                                           g.grad_buffer(ida).data());
                            if (g.requires_grad(idb))  // dB += A^T * dOut
                              detail::gemm(true, false, k, n, m, 1.0, g.value(ida).data().data(), go.data(), 1.0,
                                           g.grad_buffer(idb).data());
                          });
}

Var transpose(Var a) {
  require_valid(a);
  const Tensor& av = a.value();
  require_matrix(av, "transpose");
  const std::size_t m = av.dim(0), n = av.dim(1);
  Tensor out(Shape{n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
  const std::size_t ida = a.id();
  return a.graph().record(OpKind::transpose, {ida}, std::move(out),
                          [ida, m, n](Graph& g, std::size_t, std::span<const double> go) {
                            auto ga = g.grad_buffer(ida);
                            for (std::size_t i = 0; i < m; ++i)
                              for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += go[j * m + i];
                          });
}

Var reshape(Var a, Shape shape) {
  require_valid(a);
  Tensor out = a.value().reshaped(std::move(shape));
  const std::size_t ida = a.id();
  return a.graph().record(OpKind::reshape, {ida}, std::move(out),
                          [ida](Graph& g, std::size_t, std::span<const double> go) {
                            auto ga = g.grad_buffer(ida);
                            for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
                          });
}

Var softmax_rows(Var a) {
  require_valid(a);
  const Tensor& av = a.value();
  require_matrix(av, "softmax_rows");
  const std::size_t m = av.dim(0), n = av.dim(1);
  for (double v : av.data())
    if (std::isnan(v)) throw NumericError("softmax_rows: NaN input");
  Tensor out(av.shape());
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = av.data().data() + i * n;
    double* dst = out.data().data() + i * n;
    const double hi = *std::max_element(row, row + n);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      dst[j] = std::exp(row[j] - hi);
      total += dst[j];
    }
    for (std::size_t j = 0; j < n; ++j) dst[j] /= total;
  }
  const std::size_t ida = a.id();
  return a.graph().record(OpKind::softmax_rows, {ida}, std::move(out),
                          [ida, m, n](Graph& g, std::size_t self, std::span<const double> go) {
                            const Tensor& y = g.value(self);
                            auto ga = g.grad_buffer(ida);
                            for (std::size_t i = 0; i < m; ++i) {
                              const std::size_t off = i * n;
                              double dot = 0.0;
                              for (std::size_t j = 0; j < n; ++j) dot += go[off + j] * y[off + j];
                              for (std::size_t j = 0; j < n; ++j) ga[off + j] += y[off + j] * (go[off + j] - dot);
                            }
                          });
}

// ---------------------------------------------------------------------------
// Elementwise

Var add(Var a, Var b) {
  return binary(
      a, b, OpKind::add, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
  return binary(
      a, b, OpKind::sub, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
  return binary(
      a, b, OpKind::mul, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Var relu(Var a) {
  return unary(
      a, OpKind::relu, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(Var a) {
  return unary(a, OpKind::sigmoid, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Var square(Var a) {
  return unary(
      a, OpKind::square, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var scale(Var a, double factor) {
  return unary(
      a, OpKind::scale, [factor](double x) { return factor * x; }, [factor](double, double) { return factor; });
}

Var add_constant(Var a, double c) {
  return unary(
      a, OpKind::add_constant, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Var elementwise(ElementwiseKind kind, Var a, Var b) {
  switch (kind) {
    case ElementwiseKind::add: return add(a, b);
    case ElementwiseKind::mul: return mul(a, b);
    case ElementwiseKind::sub: return sub(a, b);
    case ElementwiseKind::relu: return relu(a);
    case ElementwiseKind::sigmoid: return sigmoid(a);
    case ElementwiseKind::square: return square(a);
  }
  throw ArgumentError("unknown elementwise kind");
}

// ---------------------------------------------------------------------------
// Reductions

Var reduce(ReduceKind kind, Var a, const std::vector<std::size_t>& axes) {
  require_valid(a);
  const Tensor& av = a.value();
  const Shape& in = av.shape();
  const std::size_t rank = in.size();
  if (axes.empty()) throw ArgumentError("reduce: no axes given");
  std::vector<bool> reduced(rank, false);
  for (auto ax : axes) {
    if (ax >= rank) throw ArgumentError("reduce: axis " + std::to_string(ax) + " out of range for " + shape_str(in));
    if (reduced[ax]) throw ArgumentError("reduce: repeated axis " + std::to_string(ax));
    reduced[ax] = true;
  }
  Shape out_shape;
  std::size_t count = 1;
  for (std::size_t d = 0; d < rank; ++d) {
    if (reduced[d])
      count *= in[d];
    else
      out_shape.push_back(in[d]);
  }
  if (out_shape.empty()) out_shape.push_back(1);

  // Flat input index -> flat output index.
  auto index = std::make_shared<std::vector<std::size_t>>(av.numel());
  {
    std::vector<std::size_t> pos(rank, 0);
    for (std::size_t i = 0; i < av.numel(); ++i) {
      std::size_t o = 0;
      for (std::size_t d = 0; d < rank; ++d)
        if (!reduced[d]) o = o * in[d] + pos[d];
      (*index)[i] = o;
      for (std::size_t d = rank; d-- > 0;) {
        if (++pos[d] < in[d]) break;
        pos[d] = 0;
      }
    }
  }
  const double factor = kind == ReduceKind::mean ? 1.0 / static_cast<double>(count) : 1.0;
  Tensor out(out_shape);
  for (std::size_t i = 0; i < av.numel(); ++i) out[(*index)[i]] += av[i];
  if (kind == ReduceKind::mean)
    for (auto& v : out.data()) v *= factor;

  const std::size_t ida = a.id();
  return a.graph().record(kind == ReduceKind::mean ? OpKind::reduce_mean : OpKind::reduce_sum, {ida},
                          std::move(out),
                          [ida, index, factor](Graph& g, std::size_t, std::span<const double> go) {
                            auto ga = g.grad_buffer(ida);
                            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += factor * go[(*index)[i]];
                          });
}

Var sum(Var a, const std::vector<std::size_t>& axes) { return reduce(ReduceKind::sum, a, axes); }
Var mean(Var a, const std::vector<std::size_t>& axes) { return reduce(ReduceKind::mean, a, axes); }

Var sum_all(Var a) {
  std::vector<std::size_t> axes(a.shape().size());
  for (std::size_t i = 0; i < axes.size(); ++i) axes[i] = i;
  return sum(a, axes);
}

Var mean_all(Var a) {
  std::vector<std::size_t> axes(a.shape().size());
  for (std::size_t i = 0; i < axes.size(); ++i) axes[i] = i;
  return mean(a, axes);
}

Var stop_gradient(Var a) {
  require_valid(a);
  return a.graph().record(OpKind::stop_gradient, {}, a.value(), nullptr);
}

// ---------------------------------------------------------------------------
// Convolution and pooling

Var conv2d(Var x, Var weights) {
  require_same_graph(x, weights);
  const Tensor& xv = x.value();
  const Tensor& wv = weights.value();
  if (xv.rank() != 3) throw ShapeError("conv2d: input must be [C,H,W], got " + shape_str(xv.shape()));
  if (wv.rank() != 4 || wv.dim(2) != wv.dim(3) || wv.dim(2) % 2 == 0)
    throw ShapeError("conv2d: weights must be [O,C,K,K] with odd K, got " + shape_str(wv.shape()));
  const std::size_t C = xv.dim(0), H = xv.dim(1), W = xv.dim(2);
  const std::size_t O = wv.dim(0), K = wv.dim(2);
  if (wv.dim(1) != C)
    throw ShapeError("conv2d: channel mismatch " + shape_str(xv.shape()) + " vs " + shape_str(wv.shape()));
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(K / 2);
  const std::size_t HW = H * W, CKK = C * K * K;

  // im2col: cols[(c,ki,kj), (h,w)] = x[c, h+ki-pad, w+kj-pad] (zero outside).
  auto cols = std::make_shared<std::vector<double>>(CKK * HW, 0.0);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t ki = 0; ki < K; ++ki)
      for (std::size_t kj = 0; kj < K; ++kj) {
        double* row = cols->data() + ((c * K + ki) * K + kj) * HW;
        for (std::size_t h = 0; h < H; ++h) {
          const std::ptrdiff_t sh = static_cast<std::ptrdiff_t>(h + ki) - pad;
          if (sh < 0 || sh >= static_cast<std::ptrdiff_t>(H)) continue;
          for (std::size_t w = 0; w < W; ++w) {
            const std::ptrdiff_t sw = static_cast<std::ptrdiff_t>(w + kj) - pad;
            if (sw < 0 || sw >= static_cast<std::ptrdiff_t>(W)) continue;
            row[h * W + w] = xv.at(c, static_cast<std::size_t>(sh), static_cast<std::size_t>(sw));
          }
        }
      }

  Tensor out(Shape{O, H, W});
  detail::gemm(false, false, O, HW, CKK, 1.0, wv.data().data(), cols->data(), 0.0, out.data().data());

  const std::size_t idx = x.id(), idw = weights.id();
  return x.graph().record(
      OpKind::conv2d, {idx, idw}, std::move(out),
      [idx, idw, cols, C, H, W, O, K, pad, HW, CKK](Graph& g, std::size_t, std::span<const double> go) {
        if (g.requires_grad(idw))
          detail::gemm(false, true, O, CKK, HW, 1.0, go.data(), cols->data(), 1.0, g.grad_buffer(idw).data());
        if (!g.requires_grad(idx)) return;
        std::vector<double> dcols(CKK * HW);
        detail::gemm(true, false, CKK, HW, O, 1.0, g.value(idw).data().data(), go.data(), 0.0, dcols.data());
        auto gx = g.grad_buffer(idx);
        for (std::size_t c = 0; c < C; ++c)
          for (std::size_t ki = 0; ki < K; ++ki)
            for (std::size_t kj = 0; kj < K; ++kj) {
              const double* row = dcols.data() + ((c * K + ki) * K + kj) * HW;
              for (std::size_t h = 0; h < H; ++h) {
                const std::ptrdiff_t sh = static_cast<std::ptrdiff_t>(h + ki) - pad;
                if (sh < 0 || sh >= static_cast<std::ptrdiff_t>(H)) continue;
                for (std::size_t w = 0; w < W; ++w) {
                  const std::ptrdiff_t sw = static_cast<std::ptrdiff_t>(w + kj) - pad;
                  if (sw < 0 || sw >= static_cast<std::ptrdiff_t>(W)) continue;
                  gx[(c * H + static_cast<std::size_t>(sh)) * W + static_cast<std::size_t>(sw)] += row[h * W + w];
                }
              }
            }
      });
}

Var max_pool2(Var x) {
  require_valid(x);
  const Tensor& xv = x.value();
  if (xv.rank() != 3) throw ShapeError("max_pool2: input must be [C,H,W], got " + shape_str(xv.shape()));
  const std::size_t C = xv.dim(0), H = xv.dim(1), W = xv.dim(2);
  if (H < 2 || W < 2) throw ShapeError("max_pool2: spatial extent below 2 in " + shape_str(xv.shape()));
  const std::size_t Ho = H / 2, Wo = W / 2;
  Tensor out(Shape{C, Ho, Wo});
  auto argmax = std::make_shared<std::vector<std::size_t>>(out.numel());
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t i = 0; i < Ho; ++i)
      for (std::size_t j = 0; j < Wo; ++j) {
        std::size_t best = (c * H + 2 * i) * W + 2 * j;
        for (std::size_t di = 0; di < 2; ++di)
          for (std::size_t dj = 0; dj < 2; ++dj) {
            const std::size_t k = (c * H + 2 * i + di) * W + 2 * j + dj;
            if (xv[k] > xv[best]) best = k;
          }
        const std::size_t o = (c * Ho + i) * Wo + j;
        out[o] = xv[best];
        (*argmax)[o] = best;
      }
  const std::size_t idx = x.id();
  return x.graph().record(OpKind::max_pool, {idx}, std::move(out),
                          [idx, argmax](Graph& g, std::size_t, std::span<const double> go) {
                            auto gx = g.grad_buffer(idx);
                            for (std::size_t o = 0; o < go.size(); ++o) gx[(*argmax)[o]] += go[o];
                          });
}

// ---------------------------------------------------------------------------
// Fused loss primitives

Var standardize(Var x, double eps) {
  require_valid(x);
  if (!(eps > 0.0)) throw ArgumentError("standardize: eps must be positive");
  const Tensor& xv = x.value();
  const std::size_t n = xv.numel();
  if (n == 0) throw ShapeError("standardize: empty input");
  double mu = 0.0;
  for (double v : xv.data()) mu += v;
  mu /= static_cast<double>(n);
  double var = 0.0;
  for (double v : xv.data()) var += (v - mu) * (v - mu);
  var /= static_cast<double>(n);
  const double inv_sd = 1.0 / std::sqrt(var + eps);
  Tensor y(xv.shape());
  for (std::size_t i = 0; i < n; ++i) y[i] = (xv[i] - mu) * inv_sd;
  const std::size_t id = x.id();
  return x.graph().record(OpKind::standardize, {id}, std::move(y),
                          [id, inv_sd](Graph& g, std::size_t self, std::span<const double> go) {
                            // dx = (go - mean(go) - y * mean(go * y)) / sd
                            const Tensor& yv = g.value(self);
                            const std::size_t m = yv.numel();
                            double mean_go = 0.0, mean_goy = 0.0;
                            for (std::size_t i = 0; i < m; ++i) {
                              mean_go += go[i];
                              mean_goy += go[i] * yv[i];
                            }
                            mean_go /= static_cast<double>(m);
                            mean_goy /= static_cast<double>(m);
                            if (!g.requires_grad(id)) return;
                            auto gx = g.grad_buffer(id);
                            for (std::size_t i = 0; i < m; ++i) gx[i] += (go[i] - mean_go - yv[i] * mean_goy) * inv_sd;
                          });
}

Var l2_distance(Var a, Var b) {
  require_same_graph(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.numel() != bv.numel())
    throw ShapeError("l2_distance: size mismatch " + shape_str(av.shape()) + " vs " + shape_str(bv.shape()));
  double ss = 0.0;
  for (std::size_t i = 0; i < av.numel(); ++i) {
    const double d = av[i] - bv[i];
    ss += d * d;
  }
  const std::size_t ida = a.id(), idb = b.id();
  return a.graph().record(OpKind::l2_distance, {ida, idb}, Tensor::scalar(std::sqrt(ss)),
                          [ida, idb](Graph& g, std::size_t self, std::span<const double> go) {
                            const double dist = g.value(self)[0];
                            if (dist == 0.0) return;
                            const Tensor& x = g.value(ida);
                            const Tensor& y = g.value(idb);
                            const double s = go[0] / dist;
                            if (g.requires_grad(ida)) {
                              auto ga = g.grad_buffer(ida);
                              for (std::size_t i = 0; i < x.numel(); ++i) ga[i] += s * (x[i] - y[i]);
                            }
                            if (g.requires_grad(idb)) {
                              auto gb = g.grad_buffer(idb);
                              for (std::size_t i = 0; i < x.numel(); ++i) gb[i] -= s * (x[i] - y[i]);
                            }
                          });
}

Var cross_entropy_logits(Var logits, std::size_t label) {
  require_valid(logits);
  const Tensor& lv = logits.value();
  const std::size_t K = lv.numel();
  if (label >= K)
    throw ArgumentError("cross_entropy: label " + std::to_string(label) + " out of range for " + std::to_string(K) +
                        " classes");
  for (double v : lv.data())
    if (!std::isfinite(v)) throw NumericError("cross_entropy: non-finite logit");
  const double hi = *std::max_element(lv.data().begin(), lv.data().end());
  auto probs = std::make_shared<std::vector<double>>(K);
  double total = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    (*probs)[k] = std::exp(lv[k] - hi);
    total += (*probs)[k];
  }
  for (auto& p : *probs) p /= total;
  const double loss = hi + std::log(total) - lv[label];
  const std::size_t id = logits.id();
  return logits.graph().record(OpKind::cross_entropy, {id}, Tensor::scalar(loss),
                               [id, probs, label](Graph& g, std::size_t, std::span<const double> go) {
                                 auto gl = g.grad_buffer(id);
                                 for (std::size_t k = 0; k < gl.size(); ++k)
                                   gl[k] += go[0] * ((*probs)[k] - (k == label ? 1.0 : 0.0));
                               });
}

}  // namespace wsol
