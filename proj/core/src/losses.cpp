#include "wsol/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "wsol/errors.hpp"
#include "wsol/ops.hpp"

namespace wsol {

std::optional<Var> embed_and_pool(Var features, Var embedding, const BinaryMap& mask) {
  const Shape& fs = features.shape();
  if (fs.size() != 3) throw ShapeError("embed_and_pool: features must be [C,H,W], got " + shape_str(fs));
  const std::size_t C = fs[0], HW = fs[1] * fs[2];
  if (mask.height() != fs[1] || mask.width() != fs[2]) throw ShapeError("embed_and_pool: mask size mismatch");
  const Shape& es = embedding.shape();
  if (es.size() != 2 || es[1] != C) throw ShapeError("embed_and_pool: embedding must be [E," + std::to_string(C) + "]");

  const std::size_t n = mask.count();
  if (n == 0) return std::nullopt;
  Tensor weights(Shape{HW, 1});
  const double w = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < HW; ++i)
    if (mask[i]) weights[i] = w;

  Graph& g = features.graph();
  const Var pooled = matmul(reshape(features, {C, HW}), g.input(std::move(weights)));  // [C, 1]
  return reshape(matmul(embedding, pooled), {es[0]});
}

Var contrastive_attention_loss(Var z_dfg, Var z_fg, Var z_bg, double margin) {
  const Var gap = sub(l2_distance(z_dfg, z_fg), l2_distance(z_dfg, z_bg));
  return relu(add_constant(gap, margin));
}

namespace {
double distance(const Tensor& a, const Tensor& b) {
  if (a.numel() != b.numel()) throw ShapeError("embedding size mismatch");
  double ss = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) ss += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(ss);
}
}  // namespace

double contrastive_attention_loss(const RegionEmbeddings& e, double margin) {
  if (!e.valid) throw ArgumentError("contrastive_attention_loss: invalid embeddings");
  return std::max(0.0, distance(e.z_dfg, e.z_fg) - distance(e.z_dfg, e.z_bg) + margin);
}

ContrastiveBatchValue contrastive_attention_loss(std::span<const RegionEmbeddings> batch, double margin) {
  ContrastiveBatchValue out;
  double total = 0.0;
  for (const auto& e : batch) {
    if (!e.valid) {
      ++out.n_skipped;
      continue;
    }
    total += contrastive_attention_loss(e, margin);
    ++out.n_valid;
  }
  out.mean = out.n_valid ? total / static_cast<double>(out.n_valid) : 0.0;
  return out;
}

Tensor resize_bilinear(const Tensor& map, std::size_t height, std::size_t width) {
  if (map.rank() != 2) throw ShapeError("resize_bilinear: expects [H,W], got " + shape_str(map.shape()));
  if (height == 0 || width == 0) throw ShapeError("resize_bilinear: target extents must be positive");
  const std::size_t H = map.dim(0), W = map.dim(1);
  if (H == height && W == width) return map;
  auto axis = [](std::size_t dst, std::size_t out_n, std::size_t in_n, std::size_t& lo, std::size_t& hi,
                 double& frac) {
    double src = (static_cast<double>(dst) + 0.5) * static_cast<double>(in_n) / static_cast<double>(out_n) - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in_n - 1));
    lo = static_cast<std::size_t>(std::floor(src));
    hi = std::min(lo + 1, in_n - 1);
    frac = src - static_cast<double>(lo);
  };
  Tensor out(Shape{height, width});
  for (std::size_t i = 0; i < height; ++i) {
    std::size_t r0, r1;
    double fr;
    axis(i, height, H, r0, r1, fr);
    for (std::size_t j = 0; j < width; ++j) {
      std::size_t c0, c1;
      double fc;
      axis(j, width, W, c0, c1, fc);
      const double top = (1.0 - fc) * map.at(r0, c0) + fc * map.at(r0, c1);
      const double bot = (1.0 - fc) * map.at(r1, c0) + fc * map.at(r1, c1);
      out.at(i, j) = (1.0 - fr) * top + fr * bot;
    }
  }
  return out;
}

Var foreground_consistency_loss(Var early, Var reference) {
  const Shape& es = early.shape();
  const Shape& rs = reference.shape();
  if (es.size() != 2 || rs.size() != 2)
    throw ShapeError("foreground_consistency_loss: maps must be [H,W], got " + shape_str(es) + " and " +
                     shape_str(rs));
  Graph& g = early.graph();
  const Var target = es == rs ? stop_gradient(reference)
                              : g.input(resize_bilinear(reference.value(), es[0], es[1]));
  return sum_all(square(sub(early, target)));
}

Var classification_loss(Var logits, std::size_t label) { return cross_entropy_logits(logits, label); }

double classification_loss(std::span<const double> y_hat, std::span<const double> y) {
  if (y_hat.size() != y.size() || y.empty()) throw ArgumentError("classification_loss: size mismatch");
  std::size_t ones = 0, label = 0;
  for (std::size_t k = 0; k < y.size(); ++k) {
    if (y[k] == 1.0) {
      ++ones;
      label = k;
    } else if (y[k] != 0.0) {
      throw ArgumentError("classification_loss: one-hot entries must be 0 or 1");
    }
  }
  if (ones != 1) throw ArgumentError("classification_loss: target must contain exactly one 1");
  if (!(y_hat[label] >= 0.0)) throw NumericError("classification_loss: invalid probability");
  return -std::log(y_hat[label]);
}

LossBreakdown total_loss(double l_cls, std::span<const double> l_ca_per_layer, std::span<const double> l_fc_per_pair,
                         std::size_t n_ca_skipped) {
  auto avg = [](std::span<const double> v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  LossBreakdown b;
  b.l_cls = l_cls;
  b.l_ca = avg(l_ca_per_layer);
  b.l_fc = avg(l_fc_per_pair);
  b.l_total = b.l_cls + b.l_ca + b.l_fc;
  b.n_ca_skipped = n_ca_skipped;
  return b;
}

}  // namespace wsol
