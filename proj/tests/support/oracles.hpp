#pragma once

// Straight-line reference implementations used as test oracles. None of this
// calls into the graph, ops or metric code under test; only the plain Tensor
// and Box value types are shared.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "wsol/boxes.hpp"
#include "wsol/rng.hpp"
#include "wsol/tensor.hpp"

namespace oracle {

using wsol::Box;
using wsol::Tensor;

inline Tensor random_tensor(wsol::Shape shape, wsol::CounterRng& rng, double sd = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.gaussian(0.0, sd);
  return t;
}

/// Dense non-local attention: builds f, g, z per pixel, the full HW x HW
/// similarity, a softmax per query row, the aggregated [C, HW] map and its
/// channel mean. No factoring of the channel mean.
inline Tensor dense_attention(const Tensor& x, const Tensor& wf, const Tensor& wg, const Tensor& wz) {
  const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2), N = H * W, K = wf.dim(0);
  std::vector<std::vector<double>> f(K, std::vector<double>(N)), g(K, std::vector<double>(N)),
      z(C, std::vector<double>(N));
  for (std::size_t p = 0; p < N; ++p) {
    for (std::size_t k = 0; k < K; ++k) {
      double sf = 0.0, sg = 0.0;
      for (std::size_t c = 0; c < C; ++c) {
        sf += wf.at(k, c) * x[c * N + p];
        sg += wg.at(k, c) * x[c * N + p];
      }
      f[k][p] = sf;
      g[k][p] = sg;
    }
    for (std::size_t o = 0; o < C; ++o) {
      double s = 0.0;
      for (std::size_t c = 0; c < C; ++c) s += wz.at(o, c) * x[c * N + p];
      z[o][p] = s;
    }
  }
  Tensor a({H, W});
  std::vector<double> row(N);
  for (std::size_t i = 0; i < N; ++i) {
    double hi = -INFINITY;
    for (std::size_t j = 0; j < N; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < K; ++k) s += f[k][i] * g[k][j];
      row[j] = s;
      hi = std::max(hi, s);
    }
    double total = 0.0;
    for (std::size_t j = 0; j < N; ++j) {
      row[j] = std::exp(row[j] - hi);
      total += row[j];
    }
    double channel_sum = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      double agg = 0.0;
      for (std::size_t j = 0; j < N; ++j) agg += row[j] / total * z[c][j];
      channel_sum += agg;
    }
    a[i] = channel_sum / static_cast<double>(C);
  }
  return a;
}

/// map(h,w) = sum_c w[k,c] f[c,h,w], one pixel at a time.
inline Tensor cam(const Tensor& features, const Tensor& weights, std::size_t k) {
  const std::size_t C = features.dim(0), H = features.dim(1), W = features.dim(2);
  Tensor out({H, W});
  for (std::size_t h = 0; h < H; ++h)
    for (std::size_t w = 0; w < W; ++w) {
      double s = 0.0;
      for (std::size_t c = 0; c < C; ++c) s += weights.at(k, c) * features.at(c, h, w);
      out.at(h, w) = s;
    }
  return out;
}

/// Per-pixel embedding followed by a masked mean. Empty mask yields {}.
inline std::vector<double> embed_then_pool(const Tensor& features, const Tensor& emb, const std::vector<int>& mask) {
  const std::size_t C = features.dim(0), N = features.dim(1) * features.dim(2), E = emb.dim(0);
  std::vector<double> acc(E, 0.0);
  std::size_t n = 0;
  for (std::size_t p = 0; p < N; ++p) {
    if (!mask[p]) continue;
    ++n;
    for (std::size_t e = 0; e < E; ++e) {
      double s = 0.0;
      for (std::size_t c = 0; c < C; ++c) s += emb.at(e, c) * features[c * N + p];
      acc[e] += s;
    }
  }
  if (n == 0) return {};
  for (auto& v : acc) v /= static_cast<double>(n);
  return acc;
}

inline Tensor normalize(const Tensor& m) {
  double lo = m[0], hi = m[0];
  for (double v : m.data()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  Tensor out(m.shape());
  if (!(hi > lo)) return out;
  for (std::size_t i = 0; i < m.numel(); ++i) out[i] = (m[i] - lo) / (hi - lo);
  return out;
}

/// Connected components of a binary grid by explicit-stack flood fill;
/// returns the tight box of each component.
inline std::vector<Box> flood_fill_boxes(const std::vector<int>& on, int H, int W, bool eight = false) {
  std::vector<int> label(on.size(), -1);
  std::vector<Box> boxes;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      if (!on[y * W + x] || label[y * W + x] >= 0) continue;
      const int id = static_cast<int>(boxes.size());
      Box b{x, y, x + 1, y + 1};
      std::vector<std::pair<int, int>> stack{{x, y}};
      label[y * W + x] = id;
      while (!stack.empty()) {
        auto [cx, cy] = stack.back();
        stack.pop_back();
        b.x0 = std::min(b.x0, cx);
        b.y0 = std::min(b.y0, cy);
        b.x1 = std::max(b.x1, cx + 1);
        b.y1 = std::max(b.y1, cy + 1);
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            if (!eight && dx != 0 && dy != 0) continue;
            const int nx = cx + dx, ny = cy + dy;
            if (nx < 0 || ny < 0 || nx >= W || ny >= H) continue;
            if (!on[ny * W + nx] || label[ny * W + nx] >= 0) continue;
            label[ny * W + nx] = id;
            stack.push_back({nx, ny});
          }
      }
      boxes.push_back(b);
    }
  return boxes;
}

/// IoU by counting pixels of both boxes on a grid.
inline double pixel_iou(const Box& a, const Box& b) {
  const int x0 = std::min(a.x0, b.x0), y0 = std::min(a.y0, b.y0);
  const int x1 = std::max(a.x1, b.x1), y1 = std::max(a.y1, b.y1);
  long long inter = 0, uni = 0;
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) {
      const bool in_a = x >= a.x0 && x < a.x1 && y >= a.y0 && y < a.y1;
      const bool in_b = x >= b.x0 && x < b.x1 && y >= b.y0 && y < b.y1;
      inter += in_a && in_b;
      uni += in_a || in_b;
    }
  return uni ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

struct BruteMaxBoxAcc {
  std::vector<double> accuracy;  // per delta
  std::vector<double> tau;       // per delta
  double mean = 0.0;
};

/// Exhaustive evaluator: every grid threshold, every component, every
/// (estimate, ground truth) pair, recomputed from scratch for each delta.
inline BruteMaxBoxAcc brute_max_box_acc(const std::vector<wsol::ScoreMap>& maps, const wsol::BoxSets& gt,
                                        const std::vector<double>& deltas, std::size_t n_thresholds) {
  BruteMaxBoxAcc out;
  double total = 0.0;
  for (double delta : deltas) {
    double best = -1.0, best_tau = 0.0;
    for (std::size_t t = 0; t < n_thresholds; ++t) {
      const double tau = static_cast<double>(t) / static_cast<double>(n_thresholds);
      std::size_t correct = 0;
      for (const auto& m : maps) {
        const Tensor norm = oracle::normalize(m.values);
        const int H = static_cast<int>(norm.dim(0)), W = static_cast<int>(norm.dim(1));
        std::vector<int> on(norm.numel());
        for (std::size_t i = 0; i < norm.numel(); ++i) on[i] = norm[i] >= tau;
        bool hit = false;
        for (const Box& e : flood_fill_boxes(on, H, W))
          for (const Box& g : gt.at(m.image_id))
            if (pixel_iou(e, g) >= delta) hit = true;
        correct += hit;
      }
      const double acc = static_cast<double>(correct) / static_cast<double>(maps.size());
      if (acc > best) {
        best = acc;
        best_tau = tau;
      }
    }
    out.accuracy.push_back(best);
    out.tau.push_back(best_tau);
    total += best;
  }
  out.mean = total / static_cast<double>(deltas.size());
  return out;
}

/// Random score maps with 1-3 random GT boxes each. Maps are smooth bumps
/// plus noise and some quantization so that plateaus and ties occur.
inline std::pair<std::vector<wsol::ScoreMap>, wsol::BoxSets> random_eval_set(std::size_t n, wsol::CounterRng& rng,
                                                                              int min_size = 8, int max_size = 16) {
  std::vector<wsol::ScoreMap> maps;
  wsol::BoxSets gt;
  for (std::size_t i = 0; i < n; ++i) {
    const int H = min_size + static_cast<int>(rng.below(max_size - min_size + 1));
    const int W = min_size + static_cast<int>(rng.below(max_size - min_size + 1));
    const std::string id = "img" + std::to_string(i);
    const int n_boxes = 1 + static_cast<int>(rng.below(3));
    Tensor m({static_cast<std::size_t>(H), static_cast<std::size_t>(W)});
    for (int b = 0; b < n_boxes; ++b) {
      const int x0 = static_cast<int>(rng.below(W - 1)), y0 = static_cast<int>(rng.below(H - 1));
      const int x1 = x0 + 1 + static_cast<int>(rng.below(W - x0)), y1 = y0 + 1 + static_cast<int>(rng.below(H - y0));
      gt[id].push_back({x0, y0, x1, y1});
      const double cx = 0.5 * (x0 + x1), cy = 0.5 * (y0 + y1), r = 0.5 + 0.3 * (x1 - x0 + y1 - y0);
      const double height = 0.5 + rng.uniform();
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          const double d2 = (x + 0.5 - cx) * (x + 0.5 - cx) + (y + 0.5 - cy) * (y + 0.5 - cy);
          m.at(y, x) += height * std::exp(-d2 / (r * r));
        }
    }
    const bool quantize = rng.uniform() < 0.3;
    for (auto& v : m.data()) {
      v += 0.15 * rng.uniform();
      if (quantize) v = std::round(v * 4.0) / 4.0;
    }
    maps.push_back({id, std::move(m)});
  }
  return {maps, gt};
}

}  // namespace oracle
