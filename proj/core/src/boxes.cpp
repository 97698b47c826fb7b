#include "wsol/boxes.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "wsol/errors.hpp"

namespace wsol {

Tensor compute_cam(const Tensor& features, const Tensor& classifier_weights, std::size_t class_k) {
  if (features.rank() != 3) throw ShapeError("compute_cam: features must be [C,H,W], got " + shape_str(features.shape()));
  if (classifier_weights.rank() != 2 || classifier_weights.dim(1) != features.dim(0))
    throw ShapeError("compute_cam: classifier weights must be [K," + std::to_string(features.dim(0)) + "]");
  if (class_k >= classifier_weights.dim(0)) throw ArgumentError("compute_cam: class index out of range");
  const std::size_t C = features.dim(0), H = features.dim(1), W = features.dim(2), HW = H * W;
  Tensor cam(Shape{H, W});
  for (std::size_t c = 0; c < C; ++c) {
    const double w = classifier_weights.at(class_k, c);
    const double* src = features.data().data() + c * HW;
    for (std::size_t i = 0; i < HW; ++i) cam[i] += w * src[i];
  }
  return cam;
}

Tensor normalize(const Tensor& map) {
  Tensor out(map.shape());
  if (map.empty()) return out;
  const auto [lo_it, hi_it] = std::minmax_element(map.data().begin(), map.data().end());
  const double lo = *lo_it, hi = *hi_it;
  if (!(hi > lo)) return out;
  const double span = hi - lo;
  for (std::size_t i = 0; i < map.numel(); ++i) out[i] = (map[i] - lo) / span;
  return out;
}

std::vector<Box> boxes_at_threshold(const Tensor& map, double tau, Connectivity conn) {
  if (map.rank() != 2) throw ShapeError("boxes_at_threshold: expects [H,W], got " + shape_str(map.shape()));
  const int H = static_cast<int>(map.dim(0)), W = static_cast<int>(map.dim(1));
  std::vector<std::uint8_t> state(map.numel(), 0);  // 0 below, 1 unvisited above, 2 visited
  for (std::size_t i = 0; i < map.numel(); ++i) state[i] = map[i] >= tau ? 1 : 0;

  static constexpr int kDx[8] = {1, -1, 0, 0, 1, 1, -1, -1};
  static constexpr int kDy[8] = {0, 0, 1, -1, 1, -1, 1, -1};
  const int n_neighbours = conn == Connectivity::four ? 4 : 8;

  std::vector<Box> boxes;
  std::vector<int> stack;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      if (state[static_cast<std::size_t>(y * W + x)] != 1) continue;
      Box b{x, y, x + 1, y + 1};
      state[static_cast<std::size_t>(y * W + x)] = 2;
      stack.push_back(y * W + x);
      while (!stack.empty()) {
        const int p = stack.back();
        stack.pop_back();
        const int py = p / W, px = p % W;
        b.x0 = std::min(b.x0, px);
        b.y0 = std::min(b.y0, py);
        b.x1 = std::max(b.x1, px + 1);
        b.y1 = std::max(b.y1, py + 1);
        for (int k = 0; k < n_neighbours; ++k) {
          const int nx = px + kDx[k], ny = py + kDy[k];
          if (nx < 0 || ny < 0 || nx >= W || ny >= H) continue;
          auto& s = state[static_cast<std::size_t>(ny * W + nx)];
          if (s == 1) {
            s = 2;
            stack.push_back(ny * W + nx);
          }
        }
      }
      boxes.push_back(b);
    }
  return boxes;
}

double iou(const Box& a, const Box& b) {
  const long long ix = std::max(0, std::min(a.x1, b.x1) - std::max(a.x0, b.x0));
  const long long iy = std::max(0, std::min(a.y1, b.y1) - std::max(a.y0, b.y0));
  const long long inter = ix * iy;
  const long long uni = a.area() + b.area() - inter;
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

}  // namespace wsol
