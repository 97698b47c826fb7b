#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "wsol/tensor.hpp"

namespace wsol {

/// Axis-aligned pixel box, half-open: covers x0 <= x < x1, y0 <= y < y1.
struct Box {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  long long area() const { return static_cast<long long>(x1 - x0) * (y1 - y0); }
  bool valid() const { return x0 < x1 && y0 < y1; }
  bool operator==(const Box&) const = default;
};

/// Ground-truth (or estimated) boxes keyed by image id.
using BoxSets = std::map<std::string, std::vector<Box>>;

struct ScoreMap {
  std::string image_id;
  Tensor values;  // [H, W]
};

enum class Connectivity { four, eight };

/// map(h,w) = sum_c weights[k,c] * features[c,h,w].
Tensor compute_cam(const Tensor& features, const Tensor& classifier_weights, std::size_t class_k);

/// Min-max normalization to [0,1]; constant maps become all zeros.
Tensor normalize(const Tensor& map);

/// Tight boxes of the connected components of {v >= tau}, in raster order of
/// each component's first pixel.
std::vector<Box> boxes_at_threshold(const Tensor& map, double tau, Connectivity conn = Connectivity::four);

/// Intersection over union under the half-open pixel convention.
double iou(const Box& a, const Box& b);

}  // namespace wsol
