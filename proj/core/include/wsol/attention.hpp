#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

#include "wsol/graph.hpp"
#include "wsol/rng.hpp"
#include "wsol/tensor.hpp"

namespace wsol {

/// 1x1 embeddings of the non-local block, stored as matrices (no bias):
/// query/key projections [C~, C] and value projection [C, C].
struct NonLocalParams {
  Tensor w_f;
  Tensor w_g;
  Tensor w_z;

  std::size_t channels() const { return w_z.dim(0); }
  std::size_t key_channels() const { return w_f.dim(0); }

  /// Gaussian init with stddev 1/sqrt(C).
  static NonLocalParams init(std::size_t channels, std::size_t key_channels, std::uint64_t seed);
  /// Throws ShapeError / NumericError.
  void validate() const;
};

/// ceil(C / 8), at least 1.
std::size_t default_key_channels(std::size_t channels);

struct MaskHyperparams {
  double drop_rate = 0.85;
  double gamma_fg = 0.95;
  double gamma_bg = 1.2;

  void validate() const;

  static MaskHyperparams vgg16() { return {0.33, 0.72, 1.2}; }
  static MaskHyperparams inception_v3() { return {0.69, 0.86, 1.2}; }
  static MaskHyperparams resnet50() { return {0.85, 0.95, 1.2}; }
};

/// Row-major H x W map of 0/1 values.
class BinaryMap {
 public:
  BinaryMap() = default;
  BinaryMap(std::size_t height, std::size_t width, std::uint8_t fill = 0)
      : height_(height), width_(width), bits_(height * width, fill) {}

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return bits_.size(); }
  bool operator[](std::size_t i) const { return bits_[i] != 0; }
  void set(std::size_t i, bool v) { bits_[i] = v ? 1 : 0; }
  bool at(std::size_t r, std::size_t c) const { return bits_[r * width_ + c] != 0; }

  std::size_t count() const;
  bool any() const { return count() > 0; }
  /// [H, W] tensor of 0.0 / 1.0.
  Tensor to_tensor() const;

  bool operator==(const BinaryMap&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<std::uint8_t> bits_;
};

struct Thresholds {
  double fg = 0.0;
  double bg = 0.0;
};

enum class MapSelection { importance, dropped_foreground };
std::string_view selection_name(MapSelection s);

/// Everything derived from one enhanced attention map during training.
struct AttentionBundle {
  Tensor attention;   // A, [H, W]
  Tensor importance;  // sigmoid(A)
  Thresholds thresholds;
  BinaryMap dropped_foreground;
  BinaryMap foreground;
  BinaryMap background;
  MapSelection selected = MapSelection::importance;
};

/// Non-local enhanced attention map of a [C,H,W] feature map, shape [H,W]:
///
///   S = softmax_rows(f(x)^T g(x))        [HW, HW], rows are query locations
///   A = mean_c sum_j S(i,j) z(x)(c,j)
///
/// The channel mean commutes with the aggregation, so it is evaluated as
/// S * (mean_c z(x)), which needs one [HW,HW] x [HW,1] product instead of a
/// [C,HW] x [HW,HW] one.
Var enhanced_attention(Var x, Var w_f, Var w_g, Var w_z);

/// Channel-pooled attention used when the non-local block is disabled.
Var channel_mean_attention(Var x);

/// theta_fg = gamma_fg * max(A), theta_bg = gamma_bg * mean(A). Plain values:
/// no gradient flows through the thresholds.
Thresholds thresholds(const Tensor& attention, const MaskHyperparams& h);

/// M_fg = 1[A > theta_bg], M_bg = 1 - M_fg (ties go to the background).
std::pair<BinaryMap, BinaryMap> region_masks(const Tensor& attention, double theta_bg);

/// M_dfg = 1[A < theta_fg] & 1[A > theta_bg].
BinaryMap dropped_foreground_mask(const Tensor& attention, double theta_fg, double theta_bg);

/// Drop mask that only erases the most discriminative region, 1[A < theta_fg].
BinaryMap plain_drop_mask(const Tensor& attention, double theta_fg);

struct SelectionStats {
  std::size_t importance = 0;
  std::size_t dropped = 0;
  /// Drop draws that fell back to the importance map because the mask was empty.
  std::size_t empty_mask_fallbacks = 0;
};

struct GatedFeatures {
  Var features;
  MapSelection selected = MapSelection::importance;
};

/// Draws one uniform from `rng`; with probability drop_rate gates `features`
/// with the binary drop mask, otherwise with the importance map. The mask is a
/// constant; gradients reach `importance` only when it is selected. An empty
/// mask falls back to the importance map and is counted in `stats`.
GatedFeatures select_and_apply(Var features, Var importance, const BinaryMap& drop_mask, double drop_rate,
                               CounterRng& rng, SelectionStats* stats = nullptr);

/// Fills thresholds, importance map and the three masks for one map.
AttentionBundle make_bundle(const Tensor& attention, const MaskHyperparams& h);

}  // namespace wsol
