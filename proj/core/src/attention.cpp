#include "wsol/attention.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "wsol/errors.hpp"
#include "wsol/ops.hpp"

namespace wsol {

namespace {

void require_map(const Tensor& a, const char* op) {
  if (a.rank() != 2) throw ShapeError(std::string(op) + ": attention map must be [H,W], got " + shape_str(a.shape()));
  for (double v : a.data())
    if (!std::isfinite(v)) throw NumericError(std::string(op) + ": non-finite attention value");
}

}  // namespace

NonLocalParams NonLocalParams::init(std::size_t channels, std::size_t key_channels, std::uint64_t seed) {
  if (key_channels == 0 || key_channels > channels)
    throw ArgumentError("non-local key channels must be in [1, C]");
  const double sd = 1.0 / std::sqrt(static_cast<double>(channels));
  CounterRng rng(seed);
  auto draw = [&](Shape s) {
    Tensor t(std::move(s));
    for (auto& v : t.data()) v = rng.gaussian(0.0, sd);
    return t;
  };
  NonLocalParams p;
  p.w_f = draw({key_channels, channels});
  p.w_g = draw({key_channels, channels});
  p.w_z = draw({channels, channels});
  return p;
}

void NonLocalParams::validate() const {
  if (w_z.rank() != 2 || w_z.dim(0) != w_z.dim(1)) throw ShapeError("w_z must be [C,C]");
  const std::size_t C = w_z.dim(0);
  for (const Tensor* t : {&w_f, &w_g})
    if (t->rank() != 2 || t->dim(1) != C || t->dim(0) > C) throw ShapeError("w_f/w_g must be [C~,C] with C~ <= C");
  if (w_f.shape() != w_g.shape()) throw ShapeError("w_f and w_g must share a shape");
  for (const Tensor* t : {&w_f, &w_g, &w_z})
    for (double v : t->data())
      if (!std::isfinite(v)) throw NumericError("non-local parameters must be finite");
}

std::size_t default_key_channels(std::size_t channels) { return std::max<std::size_t>(1, (channels + 7) / 8); }

void MaskHyperparams::validate() const {
  if (!(drop_rate >= 0.0 && drop_rate <= 1.0)) throw ArgumentError("drop_rate must lie in [0, 1]");
  if (!(gamma_fg > 0.0) || !(gamma_bg > 0.0)) throw ArgumentError("gamma_fg and gamma_bg must be positive");
}

std::size_t BinaryMap::count() const {
  return static_cast<std::size_t>(std::count_if(bits_.begin(), bits_.end(), [](std::uint8_t b) { return b != 0; }));
}

Tensor BinaryMap::to_tensor() const {
  Tensor t(Shape{height_, width_});
  for (std::size_t i = 0; i < bits_.size(); ++i) t[i] = bits_[i] ? 1.0 : 0.0;
  return t;
}

std::string_view selection_name(MapSelection s) {
  return s == MapSelection::importance ? "importance" : "dropped_foreground";
}

Var enhanced_attention(Var x, Var w_f, Var w_g, Var w_z) {
  const Shape& xs = x.shape();
  if (xs.size() != 3) throw ShapeError("enhanced_attention: x must be [C,H,W], got " + shape_str(xs));
  const std::size_t C = xs[0], H = xs[1], W = xs[2], HW = H * W;
  const Shape& fs = w_f.shape();
  if (fs.size() != 2 || fs[1] != C || w_g.shape() != fs || fs[0] > C)
    throw ShapeError("enhanced_attention: w_f/w_g must be [C~," + std::to_string(C) + "]");
  if (w_z.shape() != Shape{C, C}) throw ShapeError("enhanced_attention: w_z must be [C,C]");

  const Var flat = reshape(x, {C, HW});
  const Var query = matmul(w_f, flat);                               // f(x), [C~, HW]
  const Var key = matmul(w_g, flat);                                 // g(x), [C~, HW]
  const Var weights = softmax_rows(matmul(transpose(query), key));  // [HW, HW]
  const Var value_mean = matmul(reshape(mean(w_z, {0}), {1, C}), flat);  // mean_c z(x), [1, HW]
  const Var pooled = matmul(weights, reshape(value_mean, {HW, 1}));      // [HW, 1]
  return reshape(pooled, {H, W});
}

Var channel_mean_attention(Var x) {
  if (x.shape().size() != 3) throw ShapeError("channel_mean_attention: x must be [C,H,W]");
  return mean(x, {0});
}

Thresholds thresholds(const Tensor& attention, const MaskHyperparams& h) {
  if (attention.empty()) throw ArgumentError("thresholds: empty attention map");
  require_map(attention, "thresholds");
  const auto d = attention.data();
  const double hi = *std::max_element(d.begin(), d.end());
  const double avg = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
  return {h.gamma_fg * hi, h.gamma_bg * avg};
}

std::pair<BinaryMap, BinaryMap> region_masks(const Tensor& attention, double theta_bg) {
  require_map(attention, "region_masks");
  BinaryMap fg(attention.dim(0), attention.dim(1));
  BinaryMap bg(attention.dim(0), attention.dim(1));
  for (std::size_t i = 0; i < attention.numel(); ++i) {
    const bool is_fg = attention[i] > theta_bg;
    fg.set(i, is_fg);
    bg.set(i, !is_fg);
  }
  return {std::move(fg), std::move(bg)};
}

BinaryMap dropped_foreground_mask(const Tensor& attention, double theta_fg, double theta_bg) {
  require_map(attention, "dropped_foreground_mask");
  BinaryMap m(attention.dim(0), attention.dim(1));
  for (std::size_t i = 0; i < attention.numel(); ++i) m.set(i, attention[i] < theta_fg && attention[i] > theta_bg);
  return m;
}

BinaryMap plain_drop_mask(const Tensor& attention, double theta_fg) {
  require_map(attention, "plain_drop_mask");
  BinaryMap m(attention.dim(0), attention.dim(1));
  for (std::size_t i = 0; i < attention.numel(); ++i) m.set(i, attention[i] < theta_fg);
  return m;
}

GatedFeatures select_and_apply(Var features, Var importance, const BinaryMap& drop_mask, double drop_rate,
                               CounterRng& rng, SelectionStats* stats) {
  if (!(drop_rate >= 0.0 && drop_rate <= 1.0)) throw ArgumentError("drop_rate must lie in [0, 1]");
  const Shape& fs = features.shape();
  if (fs.size() != 3 || importance.shape() != Shape{fs[1], fs[2]} || drop_mask.height() != fs[1] ||
      drop_mask.width() != fs[2])
    throw ShapeError("select_and_apply: maps must be [H,W] of the [C,H,W] features");

  const bool want_drop = rng.uniform() < drop_rate;
  if (want_drop && drop_mask.any()) {
    if (stats) ++stats->dropped;
    const Var mask = features.graph().input(drop_mask.to_tensor());
    return {mul(features, mask), MapSelection::dropped_foreground};
  }
  if (stats) {
    ++stats->importance;
    if (want_drop) ++stats->empty_mask_fallbacks;
  }
  return {mul(features, importance), MapSelection::importance};
}

AttentionBundle make_bundle(const Tensor& attention, const MaskHyperparams& h) {
  AttentionBundle b;
  b.attention = attention;
  b.importance = Tensor(attention.shape());
  for (std::size_t i = 0; i < attention.numel(); ++i) {
    const double x = attention[i];
    b.importance[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  }
  b.thresholds = thresholds(attention, h);
  b.dropped_foreground = dropped_foreground_mask(attention, b.thresholds.fg, b.thresholds.bg);
  std::tie(b.foreground, b.background) = region_masks(attention, b.thresholds.bg);
  return b;
}

}  // namespace wsol
