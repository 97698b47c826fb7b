#include "wsol/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "wsol/boxes.hpp"
#include "wsol/errors.hpp"
#include "wsol/ops.hpp"

namespace wsol {

void ModelShape::validate() const {
  if (in_channels == 0 || c1 == 0 || c2 == 0 || c3 == 0 || embed_dim == 0)
    throw ArgumentError("model: channel counts must be positive");
  if (n_classes < 2) throw ArgumentError("model: need at least two classes");
  if (key_channels1 > c2 || key_channels2 > c3) throw ArgumentError("model: key channels exceed stage width");
}

namespace {

Tensor gaussian(Shape shape, double stddev, CounterRng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.gaussian(0.0, stddev);
  return t;
}

}  // namespace

TinyBackbone TinyBackbone::init(const ModelShape& shape, std::uint64_t seed) {
  shape.validate();
  CounterRng rng(seed, 0x6d6f64656cULL);
  auto he = [](std::size_t fan_in) { return std::sqrt(2.0 / static_cast<double>(fan_in)); };
  auto inv = [](std::size_t c) { return 1.0 / std::sqrt(static_cast<double>(c)); };

  TinyBackbone m;
  m.shape = shape;
  m.conv1 = gaussian({shape.c1, shape.in_channels, 3, 3}, he(shape.in_channels * 9), rng);
  m.conv2 = gaussian({shape.c2, shape.c1, 3, 3}, he(shape.c1 * 9), rng);
  m.conv3 = gaussian({shape.c3, shape.c2, 3, 3}, he(shape.c2 * 9), rng);
  const std::size_t widths[kAttentionLayers] = {shape.c2, shape.c3};
  const std::size_t keys[kAttentionLayers] = {
      shape.key_channels1 ? shape.key_channels1 : default_key_channels(shape.c2),
      shape.key_channels2 ? shape.key_channels2 : default_key_channels(shape.c3)};
  for (std::size_t l = 0; l < kAttentionLayers; ++l) {
    m.attention[l] = NonLocalParams::init(widths[l], keys[l], rng.next_u64());
    m.embedding[l] = gaussian({shape.embed_dim, widths[l]}, inv(widths[l]), rng);
  }
  m.classifier = gaussian({shape.n_classes, shape.c3}, inv(shape.c3), rng);
  return m;
}

std::vector<std::pair<std::string, Tensor*>> TinyBackbone::parameters() {
  std::vector<std::pair<std::string, Tensor*>> out = {
      {"conv1.weight", &conv1}, {"conv2.weight", &conv2}, {"conv3.weight", &conv3}};
  for (std::size_t l = 0; l < kAttentionLayers; ++l) {
    const std::string p = "attn" + std::to_string(l + 1) + ".";
    out.emplace_back(p + "w_f", &attention[l].w_f);
    out.emplace_back(p + "w_g", &attention[l].w_g);
    out.emplace_back(p + "w_z", &attention[l].w_z);
    out.emplace_back(p + "embedding", &embedding[l]);
  }
  out.emplace_back("classifier.weight", &classifier);
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> TinyBackbone::parameters() const {
  auto mut = const_cast<TinyBackbone*>(this)->parameters();
  std::vector<std::pair<std::string, const Tensor*>> out;
  out.reserve(mut.size());
  for (auto& [n, t] : mut) out.emplace_back(n, t);
  return out;
}

std::vector<Var> BoundModel::all() const {
  std::vector<Var> out = {conv1, conv2, conv3};
  for (std::size_t l = 0; l < kAttentionLayers; ++l) {
    out.push_back(w_f[l]);
    out.push_back(w_g[l]);
    out.push_back(w_z[l]);
    out.push_back(embedding[l]);
  }
  out.push_back(classifier);
  return out;
}

BoundModel bind(Graph& g, const TinyBackbone& model) {
  BoundModel b;
  b.conv1 = g.parameter(model.conv1);
  b.conv2 = g.parameter(model.conv2);
  b.conv3 = g.parameter(model.conv3);
  for (std::size_t l = 0; l < kAttentionLayers; ++l) {
    b.w_f[l] = g.parameter(model.attention[l].w_f);
    b.w_g[l] = g.parameter(model.attention[l].w_g);
    b.w_z[l] = g.parameter(model.attention[l].w_z);
    b.embedding[l] = g.parameter(model.embedding[l]);
  }
  b.classifier = g.parameter(model.classifier);
  return b;
}

Tensor preprocess(const Tensor& image) {
  if (image.rank() != 3) throw ShapeError("image must be [C,S,S], got " + shape_str(image.shape()));
  const std::size_t C = image.dim(0), H = image.dim(1), W = image.dim(2);
  if (H % 8 != 0 || W % 8 != 0) throw ShapeError("image extents must be multiples of 8");
  Tensor out(Shape{C, H / 2, W / 2});
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t i = 0; i < H / 2; ++i)
      for (std::size_t j = 0; j < W / 2; ++j)
        out.at(c, i, j) = 0.25 * (image.at(c, 2 * i, 2 * j) + image.at(c, 2 * i, 2 * j + 1) +
                                  image.at(c, 2 * i + 1, 2 * j) + image.at(c, 2 * i + 1, 2 * j + 1));
  return out;
}

namespace {

Var logits_from(Var features, Var classifier) {
  const std::size_t C = features.shape()[0];
  const Var pooled = reshape(mean(features, {1, 2}), {C, 1});
  return reshape(matmul(classifier, pooled), {classifier.shape()[0]});
}

LayerOutput attention_layer(Var features, Var& gated, const BoundModel& m, std::size_t l, const ForwardConfig& cfg,
                            CounterRng& rng, SelectionStats* stats, const LayerDecision* replay) {
  Graph& g = features.graph();
  LayerOutput out;
  Var attn = cfg.flags.nonlocal ? enhanced_attention(features, m.w_f[l], m.w_g[l], m.w_z[l])
                                : channel_mean_attention(features);
  if (cfg.force_zero_attention) attn = scale(attn, 0.0);
  out.attention = attn;
  out.importance = sigmoid(attn);
  out.bundle = make_bundle(attn.value(), cfg.mask);

  if (replay) {
    out.decision = *replay;
  } else {
    out.decision.dropped_foreground = out.bundle.dropped_foreground;
    out.decision.foreground = out.bundle.foreground;
    out.decision.background = out.bundle.background;
    out.decision.gate_mask = cfg.flags.dropped_foreground
                                 ? out.bundle.dropped_foreground
                                 : plain_drop_mask(attn.value(), out.bundle.thresholds.fg);
  }

  if (replay) {
    gated = replay->selection == MapSelection::dropped_foreground
                ? mul(features, g.input(replay->gate_mask.to_tensor()))
                : mul(features, out.importance);
  } else {
    const GatedFeatures sel =
        select_and_apply(features, out.importance, out.decision.gate_mask, cfg.mask.drop_rate, rng, stats);
    gated = sel.features;
    out.decision.selection = sel.selected;
  }
  out.bundle.selected = out.decision.selection;

  if (cfg.flags.contrastive) {
    const auto z_dfg = embed_and_pool(features, m.embedding[l], out.decision.dropped_foreground);
    const auto z_fg = embed_and_pool(features, m.embedding[l], out.decision.foreground);
    const auto z_bg = embed_and_pool(features, m.embedding[l], out.decision.background);
    if (z_dfg && z_fg && z_bg)
      out.l_ca = contrastive_attention_loss(*z_dfg, *z_fg, *z_bg, cfg.margin);
    else
      out.ca_skipped = true;
  }
  return out;
}

}  // namespace

TrainForward forward_train(Graph& g, const BoundModel& m, const Tensor& image, std::size_t label,
                           const ForwardConfig& cfg, CounterRng& rng, SelectionStats* stats,
                           std::span<const LayerDecision> replay) {
  cfg.mask.validate();
  if (!replay.empty() && replay.size() != kAttentionLayers)
    throw ArgumentError("forward_train: replay needs one decision per attention layer");

  TrainForward out;
  const Var x = g.input(preprocess(image));
  const Var h1 = max_pool2(relu(standardize(conv2d(x, m.conv1))));
  const Var f1 = relu(standardize(conv2d(h1, m.conv2)));

  Var gated1 = f1;
  if (cfg.flags.attention)
    out.layers.push_back(attention_layer(f1, gated1, m, 0, cfg, rng, stats, replay.empty() ? nullptr : &replay[0]));
  const Var f2 = relu(standardize(conv2d(max_pool2(gated1), m.conv3)));

  Var gated2 = f2;
  if (cfg.flags.attention)
    out.layers.push_back(attention_layer(f2, gated2, m, 1, cfg, rng, stats, replay.empty() ? nullptr : &replay[1]));

  out.logits = logits_from(gated2, m.classifier);
  out.l_cls = classification_loss(out.logits, label);
  if (cfg.flags.attention && cfg.flags.consistency)
    out.l_fc = foreground_consistency_loss(out.layers[0].attention, out.layers[1].attention);
  return out;
}

namespace {

struct PlainForward {
  Tensor logits;
  Tensor features;  // last stage, [c3, S/8, S/8]
};

PlainForward plain_forward(const TinyBackbone& model, const Tensor& image) {
  Graph g;
  const Var x = g.input(preprocess(image));
  const Var h1 = max_pool2(relu(standardize(conv2d(x, g.input(model.conv1)))));
  const Var f1 = relu(standardize(conv2d(h1, g.input(model.conv2))));
  const Var f2 = relu(standardize(conv2d(max_pool2(f1), g.input(model.conv3))));
  const Var logits = logits_from(f2, g.input(model.classifier));
  return {logits.value(), f2.value()};
}

}  // namespace

Tensor plain_logits(const TinyBackbone& model, const Tensor& image) { return plain_forward(model, image).logits; }

Inference forward_infer(const TinyBackbone& model, const Tensor& image) {
  const PlainForward pf = plain_forward(model, image);
  Inference out;
  const auto l = pf.logits.data();
  const double hi = *std::max_element(l.begin(), l.end());
  double total = 0.0;
  out.probabilities.resize(l.size());
  for (std::size_t k = 0; k < l.size(); ++k) {
    out.probabilities[k] = std::exp(l[k] - hi);
    total += out.probabilities[k];
  }
  for (auto& p : out.probabilities) p /= total;
  out.predicted = static_cast<std::size_t>(std::max_element(l.begin(), l.end()) - l.begin());
  out.cam = compute_cam(pf.features, model.classifier, out.predicted);
  out.score_map = resize_bilinear(out.cam, image.dim(1), image.dim(2));
  return out;
}

}  // namespace wsol
