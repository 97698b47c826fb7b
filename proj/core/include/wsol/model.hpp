#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wsol/attention.hpp"
#include "wsol/graph.hpp"
#include "wsol/losses.hpp"
#include "wsol/rng.hpp"
#include "wsol/tensor.hpp"

namespace wsol {

/// Channel widths of the three convolution stages.
///
///   image [1,S,S] -> 2x2 mean (stem) -> conv1 -> maxpool
///     -> conv2 = F1 [c2,S/4,S/4] -> attention layer 1 -> maxpool
///     -> conv3 = F2 [c3,S/8,S/8] -> attention layer 2 -> GAP -> logits
///
/// Each "conv" is a bias-free 3x3 convolution, per-sample standardization
/// (standardize(), no learned affine) and relu. Attention layer 2 is the
/// reference map of the consistency loss.
struct ModelShape {
  std::size_t in_channels = 1;
  std::size_t c1 = 8;
  std::size_t c2 = 16;
  std::size_t c3 = 32;
  std::size_t n_classes = 2;
  std::size_t embed_dim = kEmbeddingDim;
  std::size_t key_channels1 = 0;  // 0: default_key_channels(c2)
  std::size_t key_channels2 = 0;  // 0: default_key_channels(c3)

  void validate() const;
};

inline constexpr std::size_t kAttentionLayers = 2;

struct TinyBackbone {
  ModelShape shape;
  Tensor conv1;  // [c1, in, 3, 3]
  Tensor conv2;  // [c2, c1, 3, 3]
  Tensor conv3;  // [c3, c2, 3, 3]
  std::array<NonLocalParams, kAttentionLayers> attention;
  std::array<Tensor, kAttentionLayers> embedding;  // [E, C]
  Tensor classifier;                               // [K, c3]

  /// He (fan-in) Gaussian init for convolutions: stddev sqrt(2 / (C_in * 9)).
  /// Classifier, embeddings and non-local projections: stddev 1/sqrt(C).
  static TinyBackbone init(const ModelShape& shape, std::uint64_t seed);

  /// Parameters in checkpoint order, e.g. "conv1.weight", "attn1.w_f".
  std::vector<std::pair<std::string, Tensor*>> parameters();
  std::vector<std::pair<std::string, const Tensor*>> parameters() const;
};

/// Which parts of the method are active (mirrors the ablation rows).
struct AblationFlags {
  bool attention = true;           // false: plain classifier, no gating, no auxiliary losses
  bool contrastive = true;         // contrastive attention loss
  bool consistency = true;         // foreground consistency loss
  bool nonlocal = true;            // false: channel-mean attention
  bool dropped_foreground = true;  // false: drop only the most discriminative region

  bool operator==(const AblationFlags&) const = default;
};

struct ForwardConfig {
  MaskHyperparams mask;
  double margin = kDefaultMargin;
  AblationFlags flags;
  /// Test hook: replaces every attention map by zeros.
  bool force_zero_attention = false;
};

/// Non-differentiable choices made by one attention layer; can be replayed to
/// evaluate the same piecewise-smooth function at perturbed parameters.
struct LayerDecision {
  MapSelection selection = MapSelection::importance;
  BinaryMap gate_mask;  // binary map applied when selection is dropped_foreground
  BinaryMap dropped_foreground;
  BinaryMap foreground;
  BinaryMap background;
};

struct LayerOutput {
  Var attention;
  Var importance;
  AttentionBundle bundle;
  LayerDecision decision;
  std::optional<Var> l_ca;  // absent when disabled or a region mask was empty
  bool ca_skipped = false;
};

struct TrainForward {
  Var logits;  // [K]
  Var l_cls;
  std::vector<LayerOutput> layers;  // empty when attention is disabled
  std::optional<Var> l_fc;
};

/// Model parameters as differentiable leaves of one graph.
struct BoundModel {
  Var conv1, conv2, conv3, classifier;
  std::array<Var, kAttentionLayers> w_f, w_g, w_z, embedding;

  /// Same order as TinyBackbone::parameters().
  std::vector<Var> all() const;
};

BoundModel bind(Graph& g, const TinyBackbone& model);

/// 2x2 mean downsampling of a [C,S,S] image.
Tensor preprocess(const Tensor& image);

/// One training forward pass for a single image. `replay`, when non-empty,
/// supplies the per-layer decisions instead of computing masks and drawing
/// from `rng`.
TrainForward forward_train(Graph& g, const BoundModel& m, const Tensor& image, std::size_t label,
                           const ForwardConfig& cfg, CounterRng& rng, SelectionStats* stats = nullptr,
                           std::span<const LayerDecision> replay = {});

struct Inference {
  std::size_t predicted = 0;
  std::vector<double> probabilities;
  Tensor cam;        // [S/8, S/8], class activation map of the predicted class
  Tensor score_map;  // cam bilinearly resized to [S, S]
};

/// Test-time path: the attention block is inactive, nothing is gated.
Inference forward_infer(const TinyBackbone& model, const Tensor& image);

/// Logits of the plain network (no attention gating) for an image.
Tensor plain_logits(const TinyBackbone& model, const Tensor& image);

}  // namespace wsol
