#pragma once

#include <cstddef>
#include <optional>
#include <span>

#include "wsol/attention.hpp"
#include "wsol/graph.hpp"
#include "wsol/tensor.hpp"

namespace wsol {

/// Default hinge margin of the contrastive attention loss.
inline constexpr double kDefaultMargin = 1.0;
/// Width of the auxiliary region embedding.
inline constexpr std::size_t kEmbeddingDim = 128;

/// Pooled region embeddings of one sample at one attention layer.
struct RegionEmbeddings {
  Tensor z_dfg;
  Tensor z_fg;
  Tensor z_bg;
  bool valid = false;  // false when any source mask was empty
};

struct LossBreakdown {
  double l_cls = 0.0;
  double l_ca = 0.0;
  double l_fc = 0.0;
  double l_total = 0.0;
  std::size_t n_ca_skipped = 0;
};

/// Masked average of the 1x1 embedding W_emb * F over pixels where `mask` is
/// set, shape [E]. Returns nullopt for an empty mask.
///
/// The embedding is linear and bias-free, so the spatial mean is taken first
/// and embedded once.
std::optional<Var> embed_and_pool(Var features, Var embedding, const BinaryMap& mask);

/// max(0, |z_dfg - z_fg| - |z_dfg - z_bg| + margin), shape [1]. The hinge
/// derivative at exactly zero is zero.
Var contrastive_attention_loss(Var z_dfg, Var z_fg, Var z_bg, double margin = kDefaultMargin);

/// Value-only form for one sample. Throws ArgumentError for invalid embeddings.
double contrastive_attention_loss(const RegionEmbeddings& e, double margin = kDefaultMargin);

struct ContrastiveBatchValue {
  double mean = 0.0;  // over valid samples; 0 if none are valid
  std::size_t n_valid = 0;
  std::size_t n_skipped = 0;
};
ContrastiveBatchValue contrastive_attention_loss(std::span<const RegionEmbeddings> batch,
                                                 double margin = kDefaultMargin);

/// Bilinear resize with half-pixel centres (edge-clamped).
Tensor resize_bilinear(const Tensor& map, std::size_t height, std::size_t width);

/// Sum over pixels of (early - stopgrad(reference))^2. A reference map of a
/// different resolution is bilinearly resized to the early map's resolution.
/// No gradient reaches anything that only feeds `reference`.
Var foreground_consistency_loss(Var early, Var reference);

/// Cross-entropy of logits against a class index (log-sum-exp form).
Var classification_loss(Var logits, std::size_t label);

/// -log y_hat[k] for the unique k with y[k] == 1. Throws ArgumentError when y
/// is not one-hot or sizes differ.
double classification_loss(std::span<const double> y_hat, std::span<const double> y);

/// Unweighted sum. Per-layer contrastive terms and per-pair consistency terms
/// are averaged over their count so the layer count does not rescale them.
LossBreakdown total_loss(double l_cls, std::span<const double> l_ca_per_layer, std::span<const double> l_fc_per_pair,
                         std::size_t n_ca_skipped = 0);

}  // namespace wsol
