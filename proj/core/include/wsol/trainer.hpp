#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "wsol/dataset.hpp"
#include "wsol/losses.hpp"
#include "wsol/metrics.hpp"
#include "wsol/model.hpp"

namespace wsol {

struct TrainConfig {
  std::size_t batch_size = 32;
  double learning_rate = 0.005;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  /// Rescales the batch gradient to this global L2 norm when it is larger;
  /// 0 disables clipping.
  double grad_clip = 0.0;
  std::size_t epochs = 30;
  MaskHyperparams mask = MaskHyperparams::resnet50();
  double margin = kDefaultMargin;
  std::uint64_t seed = 1;
  AblationFlags flags;
  ModelShape model;
  EvalConfig eval;
  /// Evaluate on the test split every N epochs (the last epoch is always
  /// evaluated); 0 evaluates only after the last epoch.
  std::size_t eval_every = 1;

  void validate() const;
  ForwardConfig forward_config() const { return {mask, margin, flags, false}; }
};

struct BatchResult {
  LossBreakdown loss;
  std::vector<Tensor> gradients;  // TinyBackbone::parameters() order
  SelectionStats selection;
};

/// Mean-reduced batch objective and its parameter gradients. Each sample gets
/// its own graph and random stream `rng.split(i)`. Contrastive terms are
/// averaged over samples with non-empty masks per layer, then over layers.
/// Throws NonFiniteLossError when any loss term is not finite.
BatchResult batch_gradients(const TinyBackbone& model, std::span<const SynthSample* const> batch,
                            const ForwardConfig& cfg, const CounterRng& rng);

/// SGD with momentum and L2 weight decay:
///   v <- momentum * v + (grad + weight_decay * p);  p <- p - lr * v
/// Scales all gradients by max_norm / ||g|| when the global L2 norm exceeds
/// max_norm (> 0). Returns the norm before scaling.
double clip_gradient_norm(std::vector<Tensor>& gradients, double max_norm);

class SgdMomentum {
 public:
  explicit SgdMomentum(const TinyBackbone& model);
  void step(TinyBackbone& model, const std::vector<Tensor>& gradients, double lr, double momentum,
            double weight_decay);

 private:
  std::vector<Tensor> velocity_;
};

struct EvalResult {
  MaxBoxAccV2 boxes;
  double top1_loc = 0.0;
  double top1_cls = 0.0;
  double fixed_threshold = 0.0;
  std::vector<ScoreMap> maps;
  std::vector<std::size_t> predictions;
};

/// Test-split evaluation. The top-1 localization threshold comes from
/// cfg.fixed_threshold or, when unset, from the validation split.
EvalResult evaluate(const TinyBackbone& model, const std::vector<SynthSample>& test,
                    const std::vector<SynthSample>& val, const EvalConfig& cfg);

struct EpochMetrics {
  std::size_t epoch = 0;
  double l_cls = 0.0;
  double l_ca = 0.0;
  double l_fc = 0.0;
  double maxboxaccv2 = 0.0;
  double top1_loc = 0.0;
  double top1_cls = 0.0;
  std::size_t n_ca_skipped = 0;
  SelectionStats selection;
};

struct TrainResult {
  TinyBackbone model;
  std::vector<EpochMetrics> history;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

TrainResult train(const TrainConfig& train_cfg, const SynthConfig& synth_cfg, const EpochCallback& on_epoch = {});
/// Same, on an already generated dataset.
TrainResult train(const TrainConfig& train_cfg, const SynthDataset& data, const EpochCallback& on_epoch = {});

/// "epoch,l_cls,l_ca,l_fc,maxboxaccv2,top1_loc,top1_cls" with one row per epoch.
std::string history_csv(const std::vector<EpochMetrics>& history);

}  // namespace wsol
