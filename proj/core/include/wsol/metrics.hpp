#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "wsol/boxes.hpp"

namespace wsol {

struct EvalConfig {
  std::vector<double> iou_deltas{0.3, 0.5, 0.7};
  std::size_t n_thresholds = 100;
  std::optional<double> fixed_threshold;  // for top-1 localization
  Connectivity connectivity = Connectivity::four;

  void validate() const;
};

/// Evenly spaced thresholds i / n for i in [0, n).
std::vector<double> threshold_grid(std::size_t n_thresholds);

/// Best IoU over (estimated boxes at tau) x (ground-truth boxes) of a
/// normalized map; 0 when nothing exceeds tau.
double best_iou(const Tensor& normalized_map, const std::vector<Box>& gt, double tau,
                Connectivity conn = Connectivity::four);

/// Fraction of maps whose best IoU at tau reaches delta. Maps are min-max
/// normalized first. Throws DataError for an image id without ground truth.
double box_acc(std::span<const ScoreMap> maps, const BoxSets& gt, double tau, double delta,
               Connectivity conn = Connectivity::four);

struct MaxBoxAcc {
  double accuracy = 0.0;
  double tau = 0.0;  // smallest grid threshold attaining the accuracy
};

MaxBoxAcc max_box_acc(std::span<const ScoreMap> maps, const BoxSets& gt, double delta, std::size_t n_thresholds = 100,
                      Connectivity conn = Connectivity::four);

struct MaxBoxAccV2 {
  struct PerDelta {
    double delta = 0.0;
    double accuracy = 0.0;
    double tau = 0.0;
  };
  double mean = 0.0;
  std::vector<PerDelta> per_delta;
  std::size_t n_samples = 0;
};

/// Mean of MaxBoxAcc over the IoU criteria. Box extraction runs once per
/// (map, threshold) and is shared across deltas.
MaxBoxAccV2 max_box_acc_v2(std::span<const ScoreMap> maps, const BoxSets& gt, const EvalConfig& cfg = {});

/// Fraction with the right class whose largest estimated component at
/// `fixed_threshold` has IoU >= 0.5 with some ground-truth box.
double top1_localization(std::span<const std::size_t> predictions, std::span<const ScoreMap> maps,
                         std::span<const std::size_t> gt_classes, const BoxSets& gt, double fixed_threshold,
                         Connectivity conn = Connectivity::four);

double top1_classification(std::span<const std::size_t> predictions, std::span<const std::size_t> gt_classes);

/// Threshold maximizing box_acc at IoU 0.5 on a held-out split.
double select_fixed_threshold(std::span<const ScoreMap> maps, const BoxSets& gt, std::size_t n_thresholds = 100,
                              Connectivity conn = Connectivity::four);

}  // namespace wsol
