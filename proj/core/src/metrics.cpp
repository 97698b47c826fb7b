#include "wsol/metrics.hpp"

#include <algorithm>
#include <string>

#include "wsol/errors.hpp"

namespace wsol {

void EvalConfig::validate() const {
  if (iou_deltas.empty()) throw ArgumentError("eval: at least one IoU delta is required");
  for (double d : iou_deltas)
    if (!(d > 0.0 && d <= 1.0)) throw ArgumentError("eval: IoU deltas must lie in (0, 1]");
  if (n_thresholds < 2) throw ArgumentError("eval: n_thresholds must be at least 2");
  if (fixed_threshold && !(*fixed_threshold >= 0.0 && *fixed_threshold <= 1.0))
    throw ArgumentError("eval: fixed_threshold must lie in [0, 1]");
}

std::vector<double> threshold_grid(std::size_t n_thresholds) {
  std::vector<double> grid(n_thresholds);
  for (std::size_t i = 0; i < n_thresholds; ++i)
    grid[i] = static_cast<double>(i) / static_cast<double>(n_thresholds);
  return grid;
}

namespace {

const std::vector<Box>& lookup(const BoxSets& gt, const std::string& id) {
  const auto it = gt.find(id);
  if (it == gt.end() || it->second.empty()) throw DataError("no ground-truth box for image '" + id + "'");
  return it->second;
}

double best_pair_iou(const std::vector<Box>& est, const std::vector<Box>& gt) {
  double best = 0.0;
  for (const auto& e : est)
    for (const auto& g : gt) best = std::max(best, iou(e, g));
  return best;
}

}  // namespace

double best_iou(const Tensor& normalized_map, const std::vector<Box>& gt, double tau, Connectivity conn) {
  return best_pair_iou(boxes_at_threshold(normalized_map, tau, conn), gt);
}

double box_acc(std::span<const ScoreMap> maps, const BoxSets& gt, double tau, double delta, Connectivity conn) {
  if (maps.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& m : maps) {
    const auto& boxes = lookup(gt, m.image_id);
    if (best_iou(normalize(m.values), boxes, tau, conn) >= delta) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(maps.size());
}

namespace {

// iou_table[m][t] = best IoU of map m at grid threshold t.
std::vector<std::vector<double>> iou_table(std::span<const ScoreMap> maps, const BoxSets& gt,
                                           const std::vector<double>& grid, Connectivity conn) {
  std::vector<std::vector<double>> table;
  table.reserve(maps.size());
  for (const auto& m : maps) {
    const auto& boxes = lookup(gt, m.image_id);
    const Tensor norm = normalize(m.values);
    std::vector<double> row(grid.size());
    for (std::size_t t = 0; t < grid.size(); ++t) row[t] = best_iou(norm, boxes, grid[t], conn);
    table.push_back(std::move(row));
  }
  return table;
}

MaxBoxAcc best_over_grid(const std::vector<std::vector<double>>& table, const std::vector<double>& grid,
                         double delta) {
  MaxBoxAcc best{-1.0, 0.0};
  for (std::size_t t = 0; t < grid.size(); ++t) {
    std::size_t correct = 0;
    for (const auto& row : table)
      if (row[t] >= delta) ++correct;
    const double acc = table.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(table.size());
    if (acc > best.accuracy) best = {acc, grid[t]};
  }
  return best;
}

}  // namespace

MaxBoxAcc max_box_acc(std::span<const ScoreMap> maps, const BoxSets& gt, double delta, std::size_t n_thresholds,
                      Connectivity conn) {
  if (n_thresholds < 2) throw ArgumentError("max_box_acc: n_thresholds must be at least 2");
  const auto grid = threshold_grid(n_thresholds);
  return best_over_grid(iou_table(maps, gt, grid, conn), grid, delta);
}

MaxBoxAccV2 max_box_acc_v2(std::span<const ScoreMap> maps, const BoxSets& gt, const EvalConfig& cfg) {
  cfg.validate();
  const auto grid = threshold_grid(cfg.n_thresholds);
  const auto table = iou_table(maps, gt, grid, cfg.connectivity);
  MaxBoxAccV2 out;
  out.n_samples = maps.size();
  double total = 0.0;
  for (double delta : cfg.iou_deltas) {
    const MaxBoxAcc m = best_over_grid(table, grid, delta);
    out.per_delta.push_back({delta, m.accuracy, m.tau});
    total += m.accuracy;
  }
  out.mean = total / static_cast<double>(cfg.iou_deltas.size());
  return out;
}

double top1_localization(std::span<const std::size_t> predictions, std::span<const ScoreMap> maps,
                         std::span<const std::size_t> gt_classes, const BoxSets& gt, double fixed_threshold,
                         Connectivity conn) {
  if (predictions.size() != maps.size() || gt_classes.size() != maps.size())
    throw ArgumentError("top1_localization: predictions, maps and classes must align");
  if (maps.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < maps.size(); ++i) {
    const auto& boxes = lookup(gt, maps[i].image_id);
    if (predictions[i] != gt_classes[i]) continue;
    const auto est = boxes_at_threshold(normalize(maps[i].values), fixed_threshold, conn);
    if (est.empty()) continue;
    const auto largest =
        std::max_element(est.begin(), est.end(), [](const Box& a, const Box& b) { return a.area() < b.area(); });
    double best = 0.0;
    for (const auto& g : boxes) best = std::max(best, iou(*largest, g));
    if (best >= 0.5) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(maps.size());
}

double top1_classification(std::span<const std::size_t> predictions, std::span<const std::size_t> gt_classes) {
  if (predictions.size() != gt_classes.size()) throw ArgumentError("top1_classification: size mismatch");
  if (predictions.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) correct += predictions[i] == gt_classes[i];
  return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

double select_fixed_threshold(std::span<const ScoreMap> maps, const BoxSets& gt, std::size_t n_thresholds,
                              Connectivity conn) {
  return max_box_acc(maps, gt, 0.5, n_thresholds, conn).tau;
}

}  // namespace wsol
