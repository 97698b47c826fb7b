#include "wsol/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "wsol/errors.hpp"
#include "wsol/rng.hpp"

namespace wsol {

void SynthConfig::validate() const {
  if (image_size < 16) throw ArgumentError("synth: image_size must be at least 16");
  if (n_classes < 2) throw ArgumentError("synth: n_classes must be at least 2");
  if (!(min_radius > 0.0) || !(max_radius >= min_radius)) throw ArgumentError("synth: need 0 < min_radius <= max_radius");
  if (2.0 * max_radius + 2.0 > static_cast<double>(image_size))
    throw ArgumentError("synth: object does not fit in the image (2 * max_radius + 2 > image_size)");
  const double img_area = static_cast<double>(image_size * image_size);
  // Largest tight box must stay within 60% of the image, smallest above 5%.
  if (4.0 * max_radius * max_radius > 0.6 * img_area)
    throw ArgumentError("synth: max_radius gives boxes above 60% of the image");
  if (4.0 * (min_radius + 1.0) * (min_radius + 1.0) < 0.05 * img_area)
    throw ArgumentError("synth: min_radius gives boxes below 5% of the image");
  if (!(head_fraction > 0.0 && head_fraction <= 1.0)) throw ArgumentError("synth: head_fraction must be in (0, 1]");
  if (!(stripe_period >= 2.0)) throw ArgumentError("synth: stripe_period must be at least 2");
  if (!(noise_std >= 0.0)) throw ArgumentError("synth: noise_std must be non-negative");
  if (!(distractor_min > 0.0) || !(distractor_max >= distractor_min) ||
      distractor_max >= static_cast<double>(image_size))
    throw ArgumentError("synth: invalid distractor size range");
}

std::string split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "unknown";
}

Box tight_box(const BinaryMap& mask) {
  int x0 = static_cast<int>(mask.width()), y0 = static_cast<int>(mask.height()), x1 = -1, y1 = -1;
  for (std::size_t r = 0; r < mask.height(); ++r)
    for (std::size_t c = 0; c < mask.width(); ++c)
      if (mask.at(r, c)) {
        x0 = std::min(x0, static_cast<int>(c));
        y0 = std::min(y0, static_cast<int>(r));
        x1 = std::max(x1, static_cast<int>(c) + 1);
        y1 = std::max(y1, static_cast<int>(r) + 1);
      }
  if (x1 < 0) throw ArgumentError("tight_box: empty mask");
  return {x0, y0, x1, y1};
}

namespace {

double stripe(double x, double y, double angle, double period, double phase) {
  const double t = x * std::cos(angle) + y * std::sin(angle);
  return std::sin(2.0 * std::numbers::pi * t / period + phase) >= 0.0 ? 1.0 : -1.0;
}

double class_angle(std::size_t k, std::size_t n_classes) {
  return std::numbers::pi * static_cast<double>(k) / static_cast<double>(n_classes);
}

std::size_t split_size(const SynthConfig& cfg, Split s) {
  switch (s) {
    case Split::train: return cfg.n_train;
    case Split::val: return cfg.n_val;
    case Split::test: return cfg.n_test;
  }
  return 0;
}

}  // namespace

SynthSample generate_sample(const SynthConfig& cfg, Split split, std::size_t index) {
  cfg.validate();
  const std::size_t S = cfg.image_size;
  const double Sd = static_cast<double>(S);
  CounterRng rng(cfg.seed, (static_cast<std::uint64_t>(split) << 40) | index);

  SynthSample s;
  s.label = index % cfg.n_classes;
  s.image_id = split_name(split) + "_" + std::to_string(index);
  const double angle = class_angle(s.label, cfg.n_classes);

  // Object geometry, resampled until the tight box respects the area bounds.
  double cx = 0, cy = 0, rx = 0, ry = 0;
  BinaryMap mask;
  for (int attempt = 0;; ++attempt) {
    rx = cfg.min_radius + (cfg.max_radius - cfg.min_radius) * rng.uniform();
    ry = cfg.min_radius + (cfg.max_radius - cfg.min_radius) * rng.uniform();
    cx = rx + 1.0 + (Sd - 2.0 * rx - 2.0) * rng.uniform();
    cy = ry + 1.0 + (Sd - 2.0 * ry - 2.0) * rng.uniform();
    mask = BinaryMap(S, S);
    for (std::size_t r = 0; r < S; ++r)
      for (std::size_t c = 0; c < S; ++c) {
        const double dx = (static_cast<double>(c) + 0.5 - cx) / rx;
        const double dy = (static_cast<double>(r) + 0.5 - cy) / ry;
        if (dx * dx + dy * dy <= 1.0) mask.set(r * S + c, true);
      }
    if (mask.any()) {
      const double frac = static_cast<double>(tight_box(mask).area()) / (Sd * Sd);
      if (frac >= 0.05 && frac <= 0.6) break;
    }
    if (attempt > 100) throw ArgumentError("synth: cannot place an object within the area bounds");
  }
  s.object_mask = mask;
  s.box = tight_box(mask);

  // Head disc strictly inside the ellipse.
  const double head_r = cfg.head_fraction * std::min(rx, ry);
  const double head_angle = 2.0 * std::numbers::pi * rng.uniform();
  const double head_off = (1.0 - cfg.head_fraction) * rng.uniform();
  const double hx = cx + head_off * rx * std::cos(head_angle);
  const double hy = cy + head_off * ry * std::sin(head_angle);
  const double phase = 2.0 * std::numbers::pi * rng.uniform();

  Tensor img(Shape{1, S, S}, init::Constant{cfg.background_level});

  // Distractors: stripes of a random class orientation, kept off the object box.
  for (std::size_t d = 0; d < cfg.n_distractors; ++d) {
    const double side = cfg.distractor_min + (cfg.distractor_max - cfg.distractor_min) * rng.uniform();
    const double dangle = class_angle(static_cast<std::size_t>(rng.below(cfg.n_classes)), cfg.n_classes);
    const double dphase = 2.0 * std::numbers::pi * rng.uniform();
    for (int attempt = 0; attempt < 20; ++attempt) {
      const double x0 = (Sd - side) * rng.uniform();
      const double y0 = (Sd - side) * rng.uniform();
      const Box patch{static_cast<int>(x0), static_cast<int>(y0), static_cast<int>(x0 + side),
                      static_cast<int>(y0 + side)};
      if (iou(patch, s.box) > 0.0) continue;
      for (int r = patch.y0; r < patch.y1; ++r)
        for (int c = patch.x0; c < patch.x1; ++c)
          img.at(0, static_cast<std::size_t>(r), static_cast<std::size_t>(c)) +=
              cfg.distractor_contrast * stripe(c, r, dangle, cfg.stripe_period, dphase);
      break;
    }
  }

  for (std::size_t r = 0; r < S; ++r)
    for (std::size_t c = 0; c < S; ++c) {
      if (!mask.at(r, c)) continue;
      const double x = static_cast<double>(c) + 0.5, y = static_cast<double>(r) + 0.5;
      const bool in_head = (x - hx) * (x - hx) + (y - hy) * (y - hy) <= head_r * head_r;
      const double contrast = in_head ? cfg.head_contrast : cfg.body_contrast;
      img.at(0, r, c) = cfg.object_level + contrast * stripe(x, y, angle, cfg.stripe_period, phase);
    }

  if (cfg.noise_std > 0.0)
    for (auto& v : img.data()) v += rng.gaussian(0.0, cfg.noise_std);
  for (auto& v : img.data()) v = std::clamp(v, 0.0, 1.0);
  s.image = std::move(img);
  return s;
}

std::vector<SynthSample> generate_split(const SynthConfig& cfg, Split split) {
  cfg.validate();
  std::vector<SynthSample> out;
  const std::size_t n = split_size(cfg, split);
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(generate_sample(cfg, split, i));
  return out;
}

SynthDataset generate_dataset(const SynthConfig& cfg) {
  return {generate_split(cfg, Split::train), generate_split(cfg, Split::val), generate_split(cfg, Split::test)};
}

BoxSets ground_truth(const std::vector<SynthSample>& samples) {
  BoxSets gt;
  for (const auto& s : samples) gt[s.image_id].push_back(s.box);
  return gt;
}

}  // namespace wsol
