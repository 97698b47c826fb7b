#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "wsol/attention.hpp"
#include "wsol/boxes.hpp"
#include "wsol/tensor.hpp"

namespace wsol {

/// Synthetic WSOL images: one textured ellipse per image on a background that
/// carries class-uncorrelated distractor patches.
///
/// Class k paints stripes of orientation k (k-th of n_classes evenly spaced
/// angles in [0, pi)). The object is darker than the background. A small
/// "head" disc inside the object carries high-contrast stripes; the rest of
/// the body carries the same stripes at lower contrast. Distractor patches
/// use stripes of a random class orientation at body contrast on the
/// background level, so texture alone does not separate object from
/// background.
struct SynthConfig {
  std::size_t image_size = 64;
  std::size_t n_classes = 2;
  std::size_t n_train = 2000;
  std::size_t n_val = 200;
  std::size_t n_test = 500;

  double min_radius = 9.0;   // ellipse semi-axes, pixels
  double max_radius = 20.0;
  double head_fraction = 0.4;  // head radius / min semi-axis
  double stripe_period = 8.0;  // pixels
  double head_contrast = 0.35;
  double body_contrast = 0.12;
  double object_level = 0.35;
  double background_level = 0.6;

  std::size_t n_distractors = 3;
  double distractor_min = 8.0;  // square side, pixels
  double distractor_max = 16.0;
  double distractor_contrast = 0.12;

  double noise_std = 0.05;
  std::uint64_t seed = 1;

  void validate() const;
};

enum class Split { train = 0, val = 1, test = 2 };
std::string split_name(Split s);

struct SynthSample {
  std::string image_id;
  Tensor image;  // [1, S, S], values in [0, 1]
  std::size_t label = 0;
  Box box;            // tight box of `object_mask`
  BinaryMap object_mask;
};

struct SynthDataset {
  std::vector<SynthSample> train;
  std::vector<SynthSample> val;
  std::vector<SynthSample> test;
};

/// Sample `index` of a split depends only on (seed, split, index).
SynthSample generate_sample(const SynthConfig& cfg, Split split, std::size_t index);
std::vector<SynthSample> generate_split(const SynthConfig& cfg, Split split);
SynthDataset generate_dataset(const SynthConfig& cfg);

/// Tight half-open box of the set pixels; throws ArgumentError if empty.
Box tight_box(const BinaryMap& mask);

BoxSets ground_truth(const std::vector<SynthSample>& samples);

}  // namespace wsol
