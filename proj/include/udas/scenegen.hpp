// Copyright (c) 2026 the udas authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "udas/labels.hpp"
#include "udas/tensor.hpp"

namespace udas {

enum class Domain { Source, Target };
enum class Split { Train, Val, Test };

// Procedural scene distribution. Both domains share the geometry (identical
// label maps for the same seed); the target domain differs only in
// appearance: rotated palette, gamma curve, low-frequency correlated noise
// and retuned texture frequency. All-zero shift parameters make the two
// domains render bit-identically.
struct SceneConfig {
  int height = 64;
  int width = 64;
  int num_classes = 6;
  std::uint64_t data_seed = 1;

  // target-domain appearance shift
  double palette_angle_deg = 35.0;
  double gamma = 1.5;
  double noise_amplitude = 0.08;
  double texture_shift = 2.0;

  // informational per-class pixel-frequency targets (sum to 1); verified by
  // census at the default class count
  std::vector<double> frequency_targets;

  SceneConfig();
};

// Class names of the default 6-class layout.
const std::vector<std::string>& scene_class_names();

struct Scene {
  Tensor image;     // 1 x 3 x H x W, values in [0,1]
  LabelMap labels;  // batch 1
};

Scene generate_scene(std::uint64_t seed, const SceneConfig& cfg, Domain domain);

// Images with labels attached only for source batches; target ground truth
// stays out of the training path and is fetched separately for evaluation.
struct SegmentationBatch {
  Tensor images;  // N x 3 x H x W
  std::optional<LabelMap> labels;
  Domain domain = Domain::Source;
  std::vector<std::uint64_t> sample_seeds;
};

// Scene-seed range of a (domain, split) pair; ranges are pairwise disjoint.
std::pair<std::uint64_t, std::uint64_t> split_seed_range(Domain domain, Split split);

std::string split_name(Domain domain, Split split);

// Infinite deterministic stream of batches. Train streams start at an
// epoch_seed-derived offset inside their seed range; val/test streams always
// enumerate the same fixed scenes in order.
class BatchIterator {
 public:
  BatchIterator(SceneConfig cfg, Domain domain, Split split, int batch_size,
                std::uint64_t epoch_seed);

  SegmentationBatch next();

 private:
  SceneConfig cfg_;
  Domain domain_;
  Split split_;
  int batch_size_;
  std::uint64_t range_lo_, range_size_, offset_, index_ = 0;
};

// Fixed labeled scenes of a split, for evaluation.
std::vector<Scene> make_eval_set(const SceneConfig& cfg, Domain domain, Split split,
                                 int count);

// ---- dataset dump -----------------------------------------------------------

void write_ppm(const std::string& path, const Tensor& image);   // 1 x 3 x H x W
void write_pgm(const std::string& path, const LabelMap& labels);

// Writes <split>_<index>.ppm / .pgm pairs for the first `count` scenes.
void dump_split(const SceneConfig& cfg, Domain domain, Split split, int count,
                const std::string& out_dir);

}  // namespace udas
