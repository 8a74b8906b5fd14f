// Copyright (c) 2026 the udas authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

#include "udas/losses.hpp"
#include "udas/optim.hpp"
#include "udas/scenegen.hpp"

namespace udas {

enum class ThresholdMode { Adaptive, Fixed, None };

// All hyperparameters of a run. The on-disk representation is a flat
// key-value text file with dotted keys (`loss.w1_s = 0.01`); unknown keys
// are rejected. See config_schema_help() for the full key list.
struct TrainConfig {
  SceneConfig scene;

  // training schedule
  int iterations = 2000;
  int batch_size = 1;
  std::uint64_t seed = 42;
  int eval_interval = 200;
  int val_images = 24;
  int test_images = 48;

  // model
  int base_width = 16;

  // losses
  LossWeights weights;
  double loss_eps = kLogEps;

  // self-training
  double percentile_f = 75.0;
  int min_pixels = 8;
  ThresholdMode threshold_mode = ThresholdMode::Adaptive;
  double fixed_threshold = 0.2;
  double init_threshold = 1.0;
  bool inverse_class_weights = true;
  int weight_images = 128;

  // optimizers (total_steps is filled in from iterations). The generator
  // trains from scratch here, so its default base LR sits above the value
  // used with pretrained backbones; pass opt.g.lr_base to change it.
  LrSchedule g_lr{1e-3, 1e-6, 2000, 0.9};
  double g_momentum = 0.9;
  double g_weight_decay = 1e-4;
  LrSchedule d1_lr{1e-4, 1e-6, 2000, 0.9};
  LrSchedule d2_lr{1e-4, 1e-6, 2000, 0.9};
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  // ablation switches
  bool use_g1_s = true;
  bool use_g1_t = true;
  bool use_g2 = true;
  bool use_g3 = true;
};

// Parses a config file; keys omitted keep their defaults.
TrainConfig parse_config_file(const std::string& path);

// Parses config text (same format as the file).
TrainConfig parse_config_text(const std::string& text);

// Applies one `key=value` override in place.
void apply_override(TrainConfig& cfg, const std::string& key_value);

// Canonical serialization: every key in schema order, `key = value` lines.
std::string serialize_config(const TrainConfig& cfg);

// FNV-1a hash of the canonical serialization.
std::uint64_t config_hash(const TrainConfig& cfg);

// Range/consistency checks plus derived fields (LR schedule lengths).
// Called by the trainer; validates eagerly so bad values fail fast.
void finalize_config(TrainConfig& cfg);

// One line per key: name, default and a short description.
std::string config_schema_help();

}  // namespace udas
