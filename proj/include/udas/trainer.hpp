// Copyright (c) 2026 the udas authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "udas/config.hpp"
#include "udas/metrics.hpp"
#include "udas/nets.hpp"
#include "udas/selftrain.hpp"

namespace udas {

// One row of the metrics log.
struct StepRecord {
  long long iter = 0;
  double lr_g = 0.0, lr_d1 = 0.0, lr_d2 = 0.0;
  LossReport losses;
  long long masked_pixels = 0;
  std::vector<double> thresholds;        // per-class snapshot after this step
  std::vector<long long> predicted_px;   // per-class argmax census, target batch
  std::optional<double> val_miou;
};

struct RunRecord {
  std::vector<StepRecord> steps;
  double final_test_miou = 0.0;
  double best_val_miou = 0.0;
  long long best_val_iter = -1;
  double wall_seconds = 0.0;
  double cpu_seconds = 0.0;  // thread CPU time of the training loop
};

using ProgressFn = std::function<void(const StepRecord&)>;

// Alternating optimization of G, D1 and D2. Update order inside one step is
// G first (supervised + adversarial + self-training), then D1, then D2; each
// phase owns its tape and only its own parameters are watched, so gradient
// buffers never leak across phases.
class Trainer {
 public:
  explicit Trainer(TrainConfig cfg);

  const TrainConfig& config() const { return cfg_; }
  Network& generator() { return g_; }
  Network& discriminator1() { return d1_; }
  Network& discriminator2() { return d2_; }
  const ThresholdState& thresholds() const { return thresholds_; }
  const ClassWeights& class_weights() const { return class_weights_; }
  long long iterations_done() const { return iter_; }

  // One optimization step on a paired (source, target) batch. The source
  // batch must carry labels; the target batch must not.
  StepRecord train_step(const SegmentationBatch& source, const SegmentationBatch& target);

  // Full training run: writes config.cfg, metrics.csv, threshold_trace.csv,
  // eval_report.csv, run_summary.txt, checkpoint_best.udas and
  // checkpoint_final.udas into run_dir.
  RunRecord run(const std::string& run_dir, const ProgressFn& progress = {});

  // mIoU of the current generator on a named split.
  double evaluate(Domain domain, Split split, int count,
                  ConfusionMatrix* out_cm = nullptr);

  // Checkpoint column of this trainer's networks ("G.", "D1.", "D2." prefixes).
  std::vector<std::pair<std::string, Tensor>> checkpoint_entries();

 private:
  TrainConfig cfg_;
  Network g_, d1_, d2_;
  SgdMomentum g_opt_;
  Adam d1_opt_, d2_opt_;
  ThresholdState thresholds_;
  ClassWeights class_weights_;
  long long iter_ = 0;
};

// Per-class names used in reports (scene names for the default class count).
std::vector<std::string> report_class_names(int num_classes);

// Loads a checkpoint's generator and evaluates it on a split; optionally
// writes the per-class CSV report.
double evaluate_checkpoint(const TrainConfig& cfg, const std::string& checkpoint_path,
                           Domain domain, Split split,
                           const std::string& report_csv = "",
                           ConfusionMatrix* out_cm = nullptr);

bool parse_split_spec(const std::string& name, Domain* domain, Split* split);

// ---- ablation ---------------------------------------------------------------

struct AblationRow {
  int index = 0;
  std::string name;
  TrainConfig cfg;
  std::uint64_t hash = 0;
  double miou = 0.0;
};

// The 8 configurations of the ablation table, derived from a base config:
// supervised only; minus each adversarial/self-training term; self-training
// without thresholding; fixed threshold; full adaptive.
std::vector<AblationRow> ablation_configs(const TrainConfig& base);

// Runs every configuration (subdirectory per row) and writes ablation.csv.
std::vector<AblationRow> run_ablation_suite(const TrainConfig& base,
                                            const std::string& out_dir,
                                            const ProgressFn& progress = {});

void write_ablation_csv(const std::vector<AblationRow>& rows, const std::string& path);

// Rebuilds threshold_trace.csv from a run directory's metrics.csv.
void regenerate_threshold_trace(const std::string& run_dir, const std::string& out_csv);

}  // namespace udas
