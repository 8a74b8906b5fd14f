// Copyright (c) 2026 the udas authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "udas/labels.hpp"
#include "udas/tensor.hpp"

namespace udas {

// Per-class confidence thresholds, updated at every training step from the
// current batch's discriminator confidences. A class that is absent from the
// batch (or below the min_pixels guard) keeps its previous value, which makes
// the traces of rare classes piecewise constant.
class ThresholdState {
 public:
  ThresholdState() = default;
  ThresholdState(int num_classes, double percentile_f, double initial = 1.0,
                 int min_pixels = 8);

  int num_classes() const { return static_cast<int>(thresholds_.size()); }
  double percentile_f() const { return f_; }
  int min_pixels() const { return min_pixels_; }

  double threshold(int cls) const { return thresholds_[cls]; }
  const std::vector<double>& thresholds() const { return thresholds_; }
  long long last_update_step(int cls) const { return last_update_step_[cls]; }

  // One (step, value) entry per class per recorded step.
  struct TraceEntry {
    long long step;
    double value;
  };
  const std::vector<std::vector<TraceEntry>>& history() const { return history_; }

  // Number of times a class's threshold actually changed value.
  int change_count(int cls) const { return change_count_[cls]; }

  void set_threshold(int cls, double value);
  void record_step(long long step);  // appends the current values to history

 private:
  std::vector<double> thresholds_;
  std::vector<long long> last_update_step_;
  std::vector<int> change_count_;
  std::vector<std::vector<TraceEntry>> history_;
  double f_ = 75.0;
  int min_pixels_ = 8;

  friend std::vector<int> update_thresholds(const Tensor&, const LabelMap&,
                                            ThresholdState&, long long);
};

// Inverse-frequency class weights computed once from source annotations.
struct ClassWeights {
  std::vector<double> weights;             // mean 1 after normalization
  std::vector<double> source_frequencies;  // pixel frequency per class
};

// Pseudo labels plus the adaptive selection mask for one target batch.
struct PseudoLabelPack {
  Tensor pseudo;                           // N x C x H x W one-hot argmax
  Tensor mask;                             // N x H x W in {0,1}
  std::vector<long long> selected_per_class;
  long long selected_total = 0;
};

// Weights are 1/max(freq_c, 1e-6), clamped to 10x the median, then scaled to
// mean 1. With inverse=false the weights are proportional to frequency
// instead (the literal reading), same clamp and normalization.
ClassWeights class_weights_from_source(const std::vector<LabelMap>& label_maps,
                                       int num_classes, bool inverse = true);

// Nearest-rank percentile: sorted ascending, element at ceil(f/100 * n) - 1.
// values must be non-empty; 0 < f <= 100.
double percentile(std::vector<double> values, double f);

// Recomputes T_f[c] for every class with at least state.min_pixels() pixels
// predicted as c in the batch; other classes keep their previous value.
// Appends one history entry per class and returns the updated class ids.
// d1_conf is N x 1 x H x W; pred_labels is the per-pixel argmax of the
// generator probabilities on the same batch.
std::vector<int> update_thresholds(const Tensor& d1_conf, const LabelMap& pred_labels,
                                   ThresholdState& state, long long step);

// Mask per the adaptive rule: selected iff d1_conf > T_f[argmax class], with
// a strict inequality. probs supplies the argmax pseudo labels.
PseudoLabelPack build_mask(const Tensor& d1_conf, const Tensor& probs,
                           const ThresholdState& state);

// CSV export of the recorded trace: step,class_id,class_name,threshold,
// running_mean — where running_mean averages the entries from the first
// recorded step to the current one.
void export_threshold_trace(const ThresholdState& state, const std::string& path,
                            const std::vector<std::string>& class_names = {});

}  // namespace udas
