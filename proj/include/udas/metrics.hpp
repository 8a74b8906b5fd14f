// Copyright (c) 2026 the udas authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "udas/labels.hpp"

namespace udas {

// C x C pixel counts; rows index ground truth, columns prediction.
// Ignore-index pixels are skipped. Matrices accumulated on different batches
// merge by addition.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(int num_classes, int ignore_index = 255);

  int num_classes() const { return num_classes_; }
  long long at(int gt, int pred) const {
    return counts_[static_cast<std::size_t>(gt) * num_classes_ + pred];
  }
  long long total() const;

  void accumulate(const LabelMap& pred, const LabelMap& gt);
  void merge(const ConfusionMatrix& other);

  // IoU_c = diag_c / (row_c + col_c - diag_c); classes never seen (zero
  // denominator) are reported as absent.
  std::vector<std::optional<double>> iou_per_class() const;

  // Mean IoU over present classes, optionally restricted to a subset.
  double miou(const std::vector<int>& class_subset = {}) const;

  // CSV report: one row per class (IoU or empty when absent) plus a final
  // `mean` row.
  void write_report_csv(const std::string& path,
                        const std::vector<std::string>& class_names = {}) const;

 private:
  int num_classes_ = 0;
  int ignore_index_ = 255;
  std::vector<long long> counts_;
};

}  // namespace udas
