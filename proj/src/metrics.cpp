// Copyright (c) 2026 the udas authors
// SPDX-License-Identifier: Apache-2.0
#include "udas/metrics.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace udas {

ConfusionMatrix::ConfusionMatrix(int num_classes, int ignore_index)
    : num_classes_(num_classes),
      ignore_index_(ignore_index),
      counts_(static_cast<std::size_t>(num_classes) * num_classes, 0) {
  if (num_classes < 2)
    throw std::invalid_argument("ConfusionMatrix: num_classes must be >= 2");
}

long long ConfusionMatrix::total() const {
  long long t = 0;
  for (long long v : counts_) t += v;
  return t;
}

void ConfusionMatrix::accumulate(const LabelMap& pred, const LabelMap& gt) {
  if (pred.batch != gt.batch || pred.height != gt.height || pred.width != gt.width)
    throw std::invalid_argument("ConfusionMatrix: prediction/ground-truth size mismatch");
  for (std::size_t i = 0; i < gt.numel(); ++i) {
    const int g = gt.values[i];
    if (g == ignore_index_) continue;
    const int p = pred.values[i];
    if (g < 0 || g >= num_classes_ || p < 0 || p >= num_classes_)
      throw std::invalid_argument("ConfusionMatrix: label outside [0,C)");
    ++counts_[static_cast<std::size_t>(g) * num_classes_ + p];
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.num_classes_ != num_classes_)
    throw std::invalid_argument("ConfusionMatrix: merge size mismatch");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::vector<std::optional<double>> ConfusionMatrix::iou_per_class() const {
  std::vector<std::optional<double>> out(static_cast<std::size_t>(num_classes_));
  for (int c = 0; c < num_classes_; ++c) {
    long long row = 0, col = 0;
    for (int k = 0; k < num_classes_; ++k) {
      row += at(c, k);
      col += at(k, c);
    }
    const long long diag = at(c, c);
    const long long denom = row + col - diag;
    if (denom > 0)
      out[static_cast<std::size_t>(c)] =
          static_cast<double>(diag) / static_cast<double>(denom);
  }
  return out;
}

double ConfusionMatrix::miou(const std::vector<int>& class_subset) const {
  const auto ious = iou_per_class();
  double sum = 0.0;
  int present = 0;
  auto consider = [&](int c) {
    if (ious[static_cast<std::size_t>(c)]) {
      sum += *ious[static_cast<std::size_t>(c)];
      ++present;
    }
  };
  if (class_subset.empty())
    for (int c = 0; c < num_classes_; ++c) consider(c);
  else
    for (int c : class_subset) {
      if (c < 0 || c >= num_classes_)
        throw std::invalid_argument("miou: class subset entry outside [0,C)");
      consider(c);
    }
  return present ? sum / present : 0.0;
}

void ConfusionMatrix::write_report_csv(const std::string& path,
                                       const std::vector<std::string>& class_names) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("write_report_csv: cannot open " + path);
  os << "class_id,class_name,iou\n";
  const auto ious = iou_per_class();
  char buf[32];
  for (int c = 0; c < num_classes_; ++c) {
    std::string name = static_cast<std::size_t>(c) < class_names.size()
                           ? class_names[static_cast<std::size_t>(c)]
                           : "class" + std::to_string(c);
    os << c << ',' << name << ',';
    if (ious[static_cast<std::size_t>(c)]) {
      std::snprintf(buf, sizeof buf, "%.17g", *ious[static_cast<std::size_t>(c)]);
      os << buf;
    }
    os << '\n';
  }
  std::snprintf(buf, sizeof buf, "%.17g", miou());
  os << ",mean," << buf << '\n';
  if (!os) throw std::runtime_error("write_report_csv: write failed for " + path);
}

}  // namespace udas
