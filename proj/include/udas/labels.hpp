// Copyright (c) 2026 the udas authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "udas/tensor.hpp"

namespace udas {

// Integer class-id map for a batch of images.
struct LabelMap {
  int batch = 0;
  int height = 0;
  int width = 0;
  std::vector<int> values;  // batch * height * width, row-major

  LabelMap() = default;
  LabelMap(int n, int h, int w, int fill = 0)
      : batch(n), height(h), width(w),
        values(static_cast<std::size_t>(n) * h * w, fill) {}

  std::size_t numel() const { return values.size(); }
  int at(int n, int y, int x) const {
    return values[(static_cast<std::size_t>(n) * height + y) * width + x];
  }
  int& at(int n, int y, int x) {
    return values[(static_cast<std::size_t>(n) * height + y) * width + x];
  }
};

// Per-pixel argmax over channels; ties resolve to the lowest class index.
LabelMap argmax_channel(const Tensor& probs);

// N x C x H x W one-hot encoding; pixels labeled ignore_index become all-zero.
Tensor one_hot(const LabelMap& labels, int num_classes, int ignore_index = -1);

}  // namespace udas
