// Copyright (c) 2026 the udas authors
// SPDX-License-Identifier: Apache-2.0
#include "udas/labels.hpp"

#include <stdexcept>
#include <string>

namespace udas {

LabelMap argmax_channel(const Tensor& probs) {
  if (probs.ndim() != 4)
    throw std::invalid_argument("argmax_channel: expects N x C x H x W");
  const int nb = probs.dim(0), c = probs.dim(1), h = probs.dim(2), w = probs.dim(3);
  LabelMap out(nb, h, w);
  const double* p = probs.data();
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int n = 0; n < nb; ++n) {
    const std::size_t base = static_cast<std::size_t>(n) * c * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      int best = 0;
      double best_v = p[base + i];
      for (int k = 1; k < c; ++k) {
        const double v = p[base + k * plane + i];
        if (v > best_v) {
          best_v = v;
          best = k;
        }
      }
      out.values[n * plane + i] = best;
    }
  }
  return out;
}

Tensor one_hot(const LabelMap& labels, int num_classes, int ignore_index) {
  Tensor out({labels.batch, num_classes, labels.height, labels.width}, 0.0);
  const std::size_t plane = static_cast<std::size_t>(labels.height) * labels.width;
  double* p = out.data();
  for (int n = 0; n < labels.batch; ++n) {
    for (std::size_t i = 0; i < plane; ++i) {
      const int v = labels.values[n * plane + i];
      if (v == ignore_index) continue;
      if (v < 0 || v >= num_classes)
        throw std::invalid_argument("one_hot: label " + std::to_string(v) +
                                    " outside [0," + std::to_string(num_classes) + ")");
      p[(static_cast<std::size_t>(n) * num_classes + v) * plane + i] = 1.0;
    }
  }
  return out;
}

}  // namespace udas
