// Copyright (c) 2026 the udas authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "udas/labels.hpp"
#include "udas/tensor.hpp"

namespace udas {

// Floor added inside every log so probability-map losses stay finite.
inline constexpr double kLogEps = 1e-10;

struct LossWeights {
  double w1_s = 1e-2;  // adversarial vs D1, source maps
  double w1_t = 1e-3;  // adversarial vs D1, target maps
  double w2_t = 1e-2;  // adversarial vs D2, target maps
  double w3 = 1e-1;    // self-training
};

// Per-term scalar values of one training step. total carries the weighted
// generator objective: g0 + w1_s*g1_s + w1_t*g1_t + w2_t*g2_t + w3*g3,
// accumulated in exactly that order. d1/d2 are the discriminator losses and
// do not enter total.
struct LossReport {
  double g0 = 0.0;
  double g1_s = 0.0;
  double g1_t = 0.0;
  double g2_t = 0.0;
  double g3 = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
  double total = 0.0;
};

// Mean over non-ignored pixels of -log(probs[label] + eps).
Tensor supervised_ce(const Tensor& probs, const LabelMap& labels,
                     int ignore_index = 255, double eps = kLogEps);

// D1 objective: generated maps are class 0, ground-truth maps class 1.
// Each map contributes the mean over its own pixels.
Tensor d1_loss(const Tensor& d1_on_generated, const Tensor& d1_on_gt,
               double eps = kLogEps);

// Generator adversarial term vs D1: mean of -log(D1(generated)).
Tensor g_adv1(const Tensor& d1_on_generated, double eps = kLogEps);

// D2 objective: target-generated maps are class 0, source-generated class 1.
Tensor d2_loss(const Tensor& d2_on_target, const Tensor& d2_on_source,
               double eps = kLogEps);

// Generator adversarial term vs D2: mean of -log(D2(target)).
Tensor g_adv2(const Tensor& d2_on_target, double eps = kLogEps);

// Masked, class-weighted cross-entropy against the one-hot pseudo labels,
// normalized by the number of selected pixels (0 when the mask is empty).
// pseudo and mask are treated as constants: no gradient flows through them.
//   probs:  N x C x H x W,  pseudo: N x C x H x W one-hot,  mask: N x H x W.
Tensor self_training_loss(const Tensor& probs, const Tensor& pseudo,
                          const Tensor& mask,
                          const std::vector<double>& class_weights,
                          double eps = kLogEps);

// Scalar loss terms of one step; absent optionals are disabled (ablations)
// and contribute exactly zero. d1/d2 are carried through to the report.
struct LossTerms {
  Tensor g0;
  std::optional<Tensor> g1_s;
  std::optional<Tensor> g1_t;
  std::optional<Tensor> g2_t;
  std::optional<Tensor> g3;
  double d1 = 0.0;
  double d2 = 0.0;
};

// Weighted total on the tape plus the numeric per-term report.
std::pair<Tensor, LossReport> full_loss(const LossTerms& terms,
                                        const LossWeights& weights);

}  // namespace udas
