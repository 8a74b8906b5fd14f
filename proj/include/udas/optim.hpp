// Copyright (c) 2026 the udas authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "udas/tensor.hpp"

namespace udas {

// Polynomial learning-rate decay: lr(t) = end + (base - end) * (1 - t/T)^power.
struct LrSchedule {
  double base = 1e-4;
  double end = 1e-6;
  long long total_steps = 2000;
  double power = 0.9;
};

double poly_lr(long long step, const LrSchedule& schedule);

// SGD with classical momentum. Weight decay is added to the gradient as an
// L2 term before the momentum update.
class SgdMomentum {
 public:
  SgdMomentum(std::vector<Tensor> params, LrSchedule schedule,
              double momentum = 0.9, double weight_decay = 1e-4);

  void step();
  void zero_grad();
  double current_lr() const { return poly_lr(steps_done_, schedule_); }
  long long steps_done() const { return steps_done_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> velocity_;
  LrSchedule schedule_;
  double momentum_;
  double weight_decay_;
  long long steps_done_ = 0;
};

// Adam with bias correction.
class Adam {
 public:
  Adam(std::vector<Tensor> params, LrSchedule schedule, double beta1 = 0.9,
       double beta2 = 0.999, double eps = 1e-8, double weight_decay = 0.0);

  void step();
  void zero_grad();
  double current_lr() const { return poly_lr(steps_done_, schedule_); }
  long long steps_done() const { return steps_done_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> moment1_;
  std::vector<std::vector<double>> moment2_;
  LrSchedule schedule_;
  double beta1_, beta2_, eps_, weight_decay_;
  long long steps_done_ = 0;
};

}  // namespace udas
