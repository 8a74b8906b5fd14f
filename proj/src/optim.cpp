// Copyright (c) 2026 the udas authors
// SPDX-License-Identifier: Apache-2.0
#include "udas/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace udas {

double poly_lr(long long step, const LrSchedule& s) {
  if (step < 0 || step > s.total_steps)
    throw std::invalid_argument("poly_lr: step outside [0, total_steps]");
  const double t = s.total_steps > 0
                       ? static_cast<double>(step) / static_cast<double>(s.total_steps)
                       : 1.0;
  return s.end + (s.base - s.end) * std::pow(1.0 - t, s.power);
}

namespace {

void check_params(std::vector<Tensor>& params) {
  for (Tensor& p : params) {
    if (!p.defined()) throw std::invalid_argument("optimizer: undefined parameter");
    p.ensure_grad();
  }
}

}  // namespace

SgdMomentum::SgdMomentum(std::vector<Tensor> params, LrSchedule schedule,
                         double momentum, double weight_decay)
    : params_(std::move(params)),
      schedule_(schedule),
      momentum_(momentum),
      weight_decay_(weight_decay) {
  check_params(params_);
  velocity_.reserve(params_.size());
  for (const Tensor& p : params_) velocity_.emplace_back(p.numel(), 0.0);
}

void SgdMomentum::step() {
  const double lr = poly_lr(steps_done_, schedule_);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor& p = params_[k];
    double* value = p.data();
    const double* grad = p.grad();
    std::vector<double>& vel = velocity_[k];
    for (std::size_t i = 0; i < vel.size(); ++i) {
      const double g = grad[i] + weight_decay_ * value[i];
      vel[i] = momentum_ * vel[i] + g;
      value[i] -= lr * vel[i];
    }
  }
  ++steps_done_;
}

void SgdMomentum::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

Adam::Adam(std::vector<Tensor> params, LrSchedule schedule, double beta1,
           double beta2, double eps, double weight_decay)
    : params_(std::move(params)),
      schedule_(schedule),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps),
      weight_decay_(weight_decay) {
  check_params(params_);
  moment1_.reserve(params_.size());
  moment2_.reserve(params_.size());
  for (const Tensor& p : params_) {
    moment1_.emplace_back(p.numel(), 0.0);
    moment2_.emplace_back(p.numel(), 0.0);
  }
}

void Adam::step() {
  const double lr = poly_lr(steps_done_, schedule_);
  ++steps_done_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_done_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_done_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor& p = params_[k];
    double* value = p.data();
    const double* grad = p.grad();
    std::vector<double>& m = moment1_[k];
    std::vector<double>& v = moment2_[k];
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double g = grad[i] + weight_decay_ * value[i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      value[i] -= lr * m_hat / (std::sqrt(v_hat) + eps_);
    }
  }
}

void Adam::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

}  // namespace udas
