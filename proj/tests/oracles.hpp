// Copyright (c) 2026 the udas authors
// SPDX-License-Identifier: Apache-2.0
//
// Test-only reference implementations. Everything here is written directly
// from the mathematical definitions (naive loops, no shared code with the
// library) so the main implementations can be checked against an
// independent route.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "udas/labels.hpp"
#include "udas/tensor.hpp"

namespace oracle {

// Direct quadruple-loop convolution: one summation per output element.
inline udas::Tensor conv2d(const udas::Tensor& in, const udas::Tensor& w,
                           const udas::Tensor& b, int stride, int pad) {
  const int n_batch = in.dim(0), c_in = in.dim(1), h = in.dim(2), ww = in.dim(3);
  const int c_out = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const int h_out = (h + 2 * pad - kh) / stride + 1;
  const int w_out = (ww + 2 * pad - kw) / stride + 1;
  udas::Tensor out({n_batch, c_out, h_out, w_out});
  for (int n = 0; n < n_batch; ++n)
    for (int co = 0; co < c_out; ++co)
      for (int oy = 0; oy < h_out; ++oy)
        for (int ox = 0; ox < w_out; ++ox) {
          double acc = b[static_cast<std::size_t>(co)];
          for (int ci = 0; ci < c_in; ++ci)
            for (int ky = 0; ky < kh; ++ky)
              for (int kx = 0; kx < kw; ++kx) {
                const int iy = oy * stride + ky - pad;
                const int ix = ox * stride + kx - pad;
                if (iy < 0 || iy >= h || ix < 0 || ix >= ww) continue;
                acc += in[in.offset(n, ci, iy, ix)] * w[w.offset(co, ci, ky, kx)];
              }
          out[out.offset(n, co, oy, ox)] = acc;
        }
  return out;
}

// Scalar bilinear interpolation with half-pixel centers and edge clamping.
inline double bilinear_at(const udas::Tensor& in, int n, int c, int oy, int ox,
                          int out_h, int out_w) {
  const int h = in.dim(2), w = in.dim(3);
  auto src = [](int i, int in_size, int out_size) {
    double s = (i + 0.5) * static_cast<double>(in_size) / out_size - 0.5;
    return std::min(std::max(s, 0.0), static_cast<double>(in_size - 1));
  };
  const double sy = src(oy, h, out_h), sx = src(ox, w, out_w);
  const int y0 = static_cast<int>(std::floor(sy)), x0 = static_cast<int>(std::floor(sx));
  const int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
  const double fy = sy - y0, fx = sx - x0;
  return in[in.offset(n, c, y0, x0)] * (1 - fy) * (1 - fx) +
         in[in.offset(n, c, y0, x1)] * (1 - fy) * fx +
         in[in.offset(n, c, y1, x0)] * fy * (1 - fx) +
         in[in.offset(n, c, y1, x1)] * fy * fx;
}

inline udas::Tensor bilinear_upsample(const udas::Tensor& in, int out_h, int out_w) {
  udas::Tensor out({in.dim(0), in.dim(1), out_h, out_w});
  for (int n = 0; n < in.dim(0); ++n)
    for (int c = 0; c < in.dim(1); ++c)
      for (int oy = 0; oy < out_h; ++oy)
        for (int ox = 0; ox < out_w; ++ox)
          out[out.offset(n, c, oy, ox)] = bilinear_at(in, n, c, oy, ox, out_h, out_w);
  return out;
}

// Direct exp/sum softmax (no max subtraction).
inline udas::Tensor softmax_channel(const udas::Tensor& in) {
  udas::Tensor out(in.shape());
  for (int n = 0; n < in.dim(0); ++n)
    for (int y = 0; y < in.dim(2); ++y)
      for (int x = 0; x < in.dim(3); ++x) {
        double denom = 0.0;
        for (int c = 0; c < in.dim(1); ++c) denom += std::exp(in[in.offset(n, c, y, x)]);
        for (int c = 0; c < in.dim(1); ++c)
          out[out.offset(n, c, y, x)] = std::exp(in[in.offset(n, c, y, x)]) / denom;
      }
  return out;
}

// Nearest-rank percentile by counting rather than sorting: the smallest
// value v in the list with #{y <= v} >= ceil(f/100 * n).
inline double percentile(const std::vector<double>& values, double f) {
  const std::size_t rank = static_cast<std::size_t>(
      std::ceil(f / 100.0 * static_cast<double>(values.size())));
  double best = 0.0;
  bool found = false;
  for (double v : values) {
    std::size_t count = 0;
    for (double y : values)
      if (y <= v) ++count;
    if (count >= std::max<std::size_t>(rank, 1) && (!found || v < best)) {
      best = v;
      found = true;
    }
  }
  return best;
}

// Per-pixel cross-entropy by explicit summation.
inline double supervised_ce(const udas::Tensor& probs, const udas::LabelMap& labels,
                            int ignore_index, double eps) {
  double acc = 0.0;
  long long count = 0;
  for (int n = 0; n < probs.dim(0); ++n)
    for (int y = 0; y < probs.dim(2); ++y)
      for (int x = 0; x < probs.dim(3); ++x) {
        const int label = labels.at(n, y, x);
        if (label == ignore_index) continue;
        acc += -std::log(probs[probs.offset(n, label, y, x)] + eps);
        ++count;
      }
  return count ? acc / static_cast<double>(count) : 0.0;
}

inline double mean_neg_log(const udas::Tensor& t, double eps) {
  double acc = 0.0;
  for (std::size_t i = 0; i < t.numel(); ++i) acc += -std::log(t[i] + eps);
  return acc / static_cast<double>(t.numel());
}

inline double mean_neg_log_one_minus(const udas::Tensor& t, double eps) {
  double acc = 0.0;
  for (std::size_t i = 0; i < t.numel(); ++i) acc += -std::log(1.0 - t[i] + eps);
  return acc / static_cast<double>(t.numel());
}

inline double d_loss(const udas::Tensor& on_negative, const udas::Tensor& on_positive,
                     double eps) {
  return mean_neg_log_one_minus(on_negative, eps) + mean_neg_log(on_positive, eps);
}

// Triple-loop self-training loss straight from the masked weighted sum.
inline double self_training_loss(const udas::Tensor& probs, const udas::Tensor& pseudo,
                                 const udas::Tensor& mask,
                                 const std::vector<double>& weights, double eps) {
  double acc = 0.0;
  long long selected = 0;
  for (int n = 0; n < probs.dim(0); ++n)
    for (int y = 0; y < probs.dim(2); ++y)
      for (int x = 0; x < probs.dim(3); ++x) {
        const std::size_t mi =
            (static_cast<std::size_t>(n) * probs.dim(2) + y) * probs.dim(3) + x;
        if (mask[mi] == 0.0) continue;
        ++selected;
        for (int c = 0; c < probs.dim(1); ++c)
          acc += -mask[mi] * weights[static_cast<std::size_t>(c)] *
                 pseudo[pseudo.offset(n, c, y, x)] *
                 std::log(probs[probs.offset(n, c, y, x)] + eps);
      }
  return selected ? acc / static_cast<double>(selected) : 0.0;
}

// Central finite differences against analytic gradients for a scalar loss.
// loss_fn must recompute the full forward pass from the current parameter
// values on every call.
struct GradCheck {
  double max_rel_err = 0.0;
  std::size_t coordinates = 0;
};

inline GradCheck check_gradients(const std::function<udas::Tensor()>& loss_fn,
                                 std::vector<udas::Tensor> params, double h = 1e-5) {
  using udas::GradientTape;
  for (udas::Tensor& p : params) {
    p.ensure_grad();
    p.zero_grad();
  }
  {
    GradientTape tape;
    GradientTape::Scope scope(tape);
    for (udas::Tensor& p : params) tape.watch(p);
    udas::Tensor loss = loss_fn();
    tape.backward(loss);
  }
  GradCheck result;
  for (udas::Tensor& p : params) {
    for (std::size_t i = 0; i < p.numel(); ++i) {
      const double saved = p[i];
      p[i] = saved + h;
      const double up = loss_fn().item();
      p[i] = saved - h;
      const double down = loss_fn().item();
      p[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = p.grad()[i];
      const double rel = std::abs(analytic - numeric) /
                         std::max({1.0, std::abs(analytic), std::abs(numeric)});
      result.max_rel_err = std::max(result.max_rel_err, rel);
      ++result.coordinates;
    }
  }
  return result;
}

}  // namespace oracle
