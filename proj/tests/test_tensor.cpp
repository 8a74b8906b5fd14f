// Copyright (c) 2026 the udas authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "udas/losses.hpp"
#include "udas/optim.hpp"
#include "udas/rng.hpp"
#include "udas/tensor.hpp"

using udas::GradientTape;
using udas::Rng;
using udas::Tensor;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  REQUIRE(a.shape() == b.shape());
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i)
    m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("conv2d: all-ones 2x2 kernel sums the window") {
  Tensor in({1, 1, 2, 2}, 1.0);
  Tensor w({1, 1, 2, 2}, 1.0);
  Tensor b({1}, 0.0);
  Tensor out = udas::conv2d(in, w, b, 1, 0);
  CHECK(out.shape() == std::vector<int>{1, 1, 1, 1});
  CHECK(out[0] == doctest::Approx(4.0).epsilon(1e-15));
}

TEST_CASE("conv2d: 1x1 identity kernel reproduces the input") {
  Rng rng(7);
  Tensor in = random_tensor({2, 1, 3, 4}, rng);
  Tensor w({1, 1, 1, 1}, 1.0);
  Tensor b({1}, 0.0);
  Tensor out = udas::conv2d(in, w, b, 1, 0);
  CHECK(max_abs_diff(out, in) == 0.0);
}

TEST_CASE("conv2d: strided padded case matches the quadruple-loop oracle") {
  Rng rng(11);
  Tensor in = random_tensor({1, 2, 5, 5}, rng);
  Tensor w = random_tensor({3, 2, 4, 4}, rng);
  Tensor b = random_tensor({3}, rng);
  Tensor out = udas::conv2d(in, w, b, 2, 1);
  Tensor ref = oracle::conv2d(in, w, b, 2, 1);
  CHECK(max_abs_diff(out, ref) < 1e-12);
}

TEST_CASE("conv2d: agrees with the oracle across small shapes") {
  Rng rng(13);
  for (int trial = 0; trial < 40; ++trial) {
    const int h = rng.uniform_int(1, 8), w = rng.uniform_int(1, 8);
    const int k = rng.uniform_int(1, std::min(4, std::min(h, w) + 2));
    const int stride = rng.uniform_int(1, 2);
    const int pad = rng.uniform_int(0, 1);
    if (k > h + 2 * pad || k > w + 2 * pad) continue;
    const int ci = rng.uniform_int(1, 3), co = rng.uniform_int(1, 3);
    Tensor in = random_tensor({rng.uniform_int(1, 2), ci, h, w}, rng);
    Tensor wt = random_tensor({co, ci, k, k}, rng);
    Tensor b = random_tensor({co}, rng);
    CHECK(max_abs_diff(udas::conv2d(in, wt, b, stride, pad),
                       oracle::conv2d(in, wt, b, stride, pad)) < 1e-12);
  }
}

TEST_CASE("conv2d: rejects channel mismatch with a shape diagnostic") {
  Tensor in({1, 2, 4, 4}, 1.0);
  Tensor w({1, 3, 3, 3}, 1.0);
  Tensor b({1}, 0.0);
  CHECK_THROWS_WITH_AS(udas::conv2d(in, w, b, 1, 1),
                       doctest::Contains("channels"), std::invalid_argument);
}

TEST_CASE("conv2d: rejects kernels larger than the padded input") {
  Tensor in({1, 1, 2, 2}, 1.0);
  Tensor w({1, 1, 5, 5}, 1.0);
  Tensor b({1}, 0.0);
  CHECK_THROWS_AS(udas::conv2d(in, w, b, 1, 0), std::invalid_argument);
}

TEST_CASE("leaky_relu: definition and identity on positive input") {
  Tensor in({2}, {1.0, -1.0});
  Tensor out = udas::leaky_relu(in, 0.2);
  CHECK(out[0] == 1.0);
  CHECK(out[1] == doctest::Approx(-0.2).epsilon(1e-15));

  Rng rng(3);
  Tensor pos = random_tensor({1, 2, 3, 3}, rng, 0.1, 2.0);
  CHECK(max_abs_diff(udas::leaky_relu(pos, 0.2), pos) == 0.0);
}

TEST_CASE("leaky_relu: slope outside (0,1) is rejected") {
  Tensor in({1}, {1.0});
  CHECK_THROWS_AS(udas::leaky_relu(in, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(udas::leaky_relu(in, 1.0), std::invalid_argument);
}

TEST_CASE("leaky_relu: gradient on the negative side matches finite differences") {
  Tensor x({1}, {-3.0});
  x.ensure_grad();
  auto result = oracle::check_gradients(
      [&] { return udas::sum(udas::leaky_relu(x, 0.2)); }, {x});
  CHECK(result.max_rel_err < 1e-6);
  CHECK(x.grad()[0] == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("softmax_channel: symmetry and the [0, ln 3] closed form") {
  Tensor equal({1, 2, 1, 1}, {0.7, 0.7});
  Tensor out = udas::softmax_channel(equal);
  CHECK(out[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(out[1] == doctest::Approx(0.5).epsilon(1e-15));

  Tensor pair({1, 2, 1, 1}, {0.0, std::log(3.0)});
  out = udas::softmax_channel(pair);
  CHECK(out[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(out[1] == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("softmax_channel: matches the direct exp/sum oracle") {
  Rng rng(17);
  Tensor logits = random_tensor({1, 4, 3, 3}, rng, -3.0, 3.0);
  CHECK(max_abs_diff(udas::softmax_channel(logits), oracle::softmax_channel(logits)) <
        1e-12);
}

TEST_CASE("softmax_channel: per-pixel sums are 1 and values lie in [0,1]") {
  Rng rng(19);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor logits = random_tensor({2, rng.uniform_int(2, 5), 4, 4}, rng, -5.0, 5.0);
    Tensor probs = udas::softmax_channel(logits);
    const int c = probs.dim(1);
    for (int n = 0; n < probs.dim(0); ++n)
      for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) {
          double sum = 0.0;
          for (int k = 0; k < c; ++k) {
            const double v = probs[probs.offset(n, k, y, x)];
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
            sum += v;
          }
          CHECK(std::abs(sum - 1.0) < 1e-9);
        }
  }
}

TEST_CASE("bilinear_upsample: constant extension of a single pixel") {
  Tensor in({1, 1, 1, 1}, {7.0});
  Tensor out = udas::bilinear_upsample(in, 5, 3);
  for (std::size_t i = 0; i < out.numel(); ++i) CHECK(out[i] == 7.0);
}

TEST_CASE("bilinear_upsample: identity when the size is unchanged") {
  Rng rng(23);
  Tensor in = random_tensor({1, 2, 4, 6}, rng);
  CHECK(max_abs_diff(udas::bilinear_upsample(in, 4, 6), in) == 0.0);
}

TEST_CASE("bilinear_upsample: 2x2 -> 4x4 matches the scalar reference") {
  Tensor in({1, 1, 2, 2}, {0.0, 1.0, 2.0, 3.0});
  Tensor out = udas::bilinear_upsample(in, 4, 4);
  Tensor ref = oracle::bilinear_upsample(in, 4, 4);
  CHECK(max_abs_diff(out, ref) < 1e-12);
  // corners clamp to the source corners under half-pixel centers
  CHECK(out[out.offset(0, 0, 0, 0)] == doctest::Approx(0.0));
  CHECK(out[out.offset(0, 0, 3, 3)] == doctest::Approx(3.0));
}

TEST_CASE("bilinear_upsample: random shapes match the scalar reference") {
  Rng rng(29);
  for (int trial = 0; trial < 10; ++trial) {
    const int h = rng.uniform_int(1, 6), w = rng.uniform_int(1, 6);
    Tensor in = random_tensor({1, rng.uniform_int(1, 3), h, w}, rng);
    const int oh = h + rng.uniform_int(0, 6), ow = w + rng.uniform_int(0, 6);
    CHECK(max_abs_diff(udas::bilinear_upsample(in, oh, ow),
                       oracle::bilinear_upsample(in, oh, ow)) < 1e-12);
  }
}

TEST_CASE("backward: gradient of sum is all ones") {
  Tensor x({2, 3}, 0.5);
  GradientTape tape;
  GradientTape::Scope scope(tape);
  tape.watch(x);
  tape.backward(udas::sum(x));
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(x.grad()[i] == 1.0);
}

TEST_CASE("backward: gradient of sum of squares is 2x") {
  Tensor x({2}, {1.0, 2.0});
  GradientTape tape;
  GradientTape::Scope scope(tape);
  tape.watch(x);
  tape.backward(udas::sum(udas::mul(x, x)));
  CHECK(x.grad()[0] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(x.grad()[1] == doctest::Approx(4.0).epsilon(1e-15));
}

TEST_CASE("backward: rejects non-scalar losses and constants") {
  Tensor x({2}, 1.0);
  GradientTape tape;
  GradientTape::Scope scope(tape);
  tape.watch(x);
  Tensor y = udas::mul(x, x);
  CHECK_THROWS_AS(tape.backward(y), std::invalid_argument);
  Tensor constant = Tensor::scalar(1.0);
  CHECK_THROWS_AS(tape.backward(constant), std::invalid_argument);
}

TEST_CASE("backward: repeated calls accumulate; zeroing restores bit-identical grads") {
  Rng rng(31);
  Tensor x = random_tensor({1, 2, 4, 4}, rng);
  GradientTape tape;
  GradientTape::Scope scope(tape);
  tape.watch(x);
  Tensor loss = udas::sum(udas::mul(x, x));

  tape.backward(loss);
  std::vector<double> first(x.grad(), x.grad() + x.numel());
  tape.backward(loss);
  for (std::size_t i = 0; i < x.numel(); ++i)
    CHECK(x.grad()[i] == doctest::Approx(2.0 * first[i]).epsilon(1e-15));

  x.zero_grad();
  tape.backward(loss);
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(x.grad()[i] == first[i]);
}

TEST_CASE("backward: composed conv -> leaky_relu -> softmax -> ce gradients") {
  Rng rng(37);
  Tensor input = random_tensor({1, 3, 4, 4}, rng);
  Tensor w1 = random_tensor({4, 3, 3, 3}, rng, -0.5, 0.5);
  Tensor b1 = random_tensor({4}, rng, -0.1, 0.1);
  udas::LabelMap labels(1, 4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) labels.at(0, y, x) = rng.uniform_int(0, 3);

  auto loss_fn = [&] {
    Tensor probs = udas::softmax_channel(udas::leaky_relu(udas::conv2d(input, w1, b1, 1, 1), 0.2));
    return udas::supervised_ce(probs, labels, 255);
  };
  auto result = oracle::check_gradients(loss_fn, {input, w1, b1});
  CHECK(result.coordinates == input.numel() + w1.numel() + b1.numel());
  CHECK(result.max_rel_err < 1e-4);
}

TEST_CASE("tape: watching through a copy routes gradients to the shared buffer") {
  Tensor x({2}, {1.0, 2.0});
  x.ensure_grad();
  Tensor alias = x;  // shares value and grad storage
  GradientTape tape;
  GradientTape::Scope scope(tape);
  tape.watch(alias);
  tape.backward(udas::sum(udas::mul(x, alias)));
  CHECK(x.grad()[0] == doctest::Approx(2.0));
  CHECK(x.grad()[1] == doctest::Approx(4.0));
}

TEST_CASE("weighted_sum: accumulates left to right with weights") {
  Tensor a = Tensor::scalar(1.5), b = Tensor::scalar(-2.0), c = Tensor::scalar(0.25);
  Tensor out = udas::weighted_sum({a, b, c}, {1.0, 0.5, 4.0});
  CHECK(out.item() == doctest::Approx(1.5 - 1.0 + 1.0).epsilon(1e-15));
}

TEST_CASE("poly_lr: endpoints and midpoint of the schedule") {
  udas::LrSchedule s{1e-4, 1e-6, 2000, 0.9};
  CHECK(udas::poly_lr(0, s) == doctest::Approx(1e-4).epsilon(1e-15));
  CHECK(udas::poly_lr(2000, s) == doctest::Approx(1e-6).epsilon(1e-12));
  const double expected = 1e-6 + (1e-4 - 1e-6) * std::pow(0.5, 0.9);
  CHECK(udas::poly_lr(1000, s) == doctest::Approx(expected).epsilon(1e-14));
  CHECK_THROWS_AS(udas::poly_lr(2001, s), std::invalid_argument);
  CHECK_THROWS_AS(udas::poly_lr(-1, s), std::invalid_argument);
}

TEST_CASE("poly_lr: non-increasing and bounded") {
  udas::LrSchedule s{5e-3, 1e-5, 173, 0.9};
  double prev = udas::poly_lr(0, s);
  CHECK(prev == doctest::Approx(s.base));
  for (long long t = 1; t <= s.total_steps; ++t) {
    const double lr = udas::poly_lr(t, s);
    CHECK(lr <= prev);
    CHECK(lr >= s.end);
    CHECK(lr <= s.base);
    prev = lr;
  }
}

TEST_CASE("sgd: single step without momentum moves by -lr * grad") {
  Tensor p({1}, {0.0});
  p.ensure_grad();
  p.grad()[0] = 1.0;
  udas::SgdMomentum opt({p}, {0.1, 0.1, 1, 0.9}, 0.0, 0.0);
  opt.step();
  CHECK(p[0] == doctest::Approx(-0.1).epsilon(1e-15));
}

TEST_CASE("sgd: zero gradient and zero weight decay leave parameters unchanged") {
  Tensor p({3}, {1.0, -2.0, 0.5});
  p.ensure_grad();
  udas::SgdMomentum opt({p}, {0.1, 0.1, 4, 0.9}, 0.9, 0.0);
  opt.step();
  CHECK(p[0] == 1.0);
  CHECK(p[1] == -2.0);
  CHECK(p[2] == 0.5);
}

TEST_CASE("sgd: momentum trajectory matches the scalar recurrence") {
  // minimize f(p) = 0.5 * a * p^2, grad = a * p
  const double a = 0.7, lr = 0.05, momentum = 0.9, wd = 0.01;
  Tensor p({1}, {1.0});
  p.ensure_grad();
  udas::SgdMomentum opt({p}, {lr, lr, 3, 0.9}, momentum, wd);

  double ref_p = 1.0, ref_v = 0.0;
  for (int step = 0; step < 3; ++step) {
    p.zero_grad();
    p.grad()[0] = a * p[0];
    opt.step();
    const double g = a * ref_p + wd * ref_p;
    ref_v = momentum * ref_v + g;
    ref_p -= lr * ref_v;
    CHECK(p[0] == doctest::Approx(ref_p).epsilon(1e-12));
  }
}

TEST_CASE("adam: steps match the scalar recurrence with bias correction") {
  const double lr = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  Tensor p({1}, {0.3});
  p.ensure_grad();
  udas::Adam opt({p}, {lr, lr, 5, 0.9}, b1, b2, eps, 0.0);

  double ref_p = 0.3, m = 0.0, v = 0.0;
  for (int step = 1; step <= 5; ++step) {
    const double g = 2.0 * ref_p;  // f(p) = p^2
    p.zero_grad();
    p.grad()[0] = 2.0 * p[0];
    opt.step();
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, step));
    const double vh = v / (1 - std::pow(b2, step));
    ref_p -= lr * mh / (std::sqrt(vh) + eps);
    CHECK(p[0] == doctest::Approx(ref_p).epsilon(1e-12));
  }
}

TEST_CASE("optimizer: shape-mismatched gradient buffers are impossible by construction") {
  Tensor p({2, 2}, 1.0);
  p.ensure_grad();
  udas::SgdMomentum opt({p}, {0.1, 0.1, 1, 0.9});
  opt.zero_grad();
  for (std::size_t i = 0; i < p.numel(); ++i) CHECK(p.grad()[i] == 0.0);
}

TEST_CASE("gradients: every differentiable op passes finite-difference checks") {
  Rng rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x = random_tensor({1, 2, 3, 3}, rng, -2.0, 2.0);

    auto fd = [&](const std::function<Tensor()>& fn) {
      return oracle::check_gradients(fn, {x}).max_rel_err;
    };
    CHECK(fd([&] { return udas::sum(udas::leaky_relu(x, 0.2)); }) < 1e-4);
    CHECK(fd([&] { return udas::sum(udas::sigmoid(x)); }) < 1e-4);
    CHECK(fd([&] { return udas::sum(udas::mul(udas::softmax_channel(x), x)); }) < 1e-4);
    CHECK(fd([&] { return udas::sum(udas::mul(udas::bilinear_upsample(x, 5, 7), udas::bilinear_upsample(x, 5, 7))); }) < 1e-4);

    Tensor w = random_tensor({2, 2, 2, 2}, rng, -1.0, 1.0);
    Tensor b = random_tensor({2}, rng, -0.2, 0.2);
    CHECK(oracle::check_gradients(
              [&] {
                Tensor h = udas::conv2d(x, w, b, 1, 1);
                return udas::sum(udas::mul(h, h));
              },
              {x, w, b})
              .max_rel_err < 1e-4);
  }
}
