// Copyright (c) 2026 the udas authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "udas/losses.hpp"
#include "udas/nets.hpp"
#include "udas/rng.hpp"

using udas::DiscriminatorSpec;
using udas::Network;
using udas::Rng;
using udas::Tensor;

namespace {

Tensor random_image(int n, int c, int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t({n, c, h, w});
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform();
  return t;
}

bool bit_identical(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  for (std::size_t i = 0; i < a.numel(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

}  // namespace

TEST_CASE("generator: output logits keep the input spatial size") {
  Network g = udas::build_generator(6, 16, 1);
  Tensor out = g.forward(random_image(1, 3, 32, 32, 2));
  CHECK(out.shape() == std::vector<int>{1, 6, 32, 32});

  // also for even sizes that are not multiples of 8
  out = g.forward(random_image(1, 3, 10, 22, 3));
  CHECK(out.shape() == std::vector<int>{1, 6, 10, 22});
}

TEST_CASE("generator: identical seeds give bit-identical parameters") {
  Network a = udas::build_generator(6, 16, 99);
  Network b = udas::build_generator(6, 16, 99);
  Network c = udas::build_generator(6, 16, 100);
  auto pa = a.params(), pb = b.params(), pc = c.params();
  REQUIRE(pa.size() == pb.size());
  bool all_equal = true, any_differs_from_c = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    all_equal = all_equal && bit_identical(pa[i], pb[i]);
    any_differs_from_c = any_differs_from_c || !bit_identical(pa[i], pc[i]);
  }
  CHECK(all_equal);
  CHECK(any_differs_from_c);
}

TEST_CASE("generator: parameter count equals the layer-spec arithmetic") {
  const int w = 16, classes = 6;
  Network g = udas::build_generator(classes, w, 7);
  auto conv_params = [](int cin, int cout) { return cout * cin * 9 + cout; };
  const std::size_t expected =
      conv_params(3, w) + conv_params(w, 2 * w) + conv_params(2 * w, 4 * w) +
      conv_params(4 * w, 2 * w) + conv_params(2 * w, w) + conv_params(w, classes);
  CHECK(g.param_count() == expected);
  CHECK(g.param_count() == 47542);  // ~50k at base_width 16
}

TEST_CASE("generator: precondition violations are rejected") {
  CHECK_THROWS_AS(udas::build_generator(1, 16, 0), std::invalid_argument);
  CHECK_THROWS_AS(udas::build_generator(6, 3, 0), std::invalid_argument);
}

TEST_CASE("discriminator: spec channel stacks and output range") {
  Network d1 = udas::build_discriminator(DiscriminatorSpec::d1(), 6, 5);
  const auto& layers = d1.layers();
  REQUIRE(layers.size() == 5);
  const int expected[5] = {64, 64, 128, 128, 1};
  int c_in = 6;
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(layers[i].weight.dim(0) == expected[i]);
    CHECK(layers[i].weight.dim(1) == c_in);
    CHECK(layers[i].weight.dim(2) == 4);
    CHECK(layers[i].stride == 2);
    CHECK(layers[i].padding == 1);
    c_in = expected[i];
  }

  Tensor out = d1.forward(random_image(1, 6, 32, 32, 6));
  CHECK(out.shape() == std::vector<int>{1, 1, 32, 32});
  for (std::size_t i = 0; i < out.numel(); ++i) {
    CHECK(out[i] > 0.0);
    CHECK(out[i] < 1.0);
  }
}

TEST_CASE("discriminator: D2 is smaller than D1 at equal input channels") {
  Network d1 = udas::build_discriminator(DiscriminatorSpec::d1(), 6, 5);
  Network d2 = udas::build_discriminator(DiscriminatorSpec::d2(), 6, 5);
  const int d2_expected[5] = {48, 48, 96, 96, 1};
  for (std::size_t i = 0; i < 5; ++i)
    CHECK(d2.layers()[i].weight.dim(0) == d2_expected[i]);
  CHECK(d2.param_count() < d1.param_count());
}

TEST_CASE("discriminator: five stride-2 halvings reach 1x1 before the upsample") {
  DiscriminatorSpec spec = DiscriminatorSpec::d1();
  spec.upsample_to_input = false;
  Network d1 = udas::build_discriminator(spec, 6, 11);
  Tensor out = d1.forward(random_image(1, 6, 32, 32, 12));
  CHECK(out.shape() == std::vector<int>{1, 1, 1, 1});

  // matches repeated floor((s + 2 - 4) / 2) + 1
  int s = 32;
  for (int i = 0; i < 5; ++i) s = (s + 2 - 4) / 2 + 1;
  CHECK(s == 1);
}

TEST_CASE("discriminator: malformed specs are rejected") {
  DiscriminatorSpec bad;
  bad.channels = {64, 64, 1};
  CHECK_THROWS_AS(udas::build_discriminator(bad, 6, 0), std::invalid_argument);
  DiscriminatorSpec bad_last = DiscriminatorSpec::d1();
  bad_last.channels.back() = 2;
  CHECK_THROWS_AS(udas::build_discriminator(bad_last, 6, 0), std::invalid_argument);
}

TEST_CASE("forward: zero-initialized final layer gives sigmoid exactly 0.5") {
  Network d1 = udas::build_discriminator(DiscriminatorSpec::d1(), 6, 3);
  auto& last = d1.layers().back();
  for (std::size_t i = 0; i < last.weight.numel(); ++i) last.weight[i] = 0.0;
  last.bias[0] = 0.0;
  Tensor out = d1.forward(random_image(1, 6, 32, 32, 4));
  for (std::size_t i = 0; i < out.numel(); ++i) CHECK(out[i] == 0.5);
}

TEST_CASE("forward: generator probabilities form a valid probability map") {
  Network g = udas::build_generator(6, 8, 21);
  Tensor probs = udas::softmax_channel(g.forward(random_image(1, 3, 16, 16, 22)));
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      double sum = 0.0;
      for (int c = 0; c < 6; ++c) sum += probs[probs.offset(0, c, y, x)];
      CHECK(std::abs(sum - 1.0) < 1e-9);
    }
}

TEST_CASE("forward: run-to-run determinism for a fixed seed and input") {
  Tensor input = random_image(2, 3, 16, 16, 77);
  Network a = udas::build_generator(6, 8, 33);
  Network b = udas::build_generator(6, 8, 33);
  CHECK(bit_identical(a.forward(input), b.forward(input)));
}

TEST_CASE("forward: channel mismatch is rejected") {
  Network g = udas::build_generator(6, 8, 1);
  CHECK_THROWS_AS(g.forward(random_image(1, 4, 16, 16, 2)), std::invalid_argument);
}

TEST_CASE("nets: gradients reach every generator parameter through each loss") {
  using namespace udas;
  for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull, 5ull}) {
    Network g = build_generator(4, 4, seed);
    Network d1 = build_discriminator(DiscriminatorSpec::d1(), 4, seed + 50);
    Network d2 = build_discriminator(DiscriminatorSpec::d2(), 4, seed + 90);
    Tensor source = random_image(1, 3, 32, 32, seed + 100);
    Tensor target = random_image(1, 3, 32, 32, seed + 200);
    LabelMap labels(1, 32, 32);
    Rng lrng(seed + 300);
    for (int& v : labels.values) v = lrng.uniform_int(0, 3);

    auto check_all_params_touched = [&](const std::function<Tensor()>& loss_fn) {
      g.zero_grads();
      GradientTape tape;
      GradientTape::Scope scope(tape);
      g.watch_params(tape);
      tape.backward(loss_fn());
      for (Tensor& p : g.params()) {
        bool any = false;
        for (std::size_t i = 0; i < p.numel(); ++i) any = any || p.grad()[i] != 0.0;
        CHECK(any);
      }
    };

    check_all_params_touched(
        [&] { return supervised_ce(softmax_channel(g.forward(source)), labels); });
    check_all_params_touched(
        [&] { return g_adv1(d1.forward(softmax_channel(g.forward(source)))); });
    check_all_params_touched(
        [&] { return g_adv2(d2.forward(softmax_channel(g.forward(target)))); });
    check_all_params_touched([&] {
      Tensor probs = softmax_channel(g.forward(target));
      Tensor pseudo = one_hot(argmax_channel(probs.detached()), 4);
      Tensor mask({1, 32, 32}, 1.0);
      return self_training_loss(probs, pseudo, mask, {1.0, 1.0, 1.0, 1.0});
    });
  }
}

TEST_CASE("checkpoint: save/load round-trips names, shapes and bits") {
  namespace fs = std::filesystem;
  const std::string path = fs::temp_directory_path() / "udas_test_ckpt.udas";
  Network g = udas::build_generator(6, 8, 5);
  Network d1 = udas::build_discriminator(DiscriminatorSpec::d1(), 6, 6);

  std::vector<std::pair<std::string, Tensor>> entries;
  for (auto& [name, t] : g.named_params()) entries.emplace_back("G." + name, t);
  for (auto& [name, t] : d1.named_params()) entries.emplace_back("D1." + name, t);
  udas::save_checkpoint(path, entries);

  const auto loaded = udas::load_checkpoint(path);
  REQUIRE(loaded.size() == entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    CHECK(loaded[i].first == entries[i].first);
    CHECK(bit_identical(loaded[i].second, entries[i].second));
  }

  // loading into a differently-seeded network reproduces the original forward
  Network g2 = udas::build_generator(6, 8, 999);
  udas::load_into_network(loaded, "G.", g2);
  Tensor input = random_image(1, 3, 16, 16, 8);
  CHECK(bit_identical(g.forward(input), g2.forward(input)));

  // missing prefix is an error
  Network d2 = udas::build_discriminator(DiscriminatorSpec::d2(), 6, 7);
  CHECK_THROWS_AS(udas::load_into_network(loaded, "D2.", d2), std::runtime_error);
  fs::remove(path);
}

TEST_CASE("checkpoint: corrupted files are rejected") {
  namespace fs = std::filesystem;
  const std::string path = fs::temp_directory_path() / "udas_bad_ckpt.udas";
  {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    std::fputs("NOPE", f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(udas::load_checkpoint(path), std::runtime_error);
  CHECK_THROWS_AS(udas::load_checkpoint("/nonexistent/x.udas"), std::runtime_error);
  fs::remove(path);
}
