// Copyright (c) 2026 the udas authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "udas/scenegen.hpp"

using udas::Domain;
using udas::SceneConfig;
using udas::Split;

namespace {

bool bit_identical(const udas::Tensor& a, const udas::Tensor& b) {
  if (a.shape() != b.shape()) return false;
  for (std::size_t i = 0; i < a.numel(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

}  // namespace

TEST_CASE("generate_scene: shared geometry, shifted appearance") {
  SceneConfig cfg;
  for (std::uint64_t seed : {1ull, 7ull, 123ull}) {
    udas::Scene source = udas::generate_scene(seed, cfg, Domain::Source);
    udas::Scene target = udas::generate_scene(seed, cfg, Domain::Target);
    CHECK(source.labels.values == target.labels.values);
    CHECK(!bit_identical(source.image, target.image));
  }
}

TEST_CASE("generate_scene: zero shift parameters make the domains bit-identical") {
  SceneConfig cfg;
  cfg.palette_angle_deg = 0.0;
  cfg.gamma = 1.0;
  cfg.noise_amplitude = 0.0;
  cfg.texture_shift = 1.0;
  udas::Scene source = udas::generate_scene(5, cfg, Domain::Source);
  udas::Scene target = udas::generate_scene(5, cfg, Domain::Target);
  CHECK(bit_identical(source.image, target.image));
  CHECK(source.labels.values == target.labels.values);
}

TEST_CASE("generate_scene: fully deterministic per (seed, cfg, domain)") {
  SceneConfig cfg;
  udas::Scene a = udas::generate_scene(99, cfg, Domain::Target);
  udas::Scene b = udas::generate_scene(99, cfg, Domain::Target);
  CHECK(bit_identical(a.image, b.image));
  CHECK(a.labels.values == b.labels.values);
}

TEST_CASE("generate_scene: labels stay in range, pixels stay in [0,1]") {
  SceneConfig cfg;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (Domain d : {Domain::Source, Domain::Target}) {
      udas::Scene scene = udas::generate_scene(seed, cfg, d);
      for (int v : scene.labels.values) {
        CHECK(v >= 0);
        CHECK(v < cfg.num_classes);
      }
      for (std::size_t i = 0; i < scene.image.numel(); ++i) {
        CHECK(scene.image[i] >= 0.0);
        CHECK(scene.image[i] <= 1.0);
      }
    }
  }
}

TEST_CASE("census: empirical class frequencies track the configured targets") {
  SceneConfig cfg;
  REQUIRE(cfg.frequency_targets.size() == 6);
  double target_sum = 0.0;
  for (double t : cfg.frequency_targets) target_sum += t;
  CHECK(std::abs(target_sum - 1.0) < 1e-9);
  CHECK(cfg.frequency_targets[5] < 0.02);  // rare blob stays rare

  std::vector<long long> counts(6, 0);
  long long total = 0;
  int scenes_with_rare = 0;
  const int scenes = 1000;
  for (int i = 0; i < scenes; ++i) {
    udas::Scene scene = udas::generate_scene(static_cast<std::uint64_t>(i), cfg,
                                             Domain::Source);
    bool has_rare = false;
    for (int v : scene.labels.values) {
      ++counts[static_cast<std::size_t>(v)];
      ++total;
      has_rare = has_rare || v == 5;
    }
    scenes_with_rare += has_rare ? 1 : 0;
  }
  for (int c = 0; c < 6; ++c) {
    const double freq = static_cast<double>(counts[static_cast<std::size_t>(c)]) /
                        static_cast<double>(total);
    const double target = cfg.frequency_targets[static_cast<std::size_t>(c)];
    CHECK(std::abs(freq - target) / target < 0.30);
  }
  CHECK(scenes_with_rare < 150);  // present in < 15% of images
  CHECK(scenes_with_rare > 0);
}

TEST_CASE("domain shift: appearance-only, and statistically detectable") {
  SceneConfig cfg;
  const int n = 100;
  std::vector<double> source_means, target_means;
  for (int i = 0; i < n; ++i) {
    const auto s = udas::generate_scene(static_cast<std::uint64_t>(i), cfg, Domain::Source);
    const auto t = udas::generate_scene(static_cast<std::uint64_t>(i), cfg, Domain::Target);
    CHECK(s.labels.values == t.labels.values);  // shift never touches labels
    auto mean = [](const udas::Tensor& img) {
      double acc = 0.0;
      for (std::size_t k = 0; k < img.numel(); ++k) acc += img[k];
      return acc / static_cast<double>(img.numel());
    };
    source_means.push_back(mean(s.image));
    target_means.push_back(mean(t.image));
  }
  auto stats = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - m) * (x - m);
    var /= static_cast<double>(v.size() - 1);
    return std::pair{m, std::sqrt(var / static_cast<double>(v.size()))};
  };
  const auto [ms, se_s] = stats(source_means);
  const auto [mt, se_t] = stats(target_means);
  CHECK(std::abs(ms - mt) > 3.0 * std::max(se_s, se_t));
}

TEST_CASE("batch_iterator: identical epoch seeds give identical streams") {
  SceneConfig cfg;
  udas::BatchIterator a(cfg, Domain::Target, Split::Train, 2, 77);
  udas::BatchIterator b(cfg, Domain::Target, Split::Train, 2, 77);
  udas::BatchIterator c(cfg, Domain::Target, Split::Train, 2, 78);
  bool c_differs = false;
  for (int i = 0; i < 3; ++i) {
    auto batch_a = a.next();
    auto batch_b = b.next();
    auto batch_c = c.next();
    CHECK(batch_a.sample_seeds == batch_b.sample_seeds);
    CHECK(bit_identical(batch_a.images, batch_b.images));
    c_differs = c_differs || batch_a.sample_seeds != batch_c.sample_seeds;
  }
  CHECK(c_differs);
}

TEST_CASE("batch_iterator: labels only on source batches") {
  SceneConfig cfg;
  udas::BatchIterator source(cfg, Domain::Source, Split::Train, 1, 3);
  udas::BatchIterator target(cfg, Domain::Target, Split::Train, 1, 3);
  CHECK(source.next().labels.has_value());
  CHECK(!target.next().labels.has_value());
}

TEST_CASE("split seed ranges are pairwise disjoint") {
  std::vector<std::pair<std::uint64_t, std::uint64_t>> ranges;
  for (Domain d : {Domain::Source, Domain::Target})
    for (Split s : {Split::Train, Split::Val, Split::Test})
      ranges.push_back(udas::split_seed_range(d, s));
  for (std::size_t i = 0; i < ranges.size(); ++i)
    for (std::size_t j = i + 1; j < ranges.size(); ++j) {
      const bool disjoint =
          ranges[i].second <= ranges[j].first || ranges[j].second <= ranges[i].first;
      CHECK(disjoint);
    }
}

TEST_CASE("regenerated splits are byte-identical") {
  SceneConfig cfg;
  const auto a = udas::make_eval_set(cfg, Domain::Target, Split::Val, 4);
  const auto b = udas::make_eval_set(cfg, Domain::Target, Split::Val, 4);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(bit_identical(a[i].image, b[i].image));
    CHECK(a[i].labels.values == b[i].labels.values);
  }
}

TEST_CASE("dump_split: writes P6/P5 files with the expected headers") {
  namespace fs = std::filesystem;
  SceneConfig cfg;
  const std::string dir =
      (fs::temp_directory_path() / "udas_dump_test").string();
  fs::remove_all(dir);
  udas::dump_split(cfg, Domain::Target, Split::Val, 2, dir);

  for (int i = 0; i < 2; ++i) {
    const std::string stem = dir + "/target_val_" + std::to_string(i);
    std::ifstream ppm(stem + ".ppm", std::ios::binary);
    REQUIRE(ppm.good());
    std::string magic, dims;
    ppm >> magic;
    CHECK(magic == "P6");
    int w = 0, h = 0, maxval = 0;
    ppm >> w >> h >> maxval;
    CHECK(w == cfg.width);
    CHECK(h == cfg.height);
    CHECK(maxval == 255);

    std::ifstream pgm(stem + ".pgm", std::ios::binary);
    REQUIRE(pgm.good());
    pgm >> magic;
    CHECK(magic == "P5");
  }
  fs::remove_all(dir);
}

TEST_CASE("scene config: invalid sizes and class counts are rejected") {
  SceneConfig cfg;
  cfg.height = 7;
  CHECK_THROWS_AS(udas::generate_scene(1, cfg, Domain::Source), std::invalid_argument);
  cfg = SceneConfig{};
  cfg.num_classes = 7;
  CHECK_THROWS_AS(udas::generate_scene(1, cfg, Domain::Source), std::invalid_argument);
}
