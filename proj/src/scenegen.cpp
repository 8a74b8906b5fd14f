// Copyright (c) 2026 the udas authors
// SPDX-License-Identifier: Apache-2.0
#include "udas/scenegen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "udas/rng.hpp"

namespace udas {

namespace {

constexpr double kPi = 3.14159265358979323846;

// background, road_band, building_block, circle_object, pole_stripe, rare_blob
const double kPalette[6][3] = {
    {0.32, 0.38, 0.30}, {0.38, 0.40, 0.48}, {0.55, 0.32, 0.26},
    {0.80, 0.68, 0.22}, {0.72, 0.72, 0.75}, {0.65, 0.22, 0.60},
};

// per-class texture: wavelength in pixels, direction (dx, dy), amplitude
struct TextureSpec {
  double wavelength, dx, dy, amplitude;
};
const TextureSpec kTexture[6] = {
    {23.0, 0.7, 0.7, 0.030}, {7.0, 0.0, 1.0, 0.045}, {5.0, 1.0, 0.0, 0.045},
    {9.0, 1.0, 0.4, 0.035},  {4.0, 0.0, 1.0, 0.000}, {6.0, 0.6, 1.0, 0.040},
};

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) { return Rng::mix(a, b); }

// Rotation of an RGB color about the gray axis (Rodrigues form).
void rotate_palette(double angle_deg, const double in[3], double out[3]) {
  const double theta = angle_deg * kPi / 180.0;
  const double c = std::cos(theta), s = std::sin(theta);
  const double inv3 = 1.0 / 3.0;
  const double dot = (in[0] + in[1] + in[2]) * inv3;
  const double ux = 1.0 / std::sqrt(3.0);
  // u x v with u = (1,1,1)/sqrt(3)
  const double cx = ux * (in[2] - in[1]);
  const double cy = ux * (in[0] - in[2]);
  const double cz = ux * (in[1] - in[0]);
  out[0] = in[0] * c + cx * s + dot * (1.0 - c);
  out[1] = in[1] * c + cy * s + dot * (1.0 - c);
  out[2] = in[2] * c + cz * s + dot * (1.0 - c);
}

void render_geometry(Rng& rng, const SceneConfig& cfg, LabelMap& labels) {
  const int h = cfg.height, w = cfg.width;
  auto fill_rect = [&](int x0, int y0, int x1, int y1, int cls) {
    x0 = std::max(0, x0);
    y0 = std::max(0, y0);
    x1 = std::min(w, x1);
    y1 = std::min(h, y1);
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x) labels.at(0, y, x) = cls;
  };
  auto fill_ellipse = [&](double cx, double cy, double rx, double ry, int cls) {
    const int y0 = std::max(0, static_cast<int>(cy - ry) - 1);
    const int y1 = std::min(h, static_cast<int>(cy + ry) + 2);
    const int x0 = std::max(0, static_cast<int>(cx - rx) - 1);
    const int x1 = std::min(w, static_cast<int>(cx + rx) + 2);
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x) {
        const double dx = (x + 0.5 - cx) / rx, dy = (y + 0.5 - cy) / ry;
        if (dx * dx + dy * dy <= 1.0) labels.at(0, y, x) = cls;
      }
  };

  // road band (class 1)
  if (cfg.num_classes > 1) {
    const int band_h = static_cast<int>(h * rng.uniform(0.20, 0.30));
    const int y0 = static_cast<int>(h * rng.uniform(0.55, 0.75));
    fill_rect(0, y0, w, y0 + band_h, 1);
  }
  // building blocks (class 2)
  if (cfg.num_classes > 2) {
    const int count = rng.uniform_int(1, 3);
    for (int i = 0; i < count; ++i) {
      const int bw = static_cast<int>(w * rng.uniform(0.14, 0.30));
      const int x0 = rng.uniform_int(0, std::max(0, w - bw));
      const int y0 = static_cast<int>(h * rng.uniform(0.05, 0.25));
      const int bh = static_cast<int>(h * rng.uniform(0.20, 0.42));
      fill_rect(x0, y0, x0 + bw, y0 + bh, 2);
    }
  }
  // circle objects (class 3)
  if (cfg.num_classes > 3) {
    const int count = rng.uniform_int(1, 3);
    for (int i = 0; i < count; ++i) {
      const double r = h * rng.uniform(0.06, 0.11);
      const double cx = rng.uniform(0.1, 0.9) * w;
      const double cy = rng.uniform(0.1, 0.9) * h;
      fill_ellipse(cx, cy, r, r, 3);
    }
  }
  // pole stripes (class 4)
  if (cfg.num_classes > 4) {
    const int count = rng.uniform_int(2, 5);
    for (int i = 0; i < count; ++i) {
      const int pw = rng.uniform_int(1, 2);
      const int x0 = rng.uniform_int(0, std::max(0, w - pw));
      const int y0 = static_cast<int>(h * rng.uniform(0.10, 0.30));
      const int y1 = static_cast<int>(h * rng.uniform(0.75, 0.95));
      fill_rect(x0, y0, x0 + pw, y1, 4);
    }
  }
  // rare blob (class 5), present in roughly one scene out of ten
  if (cfg.num_classes > 5 && rng.uniform() < 0.10) {
    const double rx = h * rng.uniform(0.05, 0.09);
    const double ry = h * rng.uniform(0.05, 0.09);
    const double cx = rng.uniform(0.15, 0.85) * w;
    const double cy = rng.uniform(0.15, 0.85) * h;
    fill_ellipse(cx, cy, rx, ry, 5);
  }
}

}  // namespace

SceneConfig::SceneConfig()
    : frequency_targets{0.5896, 0.2153, 0.0994, 0.0430, 0.0514, 0.0013} {}

const std::vector<std::string>& scene_class_names() {
  static const std::vector<std::string> names = {
      "background",    "road_band",   "building_block",
      "circle_object", "pole_stripe", "rare_blob"};
  return names;
}

Scene generate_scene(std::uint64_t seed, const SceneConfig& cfg, Domain domain) {
  if (cfg.num_classes < 2 || cfg.num_classes > 6)
    throw std::invalid_argument("generate_scene: num_classes must lie in [2,6]");
  if (cfg.height < 8 || cfg.width < 8 || cfg.height % 2 || cfg.width % 2)
    throw std::invalid_argument("generate_scene: image size must be even and >= 8");

  const std::uint64_t base = mix_seed(cfg.data_seed, seed);
  Rng geom_rng = Rng::derive(base, 1);
  Rng light_rng = Rng::derive(base, 2);
  Rng phase_rng = Rng::derive(base, 3);
  Rng pixel_rng = Rng::derive(base, 4);
  Rng field_rng = Rng::derive(base, 5);

  Scene scene;
  scene.labels = LabelMap(1, cfg.height, cfg.width, 0);
  render_geometry(geom_rng, cfg, scene.labels);

  const bool shifted = domain == Domain::Target;

  double palette[6][3];
  for (int c = 0; c < 6; ++c) {
    if (shifted && cfg.palette_angle_deg != 0.0)
      rotate_palette(cfg.palette_angle_deg, kPalette[c], palette[c]);
    else
      std::copy(kPalette[c], kPalette[c] + 3, palette[c]);
  }

  const double lighting = 1.0 + 0.10 * (2.0 * light_rng.uniform() - 1.0);
  double phases[6];
  for (double& p : phases) p = phase_rng.uniform(0.0, 2.0 * kPi);
  const double freq_mul = shifted ? cfg.texture_shift : 1.0;

  // low-frequency correlated field on a coarse grid, bilinearly interpolated
  constexpr int kGrid = 9;
  double field[kGrid][kGrid];
  for (auto& row : field)
    for (double& v : row) v = field_rng.normal();
  const bool use_field = shifted && cfg.noise_amplitude != 0.0;

  scene.image = Tensor({1, 3, cfg.height, cfg.width});
  double* img = scene.image.data();
  const std::size_t plane = static_cast<std::size_t>(cfg.height) * cfg.width;

  for (int y = 0; y < cfg.height; ++y) {
    for (int x = 0; x < cfg.width; ++x) {
      const int cls = scene.labels.at(0, y, x);
      const TextureSpec& tex = kTexture[cls];
      double t = 0.0;
      if (tex.amplitude != 0.0) {
        const double arg =
            2.0 * kPi * freq_mul * (tex.dx * x + tex.dy * y) / tex.wavelength +
            phases[cls];
        t = tex.amplitude * std::sin(arg);
      }
      double blotch = 0.0;
      if (use_field) {
        const double gy = static_cast<double>(y) / (cfg.height - 1) * (kGrid - 1);
        const double gx = static_cast<double>(x) / (cfg.width - 1) * (kGrid - 1);
        const int iy = std::min(static_cast<int>(gy), kGrid - 2);
        const int ix = std::min(static_cast<int>(gx), kGrid - 2);
        const double fy = gy - iy, fx = gx - ix;
        blotch = cfg.noise_amplitude *
                 ((field[iy][ix] * (1 - fx) + field[iy][ix + 1] * fx) * (1 - fy) +
                  (field[iy + 1][ix] * (1 - fx) + field[iy + 1][ix + 1] * fx) * fy);
      }
      for (int ch = 0; ch < 3; ++ch) {
        double v = palette[cls][ch] * lighting + t + blotch +
                   0.02 * pixel_rng.normal();
        v = std::clamp(v, 0.0, 1.0);
        if (shifted && cfg.gamma != 1.0) v = std::pow(v, cfg.gamma);
        img[ch * plane + y * static_cast<std::size_t>(cfg.width) + x] = v;
      }
    }
  }
  return scene;
}

std::pair<std::uint64_t, std::uint64_t> split_seed_range(Domain domain, Split split) {
  const std::uint64_t block = 1ull << 40;
  std::uint64_t index = (domain == Domain::Source ? 0 : 3) + static_cast<std::uint64_t>(split);
  const std::uint64_t lo = (index + 1) * block;
  return {lo, lo + (1ull << 32)};
}

std::string split_name(Domain domain, Split split) {
  std::string name = domain == Domain::Source ? "source_" : "target_";
  switch (split) {
    case Split::Train: return name + "train";
    case Split::Val: return name + "val";
    case Split::Test: return name + "test";
  }
  return name;
}

BatchIterator::BatchIterator(SceneConfig cfg, Domain domain, Split split,
                             int batch_size, std::uint64_t epoch_seed)
    : cfg_(std::move(cfg)), domain_(domain), split_(split), batch_size_(batch_size) {
  if (batch_size < 1) throw std::invalid_argument("BatchIterator: batch_size must be >= 1");
  const auto [lo, hi] = split_seed_range(domain, split);
  range_lo_ = lo;
  range_size_ = hi - lo;
  // train streams start at a seed-derived point; val/test always at the start
  offset_ = split == Split::Train ? mix_seed(epoch_seed, 0xb47c5) % range_size_ : 0;
}

SegmentationBatch BatchIterator::next() {
  SegmentationBatch batch;
  batch.domain = domain_;
  batch.images = Tensor({batch_size_, 3, cfg_.height, cfg_.width});
  const bool with_labels = domain_ == Domain::Source;
  if (with_labels) batch.labels = LabelMap(batch_size_, cfg_.height, cfg_.width);
  const std::size_t image_sz = 3 * static_cast<std::size_t>(cfg_.height) * cfg_.width;
  const std::size_t label_sz = static_cast<std::size_t>(cfg_.height) * cfg_.width;
  for (int i = 0; i < batch_size_; ++i) {
    const std::uint64_t seed = range_lo_ + (offset_ + index_) % range_size_;
    ++index_;
    batch.sample_seeds.push_back(seed);
    Scene scene = generate_scene(seed, cfg_, domain_);
    std::copy(scene.image.data(), scene.image.data() + image_sz,
              batch.images.data() + i * image_sz);
    if (with_labels)
      std::copy(scene.labels.values.begin(), scene.labels.values.end(),
                batch.labels->values.begin() + i * label_sz);
  }
  return batch;
}

std::vector<Scene> make_eval_set(const SceneConfig& cfg, Domain domain, Split split,
                                 int count) {
  const auto [lo, hi] = split_seed_range(domain, split);
  (void)hi;
  std::vector<Scene> scenes;
  scenes.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i)
    scenes.push_back(generate_scene(lo + static_cast<std::uint64_t>(i), cfg, domain));
  return scenes;
}

void write_ppm(const std::string& path, const Tensor& image) {
  if (image.ndim() != 4 || image.dim(0) != 1 || image.dim(1) != 3)
    throw std::invalid_argument("write_ppm: expects a 1 x 3 x H x W image");
  const int h = image.dim(2), w = image.dim(3);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("write_ppm: cannot open " + path);
  os << "P6\n" << w << " " << h << "\n255\n";
  const double* p = image.data();
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (std::size_t i = 0; i < plane; ++i) {
    for (int ch = 0; ch < 3; ++ch) {
      const double v = std::clamp(p[ch * plane + i], 0.0, 1.0);
      os.put(static_cast<char>(static_cast<int>(v * 255.0 + 0.5)));
    }
  }
  if (!os) throw std::runtime_error("write_ppm: write failed for " + path);
}

void write_pgm(const std::string& path, const LabelMap& labels) {
  if (labels.batch != 1) throw std::invalid_argument("write_pgm: expects a single map");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("write_pgm: cannot open " + path);
  os << "P5\n" << labels.width << " " << labels.height << "\n255\n";
  for (int v : labels.values) os.put(static_cast<char>(v));
  if (!os) throw std::runtime_error("write_pgm: write failed for " + path);
}

void dump_split(const SceneConfig& cfg, Domain domain, Split split, int count,
                const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const std::string name = split_name(domain, split);
  const auto scenes = make_eval_set(cfg, domain, split, count);
  for (int i = 0; i < count; ++i) {
    const std::string stem = out_dir + "/" + name + "_" + std::to_string(i);
    write_ppm(stem + ".ppm", scenes[static_cast<std::size_t>(i)].image);
    write_pgm(stem + ".pgm", scenes[static_cast<std::size_t>(i)].labels);
  }
}

}  // namespace udas
