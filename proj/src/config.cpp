// Copyright (c) 2026 the udas authors
// SPDX-License-Identifier: Apache-2.0
#include "udas/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace udas {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || s.empty())
    throw std::invalid_argument("not a number: '" + s + "'");
  return v;
}

long long parse_int(const std::string& s) {
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size() || s.empty())
    throw std::invalid_argument("not an integer: '" + s + "'");
  return v;
}

std::uint64_t parse_u64(const std::string& s) {
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size() || s.empty())
    throw std::invalid_argument("not an unsigned integer: '" + s + "'");
  return v;
}

bool parse_bool(const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw std::invalid_argument("not a bool (true/false): '" + s + "'");
}

struct KeyDef {
  const char* key;
  const char* description;
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const std::string&)> set;
};

const std::vector<KeyDef>& schema() {
  static const std::vector<KeyDef> defs = {
      {"data.image_size", "square image side in pixels (even, >= 32)",
       [](const TrainConfig& c) { return std::to_string(c.scene.height); },
       [](TrainConfig& c, const std::string& v) {
         c.scene.height = c.scene.width = static_cast<int>(parse_int(v));
       }},
      {"data.num_classes", "number of semantic classes (2..6)",
       [](const TrainConfig& c) { return std::to_string(c.scene.num_classes); },
       [](TrainConfig& c, const std::string& v) {
         c.scene.num_classes = static_cast<int>(parse_int(v));
       }},
      {"data.seed", "scene appearance/geometry seed",
       [](const TrainConfig& c) { return std::to_string(c.scene.data_seed); },
       [](TrainConfig& c, const std::string& v) { c.scene.data_seed = parse_u64(v); }},
      {"data.palette_angle", "target palette rotation angle in degrees",
       [](const TrainConfig& c) { return fmt_double(c.scene.palette_angle_deg); },
       [](TrainConfig& c, const std::string& v) { c.scene.palette_angle_deg = parse_double(v); }},
      {"data.gamma", "target gamma curve exponent",
       [](const TrainConfig& c) { return fmt_double(c.scene.gamma); },
       [](TrainConfig& c, const std::string& v) { c.scene.gamma = parse_double(v); }},
      {"data.noise_amp", "target correlated-noise amplitude",
       [](const TrainConfig& c) { return fmt_double(c.scene.noise_amplitude); },
       [](TrainConfig& c, const std::string& v) { c.scene.noise_amplitude = parse_double(v); }},
      {"data.texture_shift", "target texture frequency multiplier",
       [](const TrainConfig& c) { return fmt_double(c.scene.texture_shift); },
       [](TrainConfig& c, const std::string& v) { c.scene.texture_shift = parse_double(v); }},
      {"model.base_width", "generator channel width of the first stage",
       [](const TrainConfig& c) { return std::to_string(c.base_width); },
       [](TrainConfig& c, const std::string& v) { c.base_width = static_cast<int>(parse_int(v)); }},
      {"train.iterations", "number of training steps",
       [](const TrainConfig& c) { return std::to_string(c.iterations); },
       [](TrainConfig& c, const std::string& v) { c.iterations = static_cast<int>(parse_int(v)); }},
      {"train.batch_size", "images per domain per step",
       [](const TrainConfig& c) { return std::to_string(c.batch_size); },
       [](TrainConfig& c, const std::string& v) { c.batch_size = static_cast<int>(parse_int(v)); }},
      {"train.seed", "initialization and batch-stream seed",
       [](const TrainConfig& c) { return std::to_string(c.seed); },
       [](TrainConfig& c, const std::string& v) { c.seed = parse_u64(v); }},
      {"train.eval_interval", "iterations between validation evaluations",
       [](const TrainConfig& c) { return std::to_string(c.eval_interval); },
       [](TrainConfig& c, const std::string& v) { c.eval_interval = static_cast<int>(parse_int(v)); }},
      {"train.val_images", "validation set size (target domain)",
       [](const TrainConfig& c) { return std::to_string(c.val_images); },
       [](TrainConfig& c, const std::string& v) { c.val_images = static_cast<int>(parse_int(v)); }},
      {"train.test_images", "test set size (target domain)",
       [](const TrainConfig& c) { return std::to_string(c.test_images); },
       [](TrainConfig& c, const std::string& v) { c.test_images = static_cast<int>(parse_int(v)); }},
      {"loss.w1_s", "weight of the D1 adversarial term on source maps",
       [](const TrainConfig& c) { return fmt_double(c.weights.w1_s); },
       [](TrainConfig& c, const std::string& v) { c.weights.w1_s = parse_double(v); }},
      {"loss.w1_t", "weight of the D1 adversarial term on target maps",
       [](const TrainConfig& c) { return fmt_double(c.weights.w1_t); },
       [](TrainConfig& c, const std::string& v) { c.weights.w1_t = parse_double(v); }},
      {"loss.w2_t", "weight of the D2 adversarial term",
       [](const TrainConfig& c) { return fmt_double(c.weights.w2_t); },
       [](TrainConfig& c, const std::string& v) { c.weights.w2_t = parse_double(v); }},
      {"loss.w3", "weight of the self-training term",
       [](const TrainConfig& c) { return fmt_double(c.weights.w3); },
       [](TrainConfig& c, const std::string& v) { c.weights.w3 = parse_double(v); }},
      {"loss.eps", "floor added inside every log",
       [](const TrainConfig& c) { return fmt_double(c.loss_eps); },
       [](TrainConfig& c, const std::string& v) { c.loss_eps = parse_double(v); }},
      {"selftrain.f", "percentile for the adaptive thresholds, (0,100]",
       [](const TrainConfig& c) { return fmt_double(c.percentile_f); },
       [](TrainConfig& c, const std::string& v) { c.percentile_f = parse_double(v); }},
      {"selftrain.min_pixels", "minimum predicted pixels before a class updates",
       [](const TrainConfig& c) { return std::to_string(c.min_pixels); },
       [](TrainConfig& c, const std::string& v) { c.min_pixels = static_cast<int>(parse_int(v)); }},
      {"selftrain.threshold_mode", "adaptive | fixed | none",
       [](const TrainConfig& c) {
         switch (c.threshold_mode) {
           case ThresholdMode::Adaptive: return std::string("adaptive");
           case ThresholdMode::Fixed: return std::string("fixed");
           case ThresholdMode::None: return std::string("none");
         }
         return std::string("adaptive");
       },
       [](TrainConfig& c, const std::string& v) {
         if (v == "adaptive") c.threshold_mode = ThresholdMode::Adaptive;
         else if (v == "fixed") c.threshold_mode = ThresholdMode::Fixed;
         else if (v == "none") c.threshold_mode = ThresholdMode::None;
         else throw std::invalid_argument("threshold_mode must be adaptive|fixed|none");
       }},
      {"selftrain.fixed_value", "threshold used in fixed mode",
       [](const TrainConfig& c) { return fmt_double(c.fixed_threshold); },
       [](TrainConfig& c, const std::string& v) { c.fixed_threshold = parse_double(v); }},
      {"selftrain.init_threshold", "initial per-class threshold",
       [](const TrainConfig& c) { return fmt_double(c.init_threshold); },
       [](TrainConfig& c, const std::string& v) { c.init_threshold = parse_double(v); }},
      {"selftrain.class_weight_mode", "inverse | proportional source-frequency weights",
       [](const TrainConfig& c) { return std::string(c.inverse_class_weights ? "inverse" : "proportional"); },
       [](TrainConfig& c, const std::string& v) {
         if (v == "inverse") c.inverse_class_weights = true;
         else if (v == "proportional") c.inverse_class_weights = false;
         else throw std::invalid_argument("class_weight_mode must be inverse|proportional");
       }},
      {"selftrain.weight_images", "source images used to estimate class weights",
       [](const TrainConfig& c) { return std::to_string(c.weight_images); },
       [](TrainConfig& c, const std::string& v) { c.weight_images = static_cast<int>(parse_int(v)); }},
      {"opt.g.lr_base", "generator SGD base learning rate",
       [](const TrainConfig& c) { return fmt_double(c.g_lr.base); },
       [](TrainConfig& c, const std::string& v) { c.g_lr.base = parse_double(v); }},
      {"opt.g.lr_end", "generator SGD final learning rate",
       [](const TrainConfig& c) { return fmt_double(c.g_lr.end); },
       [](TrainConfig& c, const std::string& v) { c.g_lr.end = parse_double(v); }},
      {"opt.g.power", "generator polynomial decay power",
       [](const TrainConfig& c) { return fmt_double(c.g_lr.power); },
       [](TrainConfig& c, const std::string& v) { c.g_lr.power = parse_double(v); }},
      {"opt.g.momentum", "generator SGD momentum",
       [](const TrainConfig& c) { return fmt_double(c.g_momentum); },
       [](TrainConfig& c, const std::string& v) { c.g_momentum = parse_double(v); }},
      {"opt.g.weight_decay", "generator L2 weight decay",
       [](const TrainConfig& c) { return fmt_double(c.g_weight_decay); },
       [](TrainConfig& c, const std::string& v) { c.g_weight_decay = parse_double(v); }},
      {"opt.d1.lr_base", "D1 Adam base learning rate",
       [](const TrainConfig& c) { return fmt_double(c.d1_lr.base); },
       [](TrainConfig& c, const std::string& v) { c.d1_lr.base = parse_double(v); }},
      {"opt.d1.lr_end", "D1 Adam final learning rate",
       [](const TrainConfig& c) { return fmt_double(c.d1_lr.end); },
       [](TrainConfig& c, const std::string& v) { c.d1_lr.end = parse_double(v); }},
      {"opt.d1.power", "D1 polynomial decay power",
       [](const TrainConfig& c) { return fmt_double(c.d1_lr.power); },
       [](TrainConfig& c, const std::string& v) { c.d1_lr.power = parse_double(v); }},
      {"opt.d2.lr_base", "D2 Adam base learning rate",
       [](const TrainConfig& c) { return fmt_double(c.d2_lr.base); },
       [](TrainConfig& c, const std::string& v) { c.d2_lr.base = parse_double(v); }},
      {"opt.d2.lr_end", "D2 Adam final learning rate",
       [](const TrainConfig& c) { return fmt_double(c.d2_lr.end); },
       [](TrainConfig& c, const std::string& v) { c.d2_lr.end = parse_double(v); }},
      {"opt.d2.power", "D2 polynomial decay power",
       [](const TrainConfig& c) { return fmt_double(c.d2_lr.power); },
       [](TrainConfig& c, const std::string& v) { c.d2_lr.power = parse_double(v); }},
      {"opt.adam_beta1", "Adam beta1 (D1 and D2)",
       [](const TrainConfig& c) { return fmt_double(c.adam_beta1); },
       [](TrainConfig& c, const std::string& v) { c.adam_beta1 = parse_double(v); }},
      {"opt.adam_beta2", "Adam beta2 (D1 and D2)",
       [](const TrainConfig& c) { return fmt_double(c.adam_beta2); },
       [](TrainConfig& c, const std::string& v) { c.adam_beta2 = parse_double(v); }},
      {"opt.adam_eps", "Adam epsilon (D1 and D2)",
       [](const TrainConfig& c) { return fmt_double(c.adam_eps); },
       [](TrainConfig& c, const std::string& v) { c.adam_eps = parse_double(v); }},
      {"ablation.use_g1_s", "enable the D1 adversarial loss on source maps",
       [](const TrainConfig& c) { return std::string(c.use_g1_s ? "true" : "false"); },
       [](TrainConfig& c, const std::string& v) { c.use_g1_s = parse_bool(v); }},
      {"ablation.use_g1_t", "enable the D1 adversarial loss on target maps",
       [](const TrainConfig& c) { return std::string(c.use_g1_t ? "true" : "false"); },
       [](TrainConfig& c, const std::string& v) { c.use_g1_t = parse_bool(v); }},
      {"ablation.use_g2_t", "enable the D2 adversarial loss",
       [](const TrainConfig& c) { return std::string(c.use_g2 ? "true" : "false"); },
       [](TrainConfig& c, const std::string& v) { c.use_g2 = parse_bool(v); }},
      {"ablation.use_g3", "enable the self-training loss",
       [](const TrainConfig& c) { return std::string(c.use_g3 ? "true" : "false"); },
       [](TrainConfig& c, const std::string& v) { c.use_g3 = parse_bool(v); }},
  };
  return defs;
}

const KeyDef* find_key(const std::string& key) {
  for (const KeyDef& def : schema())
    if (key == def.key) return &def;
  return nullptr;
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

TrainConfig parse_config_text(const std::string& text) {
  TrainConfig cfg;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected `key = value`");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const KeyDef* def = find_key(key);
    if (!def)
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": unknown key '" + key + "'");
    try {
      def->set(cfg, value);
    } catch (const std::exception& e) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + " (" +
                                  key + "): " + e.what());
    }
  }
  return cfg;
}

TrainConfig parse_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config file " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_config_text(buf.str());
}

void apply_override(TrainConfig& cfg, const std::string& key_value) {
  const std::size_t eq = key_value.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("override must look like key=value: '" + key_value + "'");
  const std::string key = trim(key_value.substr(0, eq));
  const std::string value = trim(key_value.substr(eq + 1));
  const KeyDef* def = find_key(key);
  if (!def) throw std::invalid_argument("unknown config key '" + key + "'");
  def->set(cfg, value);
}

std::string serialize_config(const TrainConfig& cfg) {
  std::ostringstream os;
  for (const KeyDef& def : schema()) os << def.key << " = " << def.get(cfg) << "\n";
  return os.str();
}

std::uint64_t config_hash(const TrainConfig& cfg) {
  const std::string text = serialize_config(cfg);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

void finalize_config(TrainConfig& cfg) {
  if (cfg.scene.height < 32 || cfg.scene.height % 2 != 0)
    throw std::invalid_argument("data.image_size must be even and >= 32");
  if (cfg.scene.num_classes < 2 || cfg.scene.num_classes > 6)
    throw std::invalid_argument("data.num_classes must lie in [2,6]");
  if (cfg.iterations < 0) throw std::invalid_argument("train.iterations must be >= 0");
  if (cfg.batch_size < 1) throw std::invalid_argument("train.batch_size must be >= 1");
  if (cfg.eval_interval < 1) throw std::invalid_argument("train.eval_interval must be >= 1");
  if (cfg.val_images < 1 || cfg.test_images < 1)
    throw std::invalid_argument("validation/test set sizes must be >= 1");
  if (cfg.base_width < 4) throw std::invalid_argument("model.base_width must be >= 4");
  if (cfg.percentile_f <= 0.0 || cfg.percentile_f > 100.0)
    throw std::invalid_argument("selftrain.f must lie in (0,100]");
  if (cfg.min_pixels < 1) throw std::invalid_argument("selftrain.min_pixels must be >= 1");
  if (cfg.fixed_threshold < 0.0 || cfg.fixed_threshold > 1.0)
    throw std::invalid_argument("selftrain.fixed_value must lie in [0,1]");
  if (cfg.init_threshold < 0.0 || cfg.init_threshold > 1.0)
    throw std::invalid_argument("selftrain.init_threshold must lie in [0,1]");
  if (cfg.weight_images < 1) throw std::invalid_argument("selftrain.weight_images must be >= 1");
  if (cfg.loss_eps <= 0.0) throw std::invalid_argument("loss.eps must be > 0");
  if (cfg.weights.w1_s < 0 || cfg.weights.w1_t < 0 || cfg.weights.w2_t < 0 || cfg.weights.w3 < 0)
    throw std::invalid_argument("loss weights must be >= 0");
  const long long total = cfg.iterations > 0 ? cfg.iterations : 1;
  cfg.g_lr.total_steps = total;
  cfg.d1_lr.total_steps = total;
  cfg.d2_lr.total_steps = total;
}

std::string config_schema_help() {
  std::ostringstream os;
  TrainConfig defaults;
  for (const KeyDef& def : schema())
    os << def.key << " (default " << def.get(defaults) << ")\n    " << def.description
       << "\n";
  return os.str();
}

}  // namespace udas
