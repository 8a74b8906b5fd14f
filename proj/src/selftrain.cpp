// Copyright (c) 2026 the udas authors
// SPDX-License-Identifier: Apache-2.0
#include "udas/selftrain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace udas {

ThresholdState::ThresholdState(int num_classes, double percentile_f, double initial,
                               int min_pixels)
    : thresholds_(static_cast<std::size_t>(num_classes), initial),
      last_update_step_(static_cast<std::size_t>(num_classes), -1),
      change_count_(static_cast<std::size_t>(num_classes), 0),
      history_(static_cast<std::size_t>(num_classes)),
      f_(percentile_f),
      min_pixels_(min_pixels) {
  if (num_classes < 2)
    throw std::invalid_argument("ThresholdState: num_classes must be >= 2");
  if (percentile_f <= 0.0 || percentile_f > 100.0)
    throw std::invalid_argument("ThresholdState: percentile must lie in (0,100]");
  if (initial < 0.0 || initial > 1.0)
    throw std::invalid_argument("ThresholdState: initial threshold must lie in [0,1]");
}

void ThresholdState::set_threshold(int cls, double value) {
  if (value < 0.0 || value > 1.0)
    throw std::invalid_argument("ThresholdState: threshold must lie in [0,1]");
  if (thresholds_[static_cast<std::size_t>(cls)] != value)
    ++change_count_[static_cast<std::size_t>(cls)];
  thresholds_[static_cast<std::size_t>(cls)] = value;
}

void ThresholdState::record_step(long long step) {
  for (std::size_t c = 0; c < thresholds_.size(); ++c)
    history_[c].push_back({step, thresholds_[c]});
}

ClassWeights class_weights_from_source(const std::vector<LabelMap>& label_maps,
                                       int num_classes, bool inverse) {
  if (num_classes < 2)
    throw std::invalid_argument("class_weights_from_source: num_classes must be >= 2");
  std::vector<double> counts(static_cast<std::size_t>(num_classes), 0.0);
  double total = 0.0;
  for (const LabelMap& map : label_maps) {
    for (int v : map.values) {
      if (v < 0 || v >= num_classes) continue;  // ignore-index pixels
      counts[static_cast<std::size_t>(v)] += 1.0;
      total += 1.0;
    }
  }
  if (total == 0.0)
    throw std::invalid_argument("class_weights_from_source: no labeled pixels");

  ClassWeights out;
  out.source_frequencies.resize(static_cast<std::size_t>(num_classes));
  for (int c = 0; c < num_classes; ++c)
    out.source_frequencies[static_cast<std::size_t>(c)] =
        counts[static_cast<std::size_t>(c)] / total;

  constexpr double kFreqFloor = 1e-6;
  std::vector<double> raw(static_cast<std::size_t>(num_classes));
  for (int c = 0; c < num_classes; ++c) {
    const double f = std::max(out.source_frequencies[static_cast<std::size_t>(c)], kFreqFloor);
    raw[static_cast<std::size_t>(c)] = inverse ? 1.0 / f : f;
  }

  // clamp to 10x the median before normalizing to mean 1
  std::vector<double> sorted = raw;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  const double cap = 10.0 * median;
  double sum = 0.0;
  for (double& v : raw) {
    v = std::min(v, cap);
    sum += v;
  }
  const double scale = static_cast<double>(num_classes) / sum;
  out.weights.resize(raw.size());
  for (std::size_t c = 0; c < raw.size(); ++c) out.weights[c] = raw[c] * scale;
  return out;
}

double percentile(std::vector<double> values, double f) {
  if (values.empty()) throw std::invalid_argument("percentile: empty input");
  if (f <= 0.0 || f > 100.0)
    throw std::invalid_argument("percentile: f must lie in (0,100]");
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  std::size_t rank = static_cast<std::size_t>(std::ceil(f / 100.0 * n));
  if (rank == 0) rank = 1;
  return values[rank - 1];
}

std::vector<int> update_thresholds(const Tensor& d1_conf, const LabelMap& pred_labels,
                                   ThresholdState& state, long long step) {
  if (d1_conf.ndim() != 4 || d1_conf.dim(1) != 1)
    throw std::invalid_argument("update_thresholds: d1_conf must be N x 1 x H x W");
  const int nb = d1_conf.dim(0), h = d1_conf.dim(2), w = d1_conf.dim(3);
  if (pred_labels.batch != nb || pred_labels.height != h || pred_labels.width != w)
    throw std::invalid_argument("update_thresholds: label map does not match d1_conf");

  const int num_classes = state.num_classes();
  std::vector<std::vector<double>> per_class(static_cast<std::size_t>(num_classes));
  const double* conf = d1_conf.data();
  for (std::size_t i = 0; i < pred_labels.numel(); ++i) {
    const int cls = pred_labels.values[i];
    if (cls < 0 || cls >= num_classes) continue;
    per_class[static_cast<std::size_t>(cls)].push_back(conf[i]);
  }

  std::vector<int> updated;
  for (int c = 0; c < num_classes; ++c) {
    auto& vals = per_class[static_cast<std::size_t>(c)];
    if (static_cast<int>(vals.size()) < state.min_pixels()) continue;
    state.set_threshold(c, percentile(std::move(vals), state.percentile_f()));
    state.last_update_step_[static_cast<std::size_t>(c)] = step;
    updated.push_back(c);
  }
  state.record_step(step);
  return updated;
}

PseudoLabelPack build_mask(const Tensor& d1_conf, const Tensor& probs,
                           const ThresholdState& state) {
  if (d1_conf.ndim() != 4 || d1_conf.dim(1) != 1)
    throw std::invalid_argument("build_mask: d1_conf must be N x 1 x H x W");
  if (probs.ndim() != 4)
    throw std::invalid_argument("build_mask: probs must be N x C x H x W");
  const int nb = probs.dim(0), c = probs.dim(1), h = probs.dim(2), w = probs.dim(3);
  if (d1_conf.dim(0) != nb || d1_conf.dim(2) != h || d1_conf.dim(3) != w)
    throw std::invalid_argument("build_mask: d1_conf does not match probs");
  if (state.num_classes() != c)
    throw std::invalid_argument("build_mask: state class count does not match probs");

  PseudoLabelPack pack;
  const LabelMap pred = argmax_channel(probs);
  pack.pseudo = one_hot(pred, c);
  pack.mask = Tensor({nb, h, w}, 0.0);
  pack.selected_per_class.assign(static_cast<std::size_t>(c), 0);

  const double* conf = d1_conf.data();
  double* mask = pack.mask.data();
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    const int cls = pred.values[i];
    if (conf[i] > state.threshold(cls)) {
      mask[i] = 1.0;
      ++pack.selected_per_class[static_cast<std::size_t>(cls)];
      ++pack.selected_total;
    }
  }
  return pack;
}

void export_threshold_trace(const ThresholdState& state, const std::string& path,
                            const std::vector<std::string>& class_names) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("export_threshold_trace: cannot open " + path);
  os << "step,class_id,class_name,threshold,running_mean\n";
  char buf[64];
  const auto& history = state.history();
  const std::size_t steps = history.empty() ? 0 : history.front().size();
  std::vector<double> prefix(history.size(), 0.0);
  for (std::size_t s = 0; s < steps; ++s) {
    for (std::size_t c = 0; c < history.size(); ++c) {
      const auto& entry = history[c][s];
      prefix[c] += entry.value;
      const double running = prefix[c] / static_cast<double>(s + 1);
      std::string name = c < class_names.size() ? class_names[c]
                                                : "class" + std::to_string(c);
      os << entry.step << ',' << c << ',' << name << ',';
      std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", entry.value, running);
      os << buf;
    }
  }
  if (!os) throw std::runtime_error("export_threshold_trace: write failed for " + path);
}

}  // namespace udas
