// Copyright (c) 2026 the udas authors
// SPDX-License-Identifier: Apache-2.0
#include "udas/losses.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace udas {

namespace {

void require_rank4(const Tensor& t, const char* op) {
  if (t.ndim() != 4) throw std::invalid_argument(std::string(op) + ": expects a rank-4 map");
}

// mean over all elements of -log(x + eps)
double neg_log_mean(const Tensor& t, double eps) {
  const double* p = t.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < t.numel(); ++i) acc += -std::log(p[i] + eps);
  return acc / static_cast<double>(t.numel());
}

// mean over all elements of -log(1 - x + eps)
double neg_log_one_minus_mean(const Tensor& t, double eps) {
  const double* p = t.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < t.numel(); ++i) acc += -std::log(1.0 - p[i] + eps);
  return acc / static_cast<double>(t.numel());
}

}  // namespace

Tensor supervised_ce(const Tensor& probs, const LabelMap& labels, int ignore_index,
                     double eps) {
  require_rank4(probs, "supervised_ce");
  const int nb = probs.dim(0), c = probs.dim(1), h = probs.dim(2), w = probs.dim(3);
  if (labels.batch != nb || labels.height != h || labels.width != w)
    throw std::invalid_argument("supervised_ce: label map does not match probs shape");
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const double* p = probs.data();
  double acc = 0.0;
  std::size_t count = 0;
  for (int n = 0; n < nb; ++n) {
    const std::size_t base = static_cast<std::size_t>(n) * c * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      const int label = labels.values[n * plane + i];
      if (label == ignore_index) continue;
      if (label < 0 || label >= c)
        throw std::invalid_argument("supervised_ce: label " + std::to_string(label) +
                                    " outside [0," + std::to_string(c) + ")");
      acc += -std::log(p[base + label * plane + i] + eps);
      ++count;
    }
  }
  Tensor out = Tensor::scalar(count ? acc / static_cast<double>(count) : 0.0);
  if (count == 0) return out;

  GradientTape* tape = GradientTape::active();
  if (tape) {
    const int parent = tape->node_of(probs);
    if (parent >= 0) {
      auto p_store = probs.storage();
      auto label_values = labels.values;
      const double inv = 1.0 / static_cast<double>(count);
      tape->record(out, {parent}, [=](const double* go, double* const* pg) {
        double* gp = pg[0];
        if (!gp) return;
        const double* pr = p_store->data();
        for (int n = 0; n < nb; ++n) {
          const std::size_t base = static_cast<std::size_t>(n) * c * plane;
          for (std::size_t i = 0; i < plane; ++i) {
            const int label = label_values[n * plane + i];
            if (label == ignore_index) continue;
            const std::size_t at = base + label * plane + i;
            gp[at] += go[0] * (-inv / (pr[at] + eps));
          }
        }
      });
    }
  }
  return out;
}

namespace {

// Shared body of the two discriminator objectives: mean -log(1 - neg + eps)
// plus mean -log(pos + eps), each over its own map.
Tensor binary_map_loss(const Tensor& neg_map, const Tensor& pos_map, double eps,
                       const char* op) {
  require_rank4(neg_map, op);
  require_rank4(pos_map, op);
  const double value = neg_log_one_minus_mean(neg_map, eps) + neg_log_mean(pos_map, eps);
  Tensor out = Tensor::scalar(value);

  GradientTape* tape = GradientTape::active();
  if (tape) {
    const int pn = tape->node_of(neg_map);
    const int pp = tape->node_of(pos_map);
    if (pn >= 0 || pp >= 0) {
      auto neg_store = neg_map.storage();
      auto pos_store = pos_map.storage();
      tape->record(out, {pn, pp}, [=](const double* go, double* const* pg) {
        if (pg[0]) {
          const double* a = neg_store->data();
          const double inv = 1.0 / static_cast<double>(neg_store->size());
          for (std::size_t i = 0; i < neg_store->size(); ++i)
            pg[0][i] += go[0] * inv / (1.0 - a[i] + eps);
        }
        if (pg[1]) {
          const double* b = pos_store->data();
          const double inv = 1.0 / static_cast<double>(pos_store->size());
          for (std::size_t i = 0; i < pos_store->size(); ++i)
            pg[1][i] += go[0] * (-inv / (b[i] + eps));
        }
      });
    }
  }
  return out;
}

// mean of -log(map + eps) with gradient -1/(map+eps)/N.
Tensor fooling_loss(const Tensor& map, double eps, const char* op) {
  require_rank4(map, op);
  Tensor out = Tensor::scalar(neg_log_mean(map, eps));
  GradientTape* tape = GradientTape::active();
  if (tape) {
    const int parent = tape->node_of(map);
    if (parent >= 0) {
      auto store = map.storage();
      tape->record(out, {parent}, [=](const double* go, double* const* pg) {
        if (!pg[0]) return;
        const double* a = store->data();
        const double inv = 1.0 / static_cast<double>(store->size());
        for (std::size_t i = 0; i < store->size(); ++i)
          pg[0][i] += go[0] * (-inv / (a[i] + eps));
      });
    }
  }
  return out;
}

}  // namespace

Tensor d1_loss(const Tensor& d1_on_generated, const Tensor& d1_on_gt, double eps) {
  return binary_map_loss(d1_on_generated, d1_on_gt, eps, "d1_loss");
}

Tensor g_adv1(const Tensor& d1_on_generated, double eps) {
  return fooling_loss(d1_on_generated, eps, "g_adv1");
}

Tensor d2_loss(const Tensor& d2_on_target, const Tensor& d2_on_source, double eps) {
  return binary_map_loss(d2_on_target, d2_on_source, eps, "d2_loss");
}

Tensor g_adv2(const Tensor& d2_on_target, double eps) {
  return fooling_loss(d2_on_target, eps, "g_adv2");
}

Tensor self_training_loss(const Tensor& probs, const Tensor& pseudo, const Tensor& mask,
                          const std::vector<double>& class_weights, double eps) {
  require_rank4(probs, "self_training_loss");
  require_rank4(pseudo, "self_training_loss");
  if (probs.shape() != pseudo.shape())
    throw std::invalid_argument("self_training_loss: probs/pseudo shape mismatch");
  const int nb = probs.dim(0), c = probs.dim(1), h = probs.dim(2), w = probs.dim(3);
  if (static_cast<int>(class_weights.size()) != c)
    throw std::invalid_argument("self_training_loss: class_weights must have length " +
                                std::to_string(c));
  if (mask.ndim() != 3 || mask.dim(0) != nb || mask.dim(1) != h || mask.dim(2) != w)
    throw std::invalid_argument("self_training_loss: mask must be N x H x W");

  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const double* pr = probs.data();
  const double* ps = pseudo.data();
  const double* mk = mask.data();
  double acc = 0.0;
  std::size_t selected = 0;
  for (int n = 0; n < nb; ++n) {
    const std::size_t base = static_cast<std::size_t>(n) * c * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      if (mk[n * plane + i] == 0.0) continue;
      ++selected;
      for (int k = 0; k < c; ++k) {
        const double y = ps[base + k * plane + i];
        if (y != 0.0)
          acc += -y * class_weights[k] * std::log(pr[base + k * plane + i] + eps);
      }
    }
  }
  Tensor out = Tensor::scalar(selected ? acc / static_cast<double>(selected) : 0.0);
  if (selected == 0) return out;

  GradientTape* tape = GradientTape::active();
  if (tape) {
    const int parent = tape->node_of(probs);
    if (parent >= 0) {
      auto p_store = probs.storage();
      auto pseudo_store = pseudo.storage();
      auto mask_store = mask.storage();
      auto weights = class_weights;
      const double inv = 1.0 / static_cast<double>(selected);
      tape->record(out, {parent}, [=](const double* go, double* const* pg) {
        double* gp = pg[0];
        if (!gp) return;
        const double* prd = p_store->data();
        const double* psd = pseudo_store->data();
        const double* mkd = mask_store->data();
        for (int n = 0; n < nb; ++n) {
          const std::size_t base = static_cast<std::size_t>(n) * c * plane;
          for (std::size_t i = 0; i < plane; ++i) {
            if (mkd[n * plane + i] == 0.0) continue;
            for (int k = 0; k < c; ++k) {
              const std::size_t at = base + k * plane + i;
              const double y = psd[at];
              if (y != 0.0)
                gp[at] += go[0] * (-y * weights[k] * inv / (prd[at] + eps));
            }
          }
        }
      });
    }
  }
  return out;
}

std::pair<Tensor, LossReport> full_loss(const LossTerms& terms, const LossWeights& w) {
  if (terms.g0.numel() != 1)
    throw std::invalid_argument("full_loss: g0 must be a scalar");
  LossReport report;
  report.g0 = terms.g0.item();
  report.d1 = terms.d1;
  report.d2 = terms.d2;

  std::vector<Tensor> parts{terms.g0};
  std::vector<double> weights{1.0};
  if (terms.g1_s) {
    report.g1_s = terms.g1_s->item();
    parts.push_back(*terms.g1_s);
    weights.push_back(w.w1_s);
  }
  if (terms.g1_t) {
    report.g1_t = terms.g1_t->item();
    parts.push_back(*terms.g1_t);
    weights.push_back(w.w1_t);
  }
  if (terms.g2_t) {
    report.g2_t = terms.g2_t->item();
    parts.push_back(*terms.g2_t);
    weights.push_back(w.w2_t);
  }
  if (terms.g3) {
    report.g3 = terms.g3->item();
    parts.push_back(*terms.g3);
    weights.push_back(w.w3);
  }
  Tensor total = weighted_sum(parts, weights);
  report.total = total.item();
  return {total, report};
}

}  // namespace udas
