// Copyright (c) 2026 the udas authors
// SPDX-License-Identifier: Apache-2.0
#include "udas/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "udas/rng.hpp"

namespace udas {

namespace {

TrainConfig finalized(TrainConfig cfg) {
  finalize_config(cfg);
  return cfg;
}

ClassWeights weights_from_config(const TrainConfig& cfg) {
  // a-priori census over a fixed prefix of the source training range
  const auto [lo, hi] = split_seed_range(Domain::Source, Split::Train);
  (void)hi;
  std::vector<LabelMap> maps;
  maps.reserve(static_cast<std::size_t>(cfg.weight_images));
  for (int i = 0; i < cfg.weight_images; ++i)
    maps.push_back(generate_scene(lo + static_cast<std::uint64_t>(i), cfg.scene,
                                  Domain::Source)
                       .labels);
  return class_weights_from_source(maps, cfg.scene.num_classes,
                                   cfg.inverse_class_weights);
}

double thread_cpu_seconds() {
  timespec ts{};
  clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
  return static_cast<double>(ts.tv_sec) + 1e-9 * static_cast<double>(ts.tv_nsec);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Batch concatenation of two constant maps (no tape recording needed).
Tensor concat_batch(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 4 || b.ndim() != 4 || a.dim(1) != b.dim(1) ||
      a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3))
    throw std::invalid_argument("concat_batch: incompatible shapes");
  Tensor out({a.dim(0) + b.dim(0), a.dim(1), a.dim(2), a.dim(3)});
  std::copy(a.data(), a.data() + a.numel(), out.data());
  std::copy(b.data(), b.data() + b.numel(), out.data() + a.numel());
  return out;
}

LabelMap count_labels(const Tensor& probs, std::vector<long long>& counts) {
  LabelMap pred = argmax_channel(probs);
  for (int v : pred.values) ++counts[static_cast<std::size_t>(v)];
  return pred;
}

}  // namespace

std::vector<std::string> report_class_names(int num_classes) {
  std::vector<std::string> names;
  const auto& scene_names = scene_class_names();
  for (int c = 0; c < num_classes; ++c)
    names.push_back(static_cast<std::size_t>(c) < scene_names.size()
                        ? scene_names[static_cast<std::size_t>(c)]
                        : "class" + std::to_string(c));
  return names;
}

Trainer::Trainer(TrainConfig cfg)
    : cfg_(finalized(std::move(cfg))),
      g_(build_generator(cfg_.scene.num_classes, cfg_.base_width,
                         Rng::mix(cfg_.seed, 11))),
      d1_(build_discriminator(DiscriminatorSpec::d1(), cfg_.scene.num_classes,
                              Rng::mix(cfg_.seed, 12))),
      d2_(build_discriminator(DiscriminatorSpec::d2(), cfg_.scene.num_classes,
                              Rng::mix(cfg_.seed, 13))),
      g_opt_(g_.params(), cfg_.g_lr, cfg_.g_momentum, cfg_.g_weight_decay),
      d1_opt_(d1_.params(), cfg_.d1_lr, cfg_.adam_beta1, cfg_.adam_beta2, cfg_.adam_eps),
      d2_opt_(d2_.params(), cfg_.d2_lr, cfg_.adam_beta1, cfg_.adam_beta2, cfg_.adam_eps),
      thresholds_(cfg_.scene.num_classes, cfg_.percentile_f,
                  cfg_.threshold_mode == ThresholdMode::Adaptive
                      ? cfg_.init_threshold
                      : (cfg_.threshold_mode == ThresholdMode::Fixed ? cfg_.fixed_threshold
                                                                     : 0.0),
                  cfg_.min_pixels),
      class_weights_(weights_from_config(cfg_)) {}

StepRecord Trainer::train_step(const SegmentationBatch& source,
                               const SegmentationBatch& target) {
  if (!source.labels)
    throw std::invalid_argument("train_step: source batch must carry labels");
  if (target.labels)
    throw std::invalid_argument("train_step: target batch must not carry labels");

  const bool need_d1 = cfg_.use_g1_s || cfg_.use_g1_t || cfg_.use_g3;
  const bool need_d2 = cfg_.use_g2;
  const int num_classes = cfg_.scene.num_classes;
  const double eps = cfg_.loss_eps;

  StepRecord rec;
  rec.iter = ++iter_;
  rec.lr_g = g_opt_.current_lr();
  rec.lr_d1 = need_d1 ? d1_opt_.current_lr() : 0.0;
  rec.lr_d2 = need_d2 ? d2_opt_.current_lr() : 0.0;
  rec.predicted_px.assign(static_cast<std::size_t>(num_classes), 0);

  Tensor probs_s_const, probs_t_const;

  // ---- generator phase ----
  {
    GradientTape tape;
    GradientTape::Scope scope(tape);
    g_.watch_params(tape);

    Tensor probs_s = softmax_channel(g_.forward(source.images));
    Tensor probs_t = softmax_channel(g_.forward(target.images));
    probs_s_const = probs_s.detached();
    probs_t_const = probs_t.detached();

    LossTerms terms;
    terms.g0 = supervised_ce(probs_s, *source.labels, 255, eps);

    Tensor d1_on_t;
    if (cfg_.use_g1_s) terms.g1_s = g_adv1(d1_.forward(probs_s), eps);
    if (cfg_.use_g1_t || cfg_.use_g3) d1_on_t = d1_.forward(probs_t);
    if (cfg_.use_g1_t) terms.g1_t = g_adv1(d1_on_t, eps);
    if (cfg_.use_g2) terms.g2_t = g_adv2(d2_.forward(probs_t), eps);

    const LabelMap target_pred = count_labels(probs_t_const, rec.predicted_px);

    if (cfg_.use_g3 && cfg_.threshold_mode == ThresholdMode::Adaptive) {
      // confidences from the same forward pass, treated as constants
      update_thresholds(d1_on_t.detached(), target_pred, thresholds_, rec.iter);
    } else {
      thresholds_.record_step(rec.iter);
    }
    if (cfg_.use_g3) {
      PseudoLabelPack pack = build_mask(d1_on_t.detached(), probs_t_const, thresholds_);
      rec.masked_pixels = pack.selected_total;
      terms.g3 = self_training_loss(probs_t, pack.pseudo, pack.mask,
                                    class_weights_.weights, eps);
    }

    auto [total, report] = full_loss(terms, cfg_.weights);
    rec.losses = report;
    g_opt_.zero_grad();
    tape.backward(total);
    g_opt_.step();
  }

  // ---- D1 phase: generated maps (source and target) vs ground truth ----
  if (need_d1) {
    GradientTape tape;
    GradientTape::Scope scope(tape);
    d1_.watch_params(tape);
    const Tensor generated = concat_batch(probs_s_const, probs_t_const);
    const Tensor gt_maps = one_hot(*source.labels, num_classes);
    Tensor loss = d1_loss(d1_.forward(generated), d1_.forward(gt_maps), eps);
    rec.losses.d1 = loss.item();
    d1_opt_.zero_grad();
    tape.backward(loss);
    d1_opt_.step();
  }

  // ---- D2 phase: target-generated (class 0) vs source-generated (class 1) ----
  if (need_d2) {
    GradientTape tape;
    GradientTape::Scope scope(tape);
    d2_.watch_params(tape);
    Tensor loss = d2_loss(d2_.forward(probs_t_const), d2_.forward(probs_s_const), eps);
    rec.losses.d2 = loss.item();
    d2_opt_.zero_grad();
    tape.backward(loss);
    d2_opt_.step();
  }

  rec.thresholds = thresholds_.thresholds();

  const LossReport& l = rec.losses;
  for (double v : {l.g0, l.g1_s, l.g1_t, l.g2_t, l.g3, l.d1, l.d2, l.total})
    if (!std::isfinite(v)) {
      std::ostringstream os;
      os << "non-finite loss at iteration " << rec.iter << ": g0=" << l.g0
         << " g1_s=" << l.g1_s << " g1_t=" << l.g1_t << " g2_t=" << l.g2_t
         << " g3=" << l.g3 << " d1=" << l.d1 << " d2=" << l.d2
         << " total=" << l.total;
      throw std::runtime_error(os.str());
    }
  return rec;
}

double Trainer::evaluate(Domain domain, Split split, int count, ConfusionMatrix* out_cm) {
  ConfusionMatrix cm(cfg_.scene.num_classes);
  for (const Scene& scene : make_eval_set(cfg_.scene, domain, split, count)) {
    const Tensor probs = softmax_channel(g_.forward(scene.image));
    cm.accumulate(argmax_channel(probs), scene.labels);
  }
  if (out_cm) *out_cm = cm;
  return cm.miou();
}

std::vector<std::pair<std::string, Tensor>> Trainer::checkpoint_entries() {
  std::vector<std::pair<std::string, Tensor>> entries;
  for (auto& [name, t] : g_.named_params()) entries.emplace_back("G." + name, t);
  for (auto& [name, t] : d1_.named_params()) entries.emplace_back("D1." + name, t);
  for (auto& [name, t] : d2_.named_params()) entries.emplace_back("D2." + name, t);
  return entries;
}

RunRecord Trainer::run(const std::string& run_dir, const ProgressFn& progress) {
  namespace fs = std::filesystem;
  fs::create_directories(run_dir);
  {
    std::ofstream os(run_dir + "/config.cfg", std::ios::trunc);
    os << serialize_config(cfg_);
    if (!os) throw std::runtime_error("cannot write " + run_dir + "/config.cfg");
  }

  std::ofstream csv(run_dir + "/metrics.csv", std::ios::trunc);
  if (!csv) throw std::runtime_error("cannot write " + run_dir + "/metrics.csv");
  const int num_classes = cfg_.scene.num_classes;
  csv << "iter,lr_g,lr_d1,lr_d2,g0,g1_s,g1_t,g2_t,g3,d1,d2,total,masked_px";
  for (int c = 0; c < num_classes; ++c) csv << ",thr_" << c;
  for (int c = 0; c < num_classes; ++c) csv << ",pred_" << c;
  csv << ",val_miou\n";

  BatchIterator source_it(cfg_.scene, Domain::Source, Split::Train, cfg_.batch_size,
                          Rng::mix(cfg_.seed, 21));
  BatchIterator target_it(cfg_.scene, Domain::Target, Split::Train, cfg_.batch_size,
                          Rng::mix(cfg_.seed, 22));

  RunRecord record;
  const auto wall_start = std::chrono::steady_clock::now();
  const double cpu_start = thread_cpu_seconds();

  for (int i = 0; i < cfg_.iterations; ++i) {
    StepRecord rec = train_step(source_it.next(), target_it.next());

    const bool eval_now =
        rec.iter % cfg_.eval_interval == 0 || rec.iter == cfg_.iterations;
    if (eval_now) {
      rec.val_miou = evaluate(Domain::Target, Split::Val, cfg_.val_images);
      if (*rec.val_miou > record.best_val_miou || record.best_val_iter < 0) {
        record.best_val_miou = *rec.val_miou;
        record.best_val_iter = rec.iter;
        save_checkpoint(run_dir + "/checkpoint_best.udas", checkpoint_entries());
      }
    }

    csv << rec.iter << ',' << fmt(rec.lr_g) << ',' << fmt(rec.lr_d1) << ','
        << fmt(rec.lr_d2) << ',' << fmt(rec.losses.g0) << ',' << fmt(rec.losses.g1_s)
        << ',' << fmt(rec.losses.g1_t) << ',' << fmt(rec.losses.g2_t) << ','
        << fmt(rec.losses.g3) << ',' << fmt(rec.losses.d1) << ',' << fmt(rec.losses.d2)
        << ',' << fmt(rec.losses.total) << ',' << rec.masked_pixels;
    for (double t : rec.thresholds) csv << ',' << fmt(t);
    for (long long n : rec.predicted_px) csv << ',' << n;
    csv << ',';
    if (rec.val_miou) csv << fmt(*rec.val_miou);
    csv << '\n';

    if (progress) progress(rec);
    record.steps.push_back(std::move(rec));
  }
  csv.close();
  if (!csv) throw std::runtime_error("metrics.csv write failed in " + run_dir);

  save_checkpoint(run_dir + "/checkpoint_final.udas", checkpoint_entries());
  if (cfg_.iterations == 0)
    save_checkpoint(run_dir + "/checkpoint_best.udas", checkpoint_entries());

  export_threshold_trace(thresholds_, run_dir + "/threshold_trace.csv",
                         report_class_names(num_classes));

  ConfusionMatrix cm;
  record.final_test_miou = evaluate(Domain::Target, Split::Test, cfg_.test_images, &cm);
  cm.write_report_csv(run_dir + "/eval_report.csv", report_class_names(num_classes));

  record.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start)
          .count();
  record.cpu_seconds = thread_cpu_seconds() - cpu_start;

  {
    std::ofstream os(run_dir + "/run_summary.txt", std::ios::trunc);
    os << "iterations " << cfg_.iterations << "\n"
       << "final_test_miou " << fmt(record.final_test_miou) << "\n"
       << "best_val_miou " << fmt(record.best_val_miou) << "\n"
       << "best_val_iter " << record.best_val_iter << "\n"
       << "wall_seconds " << fmt(record.wall_seconds) << "\n"
       << "cpu_seconds " << fmt(record.cpu_seconds) << "\n";
  }
  return record;
}

double evaluate_checkpoint(const TrainConfig& cfg_in, const std::string& checkpoint_path,
                           Domain domain, Split split, const std::string& report_csv,
                           ConfusionMatrix* out_cm) {
  TrainConfig cfg = cfg_in;
  finalize_config(cfg);
  Network g = build_generator(cfg.scene.num_classes, cfg.base_width, Rng::mix(cfg.seed, 11));
  load_into_network(load_checkpoint(checkpoint_path), "G.", g);

  ConfusionMatrix cm(cfg.scene.num_classes);
  const int count = split == Split::Test ? cfg.test_images : cfg.val_images;
  for (const Scene& scene : make_eval_set(cfg.scene, domain, split, count)) {
    const Tensor probs = softmax_channel(g.forward(scene.image));
    cm.accumulate(argmax_channel(probs), scene.labels);
  }
  if (!report_csv.empty())
    cm.write_report_csv(report_csv, report_class_names(cfg.scene.num_classes));
  if (out_cm) *out_cm = cm;
  return cm.miou();
}

bool parse_split_spec(const std::string& name, Domain* domain, Split* split) {
  for (Domain d : {Domain::Source, Domain::Target})
    for (Split s : {Split::Train, Split::Val, Split::Test})
      if (split_name(d, s) == name) {
        *domain = d;
        *split = s;
        return true;
      }
  return false;
}

// ---- ablation ---------------------------------------------------------------

std::vector<AblationRow> ablation_configs(const TrainConfig& base) {
  auto make = [&](int index, const std::string& name, bool g1s, bool g1t, bool g2,
                  bool g3, ThresholdMode mode) {
    AblationRow row;
    row.index = index;
    row.name = name;
    row.cfg = base;
    row.cfg.use_g1_s = g1s;
    row.cfg.use_g1_t = g1t;
    row.cfg.use_g2 = g2;
    row.cfg.use_g3 = g3;
    row.cfg.threshold_mode = mode;
    row.hash = config_hash(row.cfg);
    return row;
  };
  const ThresholdMode adaptive = ThresholdMode::Adaptive;
  std::vector<AblationRow> rows;
  rows.push_back(make(1, "supervised_only", false, false, false, false, adaptive));
  rows.push_back(make(2, "no_g1_s", false, true, true, true, adaptive));
  rows.push_back(make(3, "no_g1_t", true, false, true, true, adaptive));
  rows.push_back(make(4, "no_g2_t", true, true, false, true, adaptive));
  rows.push_back(make(5, "no_g3", true, true, true, false, adaptive));
  rows.push_back(make(6, "no_threshold", true, true, true, true, ThresholdMode::None));
  rows.push_back(make(7, "fixed_0.2", true, true, true, true, ThresholdMode::Fixed));
  rows.push_back(make(8, "full_adaptive", true, true, true, true, adaptive));
  return rows;
}

std::vector<AblationRow> run_ablation_suite(const TrainConfig& base,
                                            const std::string& out_dir,
                                            const ProgressFn& progress) {
  std::filesystem::create_directories(out_dir);
  std::vector<AblationRow> rows = ablation_configs(base);
  for (AblationRow& row : rows) {
    Trainer trainer(row.cfg);
    const RunRecord record = trainer.run(out_dir + "/" + row.name, progress);
    row.miou = record.final_test_miou;
  }
  write_ablation_csv(rows, out_dir + "/ablation.csv");
  return rows;
}

void write_ablation_csv(const std::vector<AblationRow>& rows, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "row,name,use_g1_s,use_g1_t,use_g2_t,use_g3,threshold_mode,config_hash,miou\n";
  for (const AblationRow& row : rows) {
    const TrainConfig& c = row.cfg;
    const char* mode = c.threshold_mode == ThresholdMode::Adaptive ? "adaptive"
                       : c.threshold_mode == ThresholdMode::Fixed  ? "fixed"
                                                                   : "none";
    os << row.index << ',' << row.name << ',' << (c.use_g1_s ? 1 : 0) << ','
       << (c.use_g1_t ? 1 : 0) << ',' << (c.use_g2 ? 1 : 0) << ','
       << (c.use_g3 ? 1 : 0) << ',' << (c.use_g3 ? mode : "-") << ','
       << row.hash << ',' << fmt(row.miou) << '\n';
  }
  if (!os) throw std::runtime_error("write failed for " + path);
}

// ---- threshold trace regeneration --------------------------------------------

void regenerate_threshold_trace(const std::string& run_dir, const std::string& out_csv) {
  const std::string metrics_path = run_dir + "/metrics.csv";
  std::ifstream is(metrics_path);
  if (!is) throw std::runtime_error("cannot open " + metrics_path);

  std::string header;
  if (!std::getline(is, header))
    throw std::runtime_error("empty metrics file " + metrics_path);

  // locate iter and thr_* columns
  std::vector<std::string> columns;
  {
    std::istringstream hs(header);
    std::string col;
    while (std::getline(hs, col, ',')) columns.push_back(col);
  }
  int iter_col = -1;
  std::vector<int> thr_cols;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == "iter") iter_col = static_cast<int>(i);
    if (columns[i].rfind("thr_", 0) == 0) thr_cols.push_back(static_cast<int>(i));
  }
  if (iter_col < 0 || thr_cols.empty())
    throw std::runtime_error("metrics file lacks iter/thr_* columns: " + metrics_path);

  const int num_classes = static_cast<int>(thr_cols.size());
  ThresholdState state(num_classes, 75.0, 1.0, 1);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::istringstream ls(line);
    std::string field;
    while (std::getline(ls, field, ',')) fields.push_back(field);
    const long long step = std::strtoll(fields[static_cast<std::size_t>(iter_col)].c_str(),
                                        nullptr, 10);
    for (int c = 0; c < num_classes; ++c) {
      const double v =
          std::strtod(fields[static_cast<std::size_t>(thr_cols[static_cast<std::size_t>(c)])].c_str(),
                      nullptr);
      state.set_threshold(c, v);
    }
    state.record_step(step);
  }
  export_threshold_trace(state, out_csv, report_class_names(num_classes));
}

}  // namespace udas
