// Copyright (c) 2026 the udas authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end; drives the library exclusively through the C API.

#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "udas.h"

namespace {

struct ConfigHandle {
  udas_config* cfg = nullptr;
  ~ConfigHandle() { udas_config_destroy(cfg); }
};

int fail(udas_status status, const char* what) {
  std::fprintf(stderr, "error: %s: %s (%s)\n", what, udas_last_error(),
               udas_status_name(status));
  return 1;
}

int load_config(const std::string& path, const std::vector<std::string>& overrides,
                ConfigHandle& handle, const char* what) {
  udas_status s = path.empty() ? udas_config_create(&handle.cfg)
                               : udas_config_load(path.c_str(), &handle.cfg);
  if (s != UDAS_OK) return fail(s, what);
  for (const std::string& kv : overrides) {
    s = udas_config_set(handle.cfg, kv.c_str());
    if (s != UDAS_OK) return fail(s, "applying override");
  }
  return 0;
}

void print_progress(const udas_progress_info* info, void*) {
  if (info->has_val_miou) {
    std::printf("iter %6lld/%lld  loss %.5f  val mIoU %.4f\n",
                static_cast<long long>(info->iteration),
                static_cast<long long>(info->total_iterations), info->loss_total,
                info->val_miou);
    std::fflush(stdout);
  } else if (info->iteration % 100 == 0) {
    std::printf("iter %6lld/%lld  loss %.5f\n",
                static_cast<long long>(info->iteration),
                static_cast<long long>(info->total_iterations), info->loss_total);
    std::fflush(stdout);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"udas: domain-adaptive semantic segmentation trainer"};
  app.require_subcommand(1);

  std::string config_path, run_dir, checkpoint, split, out_dir, report_csv, out_csv;
  std::vector<std::string> overrides;
  int count = 16;
  bool quiet = false;
  bool show_schema = false;

  CLI::App* train = app.add_subcommand("train", "train a model");
  train->add_option("--config", config_path, "config file (defaults used when omitted)");
  train->add_option("--override", overrides, "key=value config override (repeatable)");
  train->add_option("--run-dir", run_dir, "output directory (default udas_run)");
  train->add_flag("--quiet", quiet, "suppress progress output");
  train->add_flag("--schema", show_schema, "print the config schema and exit");

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--split", split, "split name, e.g. target_test")->required();
  eval->add_option("--config", config_path,
                   "config file (defaults to config.cfg next to the checkpoint)");
  eval->add_option("--report", report_csv, "write the per-class IoU report here");

  CLI::App* ablate = app.add_subcommand("ablate", "run the 8-row ablation table");
  ablate->add_option("--config", config_path, "config file");
  ablate->add_option("--override", overrides, "key=value config override (repeatable)");
  ablate->add_option("--out", out_dir, "output directory (default udas_ablation)");
  ablate->add_flag("--quiet", quiet, "suppress progress output");

  CLI::App* dump = app.add_subcommand("dump-data", "write scenes as PPM/PGM files");
  dump->add_option("--config", config_path, "config file");
  dump->add_option("--override", overrides, "key=value config override (repeatable)");
  dump->add_option("--out", out_dir, "output directory")->required();
  dump->add_option("--split", split, "split name (default target_train)");
  dump->add_option("--count", count, "number of scenes (default 16)");

  CLI::App* trace = app.add_subcommand("trace-thresholds",
                                       "rebuild the threshold trace of a run");
  trace->add_option("--run", run_dir, "run directory with metrics.csv")->required();
  trace->add_option("--out", out_csv, "output CSV (default <run>/threshold_trace.csv)");

  CLI11_PARSE(app, argc, argv);

  if (train->parsed()) {
    if (show_schema) {
      std::printf("%s", udas_config_schema());
      return 0;
    }
    ConfigHandle cfg;
    if (int rc = load_config(config_path, overrides, cfg, "loading config")) return rc;
    if (run_dir.empty()) run_dir = "udas_run";
    double miou = 0.0;
    const udas_status s = udas_train(cfg.cfg, run_dir.c_str(),
                                     quiet ? nullptr : print_progress, nullptr, &miou);
    if (s != UDAS_OK) return fail(s, "training");
    std::printf("final target test mIoU: %.4f\nrun artifacts in %s\n", miou,
                run_dir.c_str());
    return 0;
  }

  if (eval->parsed()) {
    double miou = 0.0;
    const udas_status s = udas_evaluate(
        checkpoint.c_str(), config_path.empty() ? nullptr : config_path.c_str(),
        split.c_str(), report_csv.empty() ? nullptr : report_csv.c_str(), &miou);
    if (s != UDAS_OK) return fail(s, "evaluating");
    std::printf("%s mIoU: %.6f\n", split.c_str(), miou);
    return 0;
  }

  if (ablate->parsed()) {
    ConfigHandle cfg;
    if (int rc = load_config(config_path, overrides, cfg, "loading config")) return rc;
    if (out_dir.empty()) out_dir = "udas_ablation";
    const udas_status s = udas_ablate(cfg.cfg, out_dir.c_str(),
                                      quiet ? nullptr : print_progress, nullptr);
    if (s != UDAS_OK) return fail(s, "running ablation");
    std::printf("ablation table written to %s/ablation.csv\n", out_dir.c_str());
    return 0;
  }

  if (dump->parsed()) {
    ConfigHandle cfg;
    if (int rc = load_config(config_path, overrides, cfg, "loading config")) return rc;
    if (split.empty()) split = "target_train";
    const udas_status s = udas_dump_data(cfg.cfg, out_dir.c_str(), split.c_str(), count);
    if (s != UDAS_OK) return fail(s, "dumping data");
    std::printf("%d %s scenes written to %s\n", count, split.c_str(), out_dir.c_str());
    return 0;
  }

  if (trace->parsed()) {
    const udas_status s = udas_trace_thresholds(
        run_dir.c_str(), out_csv.empty() ? nullptr : out_csv.c_str());
    if (s != UDAS_OK) return fail(s, "tracing thresholds");
    std::printf("threshold trace written for %s\n", run_dir.c_str());
    return 0;
  }
  return 0;
}
