// Copyright (c) 2026 the udas authors
// SPDX-License-Identifier: Apache-2.0
#include "udas.h"

#include <cstring>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "udas/config.hpp"
#include "udas/trainer.hpp"

struct udas_config {
  udas::TrainConfig cfg;
};

namespace {

thread_local std::string t_last_error;

void set_error(const char* what) { t_last_error = what ? what : "unknown error"; }

template <typename Fn>
udas_status guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const std::invalid_argument& e) {
    set_error(e.what());
    return UDAS_ERR_INVALID_ARGUMENT;
  } catch (const std::runtime_error& e) {
    set_error(e.what());
    const std::string what = e.what();
    if (what.find("non-finite") != std::string::npos) return UDAS_ERR_NUMERIC;
    return UDAS_ERR_IO;
  } catch (const std::exception& e) {
    set_error(e.what());
    return UDAS_ERR_INTERNAL;
  } catch (...) {
    set_error("unknown exception");
    return UDAS_ERR_INTERNAL;
  }
}

udas_status require(bool ok, const char* message) {
  if (ok) return UDAS_OK;
  set_error(message);
  return UDAS_ERR_INVALID_ARGUMENT;
}

udas::ProgressFn wrap_progress(const udas::TrainConfig& cfg, udas_progress_fn progress,
                               void* user) {
  if (!progress) return {};
  const int64_t total = cfg.iterations;
  return [progress, user, total](const udas::StepRecord& rec) {
    udas_progress_info info{};
    info.iteration = rec.iter;
    info.total_iterations = total;
    info.loss_total = rec.losses.total;
    info.has_val_miou = rec.val_miou.has_value() ? 1 : 0;
    info.val_miou = rec.val_miou.value_or(0.0);
    progress(&info, user);
  };
}

}  // namespace

extern "C" {

unsigned udas_version(void) { return 1; }

const char* udas_status_name(udas_status status) {
  switch (status) {
    case UDAS_OK: return "ok";
    case UDAS_ERR_INVALID_ARGUMENT: return "invalid argument";
    case UDAS_ERR_IO: return "i/o error";
    case UDAS_ERR_PARSE: return "parse error";
    case UDAS_ERR_NUMERIC: return "numeric error";
    case UDAS_ERR_INTERNAL: return "internal error";
  }
  return "unknown";
}

const char* udas_last_error(void) { return t_last_error.c_str(); }

udas_status udas_config_create(udas_config** out) {
  if (udas_status s = require(out != nullptr, "out must not be null")) return s;
  return guarded([&] {
    *out = new udas_config{};
    return UDAS_OK;
  });
}

udas_status udas_config_load(const char* path, udas_config** out) {
  if (udas_status s = require(path && out, "path/out must not be null")) return s;
  return guarded([&]() -> udas_status {
    try {
      auto cfg = udas::parse_config_file(path);
      *out = new udas_config{std::move(cfg)};
      return UDAS_OK;
    } catch (const std::invalid_argument& e) {
      set_error(e.what());
      return UDAS_ERR_PARSE;
    }
  });
}

void udas_config_destroy(udas_config* cfg) { delete cfg; }

udas_status udas_config_set(udas_config* cfg, const char* key_value) {
  if (udas_status s = require(cfg && key_value, "cfg/key_value must not be null"))
    return s;
  return guarded([&]() -> udas_status {
    try {
      udas::apply_override(cfg->cfg, key_value);
      return UDAS_OK;
    } catch (const std::invalid_argument& e) {
      set_error(e.what());
      return UDAS_ERR_PARSE;
    }
  });
}

udas_status udas_config_get(const udas_config* cfg, const char* key, char* buf,
                            size_t buf_len) {
  if (udas_status s = require(cfg && key && buf && buf_len > 0,
                              "cfg/key/buf must not be null"))
    return s;
  return guarded([&]() -> udas_status {
    const std::string text = udas::serialize_config(cfg->cfg);
    const std::string needle = std::string(key) + " = ";
    const std::size_t at = text.find(needle);
    if (at == std::string::npos) {
      set_error("unknown config key");
      return UDAS_ERR_INVALID_ARGUMENT;
    }
    const std::size_t start = at + needle.size();
    const std::size_t end = text.find('\n', start);
    const std::string value = text.substr(start, end - start);
    std::strncpy(buf, value.c_str(), buf_len - 1);
    buf[buf_len - 1] = '\0';
    return UDAS_OK;
  });
}

udas_status udas_config_serialize(const udas_config* cfg, char* buf, size_t buf_len,
                                  size_t* out_len) {
  if (udas_status s = require(cfg != nullptr, "cfg must not be null")) return s;
  return guarded([&]() -> udas_status {
    const std::string text = udas::serialize_config(cfg->cfg);
    if (out_len) *out_len = text.size();
    if (buf && buf_len > 0) {
      const std::size_t n = std::min(buf_len - 1, text.size());
      std::memcpy(buf, text.data(), n);
      buf[n] = '\0';
    }
    return UDAS_OK;
  });
}

udas_status udas_config_hash(const udas_config* cfg, uint64_t* out) {
  if (udas_status s = require(cfg && out, "cfg/out must not be null")) return s;
  return guarded([&] {
    *out = udas::config_hash(cfg->cfg);
    return UDAS_OK;
  });
}

const char* udas_config_schema(void) {
  static const std::string help = udas::config_schema_help();
  return help.c_str();
}

udas_status udas_train(const udas_config* cfg, const char* run_dir,
                       udas_progress_fn progress, void* user,
                       double* final_test_miou_out) {
  if (udas_status s = require(cfg && run_dir, "cfg/run_dir must not be null")) return s;
  return guarded([&] {
    udas::Trainer trainer(cfg->cfg);
    const udas::RunRecord record =
        trainer.run(run_dir, wrap_progress(trainer.config(), progress, user));
    if (final_test_miou_out) *final_test_miou_out = record.final_test_miou;
    return UDAS_OK;
  });
}

udas_status udas_evaluate(const char* checkpoint_path, const char* config_path,
                          const char* split, const char* report_csv, double* miou_out) {
  if (udas_status s = require(checkpoint_path && split,
                              "checkpoint_path/split must not be null"))
    return s;
  return guarded([&]() -> udas_status {
    udas::Domain domain;
    udas::Split sp;
    if (!udas::parse_split_spec(split, &domain, &sp)) {
      set_error("unknown split (expected e.g. target_test)");
      return UDAS_ERR_INVALID_ARGUMENT;
    }
    std::string cfg_path = config_path ? config_path : "";
    if (cfg_path.empty())
      cfg_path = (std::filesystem::path(checkpoint_path).parent_path() / "config.cfg")
                     .string();
    const udas::TrainConfig cfg = udas::parse_config_file(cfg_path);
    const double miou = udas::evaluate_checkpoint(cfg, checkpoint_path, domain, sp,
                                                  report_csv ? report_csv : "");
    if (miou_out) *miou_out = miou;
    return UDAS_OK;
  });
}

udas_status udas_ablate(const udas_config* cfg, const char* out_dir,
                        udas_progress_fn progress, void* user) {
  if (udas_status s = require(cfg && out_dir, "cfg/out_dir must not be null")) return s;
  return guarded([&] {
    udas::run_ablation_suite(cfg->cfg, out_dir,
                             wrap_progress(cfg->cfg, progress, user));
    return UDAS_OK;
  });
}

udas_status udas_dump_data(const udas_config* cfg, const char* out_dir,
                           const char* split, int count) {
  if (udas_status s = require(cfg && out_dir && split,
                              "cfg/out_dir/split must not be null"))
    return s;
  if (udas_status s = require(count > 0, "count must be > 0")) return s;
  return guarded([&]() -> udas_status {
    udas::Domain domain;
    udas::Split sp;
    if (!udas::parse_split_spec(split, &domain, &sp)) {
      set_error("unknown split (expected e.g. source_train)");
      return UDAS_ERR_INVALID_ARGUMENT;
    }
    udas::TrainConfig conf = cfg->cfg;
    udas::finalize_config(conf);
    udas::dump_split(conf.scene, domain, sp, count, out_dir);
    return UDAS_OK;
  });
}

udas_status udas_trace_thresholds(const char* run_dir, const char* out_csv) {
  if (udas_status s = require(run_dir != nullptr, "run_dir must not be null")) return s;
  return guarded([&] {
    const std::string out =
        out_csv ? out_csv : std::string(run_dir) + "/threshold_trace.csv";
    udas::regenerate_threshold_trace(run_dir, out);
    return UDAS_OK;
  });
}

}  // extern "C"
