/* Copyright (c) 2026 the udas authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C API of the udas shared library: unsupervised domain adaptation for
 * semantic segmentation with dual fully convolutional discriminators and
 * class-wise adaptive self-training, trained end to end on a procedurally
 * generated source/target scene pair.
 *
 * All functions return UDAS_OK on success; on failure the thread-local
 * message from udas_last_error() describes what went wrong. Handles are
 * opaque and must be released with their destroy function.
 */
#ifndef UDAS_H
#define UDAS_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define UDAS_API __declspec(dllexport)
#else
#define UDAS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum udas_status {
  UDAS_OK = 0,
  UDAS_ERR_INVALID_ARGUMENT = 1,
  UDAS_ERR_IO = 2,
  UDAS_ERR_PARSE = 3,
  UDAS_ERR_NUMERIC = 4,
  UDAS_ERR_INTERNAL = 5,
} udas_status;

/* Opaque training configuration (flat dotted-key schema). */
typedef struct udas_config udas_config;

typedef struct udas_progress_info {
  int64_t iteration;
  int64_t total_iterations;
  double loss_total;
  double val_miou; /* only meaningful when has_val_miou != 0 */
  int has_val_miou;
} udas_progress_info;

typedef void (*udas_progress_fn)(const udas_progress_info* info, void* user);

UDAS_API unsigned udas_version(void);
UDAS_API const char* udas_status_name(udas_status status);

/* Thread-local message of the most recent failure. */
UDAS_API const char* udas_last_error(void);

/* ---- configuration ----------------------------------------------------- */

UDAS_API udas_status udas_config_create(udas_config** out);
UDAS_API udas_status udas_config_load(const char* path, udas_config** out);
UDAS_API void udas_config_destroy(udas_config* cfg);

/* Applies one `key=value` override. */
UDAS_API udas_status udas_config_set(udas_config* cfg, const char* key_value);

/* Copies the value of a key into buf (NUL-terminated, truncating). */
UDAS_API udas_status udas_config_get(const udas_config* cfg, const char* key,
                                     char* buf, size_t buf_len);

/* Canonical serialization into buf; *out_len receives the full length. */
UDAS_API udas_status udas_config_serialize(const udas_config* cfg, char* buf,
                                           size_t buf_len, size_t* out_len);

UDAS_API udas_status udas_config_hash(const udas_config* cfg, uint64_t* out);

/* Schema documentation (static string). */
UDAS_API const char* udas_config_schema(void);

/* ---- training / evaluation --------------------------------------------- */

/* Runs training, writing config.cfg, metrics.csv, threshold_trace.csv,
 * eval_report.csv, run_summary.txt and checkpoints into run_dir. progress
 * may be NULL. final_test_miou_out may be NULL. */
UDAS_API udas_status udas_train(const udas_config* cfg, const char* run_dir,
                                udas_progress_fn progress, void* user,
                                double* final_test_miou_out);

/* Evaluates a checkpoint's generator on a named split (source_train,
 * source_val, source_test, target_train, target_val, target_test).
 * config_path may be NULL, in which case config.cfg next to the checkpoint
 * is used. report_csv may be NULL. */
UDAS_API udas_status udas_evaluate(const char* checkpoint_path,
                                   const char* config_path, const char* split,
                                   const char* report_csv, double* miou_out);

/* Runs the 8-row ablation table into out_dir (one run subdirectory per row
 * plus ablation.csv). */
UDAS_API udas_status udas_ablate(const udas_config* cfg, const char* out_dir,
                                 udas_progress_fn progress, void* user);

/* Writes `count` scenes of a named split as PPM/PGM pairs. */
UDAS_API udas_status udas_dump_data(const udas_config* cfg, const char* out_dir,
                                    const char* split, int count);

/* Rebuilds threshold_trace.csv from a run directory's metrics.csv. out_csv
 * may be NULL (defaults to <run_dir>/threshold_trace.csv). */
UDAS_API udas_status udas_trace_thresholds(const char* run_dir,
                                           const char* out_csv);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* UDAS_H */
