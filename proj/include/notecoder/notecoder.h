/* Copyright 2026 The notecoder Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface to the notecoder library. Every fallible call returns an
 * nc_status; on failure nc_last_error() describes the most recent error on
 * the calling thread. Strings returned through char** are heap-allocated
 * and must be released with nc_string_free. JSON arguments may be NULL
 * where noted, meaning "defaults".
 */
#ifndef NOTECODER_NOTECODER_H_
#define NOTECODER_NOTECODER_H_

#include <stdint.h>

#if defined(_WIN32)
#define NC_API __declspec(dllexport)
#else
#define NC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum nc_status {
  NC_OK = 0,
  NC_ERR_INVALID_ARGUMENT = 1,
  NC_ERR_IO = 2,
  NC_ERR_FORMAT = 3,
  NC_ERR_SHAPE = 4,
  NC_ERR_NUMERIC = 5,
  NC_ERR_EMPTY_NOTE = 6,
  NC_ERR_COMPATIBILITY = 7,
  NC_ERR_PROVIDER_UNAVAILABLE = 8,
  NC_ERR_MISSING_EMBEDDING = 9,
  NC_ERR_UNMAPPED_CODE = 10,
  NC_ERR_LOAD = 11,
  NC_ERR_CONFIG = 12,
  NC_ERR_USAGE = 13,
  NC_ERR_UNDEFINED_METRIC = 14,
  NC_ERR_INTERNAL = 99
} nc_status;

typedef struct nc_bundle nc_bundle;
typedef struct nc_server nc_server;

NC_API const char* nc_version(void);
NC_API const char* nc_status_name(nc_status status);
/* Valid until the next failing call on the same thread. */
NC_API const char* nc_last_error(void);
NC_API void nc_string_free(char* s);

/* Writes a labeled corpus (JSONL: note_id, subject_id, hadm_id, text, codes)
 * and, if labelspace_path is non-NULL, its label space JSON. */
NC_API nc_status nc_synth(const char* spec_json, const char* corpus_path,
                          const char* labelspace_path);

/* One note: sentences and chunks as JSON. options_json keys: chunk_length,
 * bundle (directory whose vocabulary and abbreviations to use; otherwise the
 * vocabulary is built from the note itself). */
NC_API nc_status nc_preprocess_text(const char* text, const char* options_json,
                                    char** out_json);

/* A corpus: one JSON line per note with sentences and chunks, vocabulary
 * built from the whole corpus (or taken from options "bundle"). *out_json
 * (may be NULL) receives a summary. */
NC_API nc_status nc_preprocess_corpus(const char* corpus_path, const char* options_json,
                                      const char* out_path, char** out_json);

/* Trains both stages on a labeled corpus and writes config.json,
 * metrics.jsonl, eval.json and bundle/ under run_dir. labelspace_path NULL
 * selects the corpus's top-50 codes over the built-in chapters. */
NC_API nc_status nc_train(const char* corpus_path, const char* labelspace_path,
                          const char* config_json, const char* run_dir, char** out_json);

/* Metrics report of a bundle on a labeled corpus. options_json keys: split
 * ("test", "val", "train" or "all"; default "test"). Splits are recomputed
 * from the seed and ratios recorded in the bundle. */
NC_API nc_status nc_eval(const char* bundle_dir, const char* corpus_path,
                         const char* options_json, char** out_json);

/* Ablation table as JSON; variants is a comma-separated list of baseline,
 * +balance, +augment, +balance+augment (NULL = all four). Writes
 * ablation.json and ablation.csv under run_dir when non-NULL. */
NC_API nc_status nc_ablate(const char* corpus_path, const char* labelspace_path,
                           const char* config_json, const char* variants,
                           const char* run_dir, char** out_json);

/* provider_json fields override the provider recorded in the bundle (may be NULL). */
NC_API nc_status nc_bundle_load(const char* dir, const char* provider_json, nc_bundle** out);
NC_API void nc_bundle_free(nc_bundle* bundle);
NC_API nc_status nc_bundle_info(const nc_bundle* bundle, char** out_json);

/* PredictionResult JSON. options_json keys: top_k_codes, note_id. */
NC_API nc_status nc_predict(const nc_bundle* bundle, const char* text,
                            const char* options_json, char** out_json);

/* Original sentence order and n_copies shuffled orders, as used by
 * training-time augmentation of a note with this id and seed. */
NC_API nc_status nc_augment_preview(const char* text, const char* note_id, uint32_t n_copies,
                                    uint64_t seed, char** out_json);

/* Resolved service config: defaults, then the file at config_path (may be
 * NULL), then BIND_ADDR / BUNDLE_PATH / EMBED_ENDPOINT if apply_env. */
NC_API nc_status nc_service_config(const char* config_path, int apply_env, char** out_json);

/* Serves in the background; port 0 picks a free port. */
NC_API nc_status nc_server_start(const char* config_json, nc_server** out);
NC_API int nc_server_port(const nc_server* server);
/* Stops and frees. */
NC_API void nc_server_stop(nc_server* server);
/* Serves on the calling thread until the process is terminated. */
NC_API nc_status nc_serve(const char* config_json);

#ifdef __cplusplus
}
#endif

#endif /* NOTECODER_NOTECODER_H_ */
