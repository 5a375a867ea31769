/* include/vtad.h */

/* Copyright 2025  vTAD Toolkit Authors */

/* Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *  http://www.apache.org/licenses/LICENSE-2.0
 *
 * THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
 * KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
 * WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
 * MERCHANTABLITY OR NON-INFRINGEMENT.
 * See the Apache 2 License for the specific language governing permissions and
 * limitations under the License.
 */

/* C ABI for the vTAD benchmark toolkit (libvtad).
 *
 * Conventions:
 *   - Every function returns a vtad_status; VTAD_OK is 0.
 *   - On failure, vtad_last_error() returns a thread-local message.
 *   - Objects are opaque handles created by open/load functions and
 *     released with the matching free function; freeing NULL is a no-op.
 *   - Strings returned through char** are heap-allocated; release them with
 *     vtad_string_free.
 */

#ifndef VTAD_H
#define VTAD_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define VTAD_API __declspec(dllexport)
#else
#define VTAD_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum vtad_status {
  VTAD_OK = 0,
  VTAD_E_IO,
  VTAD_E_PARSE,
  VTAD_E_UNKNOWN_SPEAKER,
  VTAD_E_UNKNOWN_DESCRIPTOR,
  VTAD_E_GENDER_VIOLATION,
  VTAD_E_DESCRIPTOR_COUNT,
  VTAD_E_DUPLICATE_TRIPLE,
  VTAD_E_DUPLICATE_SPEAKER,
  VTAD_E_DUPLICATE_UTTERANCE,
  VTAD_E_EMPTY_ANNOTATION_SET,
  VTAD_E_EMPTY_INPUT,
  VTAD_E_EMPTY_TRAINING_SET,
  VTAD_E_INSUFFICIENT_SPEAKERS,
  VTAD_E_INSUFFICIENT_UTTERANCES,
  VTAD_E_DESCRIPTOR_UNCOVERED,
  VTAD_E_NEGATIVE_POOL_EXHAUSTED,
  VTAD_E_DIMENSION_MISMATCH,
  VTAD_E_ENCODER_MISMATCH,
  VTAD_E_MISSING_EMBEDDING,
  VTAD_E_UNKNOWN_DESCRIPTOR_NODE,
  VTAD_E_NONFINITE_LOSS,
  VTAD_E_ALL_MASKED,
  VTAD_E_CORRUPT_MODEL,
  VTAD_E_VERSION_MISMATCH,
  VTAD_E_SINGLE_CLASS,
  VTAD_E_UTTERANCE_NOT_FOUND,
  VTAD_E_ENCODER_LOAD_FAILURE,
  VTAD_E_AUDIO_DECODE_FAILURE,
  VTAD_E_VALIDATION,
  VTAD_E_CONFIG,
  VTAD_E_DIGEST_MISMATCH,
  VTAD_E_INTERNAL
} vtad_status;

VTAD_API const char* vtad_version(void);
VTAD_API const char* vtad_status_name(vtad_status status);
/* Message of the most recent failure on this thread ("" if none). */
VTAD_API const char* vtad_last_error(void);
VTAD_API void vtad_string_free(char* s);

/* ---- run configuration ------------------------------------------------ */

typedef struct vtad_config vtad_config;

/* config_path may be NULL (defaults only); overrides are "key=value"
 * strings applied after the file. */
VTAD_API vtad_status vtad_config_open(const char* config_path,
                                      const char* const* overrides,
                                      size_t n_overrides, vtad_config** out);
VTAD_API void vtad_config_free(vtad_config* config);
VTAD_API vtad_status vtad_config_set(vtad_config* config, const char* key,
                                     const char* value);
VTAD_API vtad_status vtad_config_get(const vtad_config* config, const char* key,
                                     char** value_out);
VTAD_API vtad_status vtad_config_digest(const vtad_config* config, char** digest_out);

/* ---- command pipeline -------------------------------------------------- */

/* Each command writes its artifacts under the configured output directory
 * and returns a human-readable summary. */
VTAD_API vtad_status vtad_run_synth(const vtad_config* config, char** summary_out);
VTAD_API vtad_status vtad_run_ingest(const vtad_config* config, char** summary_out);
VTAD_API vtad_status vtad_run_protocol(const vtad_config* config, char** summary_out);
VTAD_API vtad_status vtad_run_train(const vtad_config* config, char** summary_out);
VTAD_API vtad_status vtad_run_infer(const vtad_config* config, char** summary_out);
VTAD_API vtad_status vtad_run_score(const vtad_config* config, char** summary_out);
VTAD_API vtad_status vtad_run_validate(const vtad_config* config, char** summary_out);

/* ---- corpus ------------------------------------------------------------ */

typedef struct vtad_corpus vtad_corpus;

/* Loads an annotation file against a speaker inventory file using the
 * built-in descriptor vocabulary. */
VTAD_API vtad_status vtad_corpus_open(const char* annotations_path,
                                      const char* inventory_path,
                                      vtad_corpus** out);
VTAD_API void vtad_corpus_free(vtad_corpus* corpus);
VTAD_API vtad_status vtad_corpus_speaker_count(const vtad_corpus* corpus, size_t* out);
VTAD_API vtad_status vtad_corpus_pair_count(const vtad_corpus* corpus, size_t* out);
VTAD_API vtad_status vtad_corpus_utterance_count(const vtad_corpus* corpus, size_t* out);
/* Percentage of annotation mentions for one descriptor. */
VTAD_API vtad_status vtad_corpus_descriptor_percentage(const vtad_corpus* corpus,
                                                       const char* descriptor,
                                                       double* out);

/* ---- trials ------------------------------------------------------------ */

typedef struct vtad_trials vtad_trials;

VTAD_API vtad_status vtad_trials_open(const char* path, vtad_trials** out);
VTAD_API void vtad_trials_free(vtad_trials* trials);
VTAD_API vtad_status vtad_trials_count(const vtad_trials* trials, size_t* out);
VTAD_API vtad_status vtad_trials_has_labels(const vtad_trials* trials, int* out);

/* ---- model ------------------------------------------------------------- */

typedef struct vtad_model vtad_model;

VTAD_API vtad_status vtad_model_load(const char* path, vtad_model** out);
VTAD_API void vtad_model_free(vtad_model* model);
VTAD_API vtad_status vtad_model_embedding_dim(const vtad_model* model, size_t* out);
VTAD_API vtad_status vtad_model_node_count(const vtad_model* model, size_t* out);
/* Node name lookup; name_out is valid until the model is freed. */
VTAD_API vtad_status vtad_model_node_name(const vtad_model* model, size_t index,
                                          const char** name_out);
/* Scores one embedding pair: first/second each hold dim floats; scores_out
 * receives node_count per-node probabilities. */
VTAD_API vtad_status vtad_model_score_pair(const vtad_model* model,
                                           const float* first, const float* second,
                                           size_t dim, double* scores_out);

/* ---- metrics ----------------------------------------------------------- */

typedef struct vtad_metrics vtad_metrics;

/* Validates and scores a submission file against a labeled key file. */
VTAD_API vtad_status vtad_score_files(const char* submission_path,
                                      const char* key_path, int include_pooled_eer,
                                      vtad_metrics** out);
VTAD_API void vtad_metrics_free(vtad_metrics* metrics);
VTAD_API vtad_status vtad_metrics_cell_count(const vtad_metrics* metrics, size_t* out);
/* present_out is 0 when the metric is absent for that scope. */
VTAD_API vtad_status vtad_metrics_overall_eer(const vtad_metrics* metrics,
                                              double* value_out, int* present_out);
VTAD_API vtad_status vtad_metrics_overall_acc(const vtad_metrics* metrics,
                                              double* value_out, int* present_out);
VTAD_API vtad_status vtad_metrics_cell_eer(const vtad_metrics* metrics,
                                           const char* gender, const char* descriptor,
                                           double* value_out, int* present_out);
VTAD_API vtad_status vtad_metrics_cell_acc(const vtad_metrics* metrics,
                                           const char* gender, const char* descriptor,
                                           double* value_out, int* present_out);
VTAD_API vtad_status vtad_metrics_kv_text(const vtad_metrics* metrics, char** text_out);

/* ---- metric primitives -------------------------------------------------- */

/* labels are 0/1; scores finite. EER by descending-threshold sweep with
 * linear interpolation at the FAR/FRR crossing. */
VTAD_API vtad_status vtad_compute_eer(const double* scores, const int* labels,
                                      size_t n, double* eer_out);
VTAD_API vtad_status vtad_compute_acc(const int* decisions, const int* labels,
                                      size_t n, double* acc_out);

#ifdef __cplusplus
}
#endif

#endif /* VTAD_H */
