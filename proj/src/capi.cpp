// src/capi.cpp

// Copyright 2025  vTAD Toolkit Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// C ABI shim: opaque handles over the C++ core, exceptions mapped to status
// codes, failure messages parked in a thread-local slot.

#include "vtad.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <sstream>

#include "vtad/corpus.hpp"
#include "vtad/diffnet.hpp"
#include "vtad/kvconfig.hpp"
#include "vtad/protocol.hpp"
#include "vtad/runner.hpp"
#include "vtad/scoring.hpp"

namespace {

thread_local std::string g_last_error;

vtad_status status_of(vtad::ErrorCode code) {
  using EC = vtad::ErrorCode;
  switch (code) {
    case EC::ok: return VTAD_OK;
    case EC::io: return VTAD_E_IO;
    case EC::parse: return VTAD_E_PARSE;
    case EC::unknown_speaker: return VTAD_E_UNKNOWN_SPEAKER;
    case EC::unknown_descriptor: return VTAD_E_UNKNOWN_DESCRIPTOR;
    case EC::gender_violation: return VTAD_E_GENDER_VIOLATION;
    case EC::descriptor_count: return VTAD_E_DESCRIPTOR_COUNT;
    case EC::duplicate_triple: return VTAD_E_DUPLICATE_TRIPLE;
    case EC::duplicate_speaker: return VTAD_E_DUPLICATE_SPEAKER;
    case EC::duplicate_utterance: return VTAD_E_DUPLICATE_UTTERANCE;
    case EC::empty_annotation_set: return VTAD_E_EMPTY_ANNOTATION_SET;
    case EC::empty_input: return VTAD_E_EMPTY_INPUT;
    case EC::empty_training_set: return VTAD_E_EMPTY_TRAINING_SET;
    case EC::insufficient_speakers: return VTAD_E_INSUFFICIENT_SPEAKERS;
    case EC::insufficient_utterances: return VTAD_E_INSUFFICIENT_UTTERANCES;
    case EC::descriptor_uncovered: return VTAD_E_DESCRIPTOR_UNCOVERED;
    case EC::negative_pool_exhausted: return VTAD_E_NEGATIVE_POOL_EXHAUSTED;
    case EC::dimension_mismatch: return VTAD_E_DIMENSION_MISMATCH;
    case EC::encoder_mismatch: return VTAD_E_ENCODER_MISMATCH;
    case EC::missing_embedding: return VTAD_E_MISSING_EMBEDDING;
    case EC::unknown_descriptor_node: return VTAD_E_UNKNOWN_DESCRIPTOR_NODE;
    case EC::nonfinite_loss: return VTAD_E_NONFINITE_LOSS;
    case EC::all_masked: return VTAD_E_ALL_MASKED;
    case EC::corrupt_model: return VTAD_E_CORRUPT_MODEL;
    case EC::version_mismatch: return VTAD_E_VERSION_MISMATCH;
    case EC::single_class: return VTAD_E_SINGLE_CLASS;
    case EC::utterance_not_found: return VTAD_E_UTTERANCE_NOT_FOUND;
    case EC::encoder_load_failure: return VTAD_E_ENCODER_LOAD_FAILURE;
    case EC::audio_decode_failure: return VTAD_E_AUDIO_DECODE_FAILURE;
    case EC::validation_failed: return VTAD_E_VALIDATION;
    case EC::config: return VTAD_E_CONFIG;
    case EC::digest_mismatch: return VTAD_E_DIGEST_MISMATCH;
    case EC::internal: return VTAD_E_INTERNAL;
  }
  return VTAD_E_INTERNAL;
}

template <class Fn>
vtad_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return VTAD_OK;
  } catch (const vtad::Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return VTAD_E_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return VTAD_E_INTERNAL;
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) return nullptr;
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

vtad_status require(bool ok, const char* message) {
  if (ok) return VTAD_OK;
  g_last_error = message;
  return VTAD_E_CONFIG;
}

}  // namespace

struct vtad_config {
  vtad::RunConfig config;
};

struct vtad_corpus {
  vtad::AnnotationSet annotations;
  std::map<std::string, double> distribution;
};

struct vtad_trials {
  vtad::TrialList list;
};

struct vtad_model {
  vtad::DiffNetModel model;
};

struct vtad_metrics {
  vtad::MetricsReport report;
};

namespace {

template <class RunFn>
vtad_status run_command(const vtad_config* config, char** summary_out, RunFn&& fn) {
  if (vtad_status s = require(config != nullptr, "config is NULL")) return s;
  return guarded([&] {
    vtad::RunResult result = fn(config->config);
    if (summary_out) *summary_out = dup_string(result.summary);
  });
}

vtad_status optional_metric(const std::optional<double>& value, double* value_out,
                            int* present_out) {
  if (vtad_status s = require(value_out && present_out, "NULL argument")) return s;
  *present_out = value.has_value() ? 1 : 0;
  *value_out = value.value_or(0.0);
  return VTAD_OK;
}

vtad_status cell_metric(const vtad_metrics* metrics, const char* gender,
                        const char* descriptor, bool want_eer, double* value_out,
                        int* present_out) {
  if (vtad_status s = require(metrics && gender && descriptor, "NULL argument"))
    return s;
  auto it = metrics->report.per_cell.find(
      vtad::CellKey{vtad::lower(gender), vtad::lower(descriptor)});
  if (it == metrics->report.per_cell.end()) {
    g_last_error = std::string("no cell (") + gender + ", " + descriptor + ")";
    return VTAD_E_UNKNOWN_DESCRIPTOR;
  }
  return optional_metric(want_eer ? it->second.eer : it->second.acc, value_out,
                         present_out);
}

}  // namespace

extern "C" {

const char* vtad_version(void) { return "1.0.0"; }

const char* vtad_status_name(vtad_status status) {
  switch (status) {
    case VTAD_OK: return "Ok";
    case VTAD_E_IO: return "IoError";
    case VTAD_E_PARSE: return "ParseError";
    case VTAD_E_UNKNOWN_SPEAKER: return "UnknownSpeaker";
    case VTAD_E_UNKNOWN_DESCRIPTOR: return "UnknownDescriptor";
    case VTAD_E_GENDER_VIOLATION: return "GenderViolation";
    case VTAD_E_DESCRIPTOR_COUNT: return "DescriptorCountViolation";
    case VTAD_E_DUPLICATE_TRIPLE: return "DuplicateTriple";
    case VTAD_E_DUPLICATE_SPEAKER: return "DuplicateSpeaker";
    case VTAD_E_DUPLICATE_UTTERANCE: return "DuplicateUtterance";
    case VTAD_E_EMPTY_ANNOTATION_SET: return "EmptyAnnotationSet";
    case VTAD_E_EMPTY_INPUT: return "EmptyInput";
    case VTAD_E_EMPTY_TRAINING_SET: return "EmptyTrainingSet";
    case VTAD_E_INSUFFICIENT_SPEAKERS: return "InsufficientSpeakers";
    case VTAD_E_INSUFFICIENT_UTTERANCES: return "InsufficientUtterances";
    case VTAD_E_DESCRIPTOR_UNCOVERED: return "DescriptorUncovered";
    case VTAD_E_NEGATIVE_POOL_EXHAUSTED: return "NegativePoolExhausted";
    case VTAD_E_DIMENSION_MISMATCH: return "DimensionMismatch";
    case VTAD_E_ENCODER_MISMATCH: return "EncoderMismatch";
    case VTAD_E_MISSING_EMBEDDING: return "MissingEmbedding";
    case VTAD_E_UNKNOWN_DESCRIPTOR_NODE: return "UnknownDescriptorNode";
    case VTAD_E_NONFINITE_LOSS: return "NonFiniteLoss";
    case VTAD_E_ALL_MASKED: return "AllMasked";
    case VTAD_E_CORRUPT_MODEL: return "CorruptModelFile";
    case VTAD_E_VERSION_MISMATCH: return "VersionMismatch";
    case VTAD_E_SINGLE_CLASS: return "SingleClassInput";
    case VTAD_E_UTTERANCE_NOT_FOUND: return "UtteranceNotFound";
    case VTAD_E_ENCODER_LOAD_FAILURE: return "EncoderLoadFailure";
    case VTAD_E_AUDIO_DECODE_FAILURE: return "AudioDecodeFailure";
    case VTAD_E_VALIDATION: return "ValidationFailed";
    case VTAD_E_CONFIG: return "ConfigError";
    case VTAD_E_DIGEST_MISMATCH: return "DigestMismatch";
    case VTAD_E_INTERNAL: return "InternalError";
  }
  return "UnknownError";
}

const char* vtad_last_error(void) { return g_last_error.c_str(); }

void vtad_string_free(char* s) { std::free(s); }

vtad_status vtad_config_open(const char* config_path, const char* const* overrides,
                             size_t n_overrides, vtad_config** out) {
  if (vtad_status s = require(out != nullptr, "out is NULL")) return s;
  return guarded([&] {
    std::vector<std::string> ov;
    for (size_t i = 0; i < n_overrides; ++i) ov.emplace_back(overrides[i]);
    std::optional<std::filesystem::path> path;
    if (config_path && *config_path) path = config_path;
    *out = new vtad_config{vtad::RunConfig::load(path, ov)};
  });
}

void vtad_config_free(vtad_config* config) { delete config; }

vtad_status vtad_config_set(vtad_config* config, const char* key, const char* value) {
  if (vtad_status s = require(config && key && value, "NULL argument")) return s;
  return guarded([&] { config->config.set(key, value); });
}

vtad_status vtad_config_get(const vtad_config* config, const char* key,
                            char** value_out) {
  if (vtad_status s = require(config && key && value_out, "NULL argument")) return s;
  return guarded([&] { *value_out = dup_string(config->config.get(key)); });
}

vtad_status vtad_config_digest(const vtad_config* config, char** digest_out) {
  if (vtad_status s = require(config && digest_out, "NULL argument")) return s;
  return guarded([&] { *digest_out = dup_string(config->config.digest()); });
}

vtad_status vtad_run_synth(const vtad_config* config, char** summary_out) {
  return run_command(config, summary_out, vtad::run_synth);
}
vtad_status vtad_run_ingest(const vtad_config* config, char** summary_out) {
  return run_command(config, summary_out, vtad::run_ingest);
}
vtad_status vtad_run_protocol(const vtad_config* config, char** summary_out) {
  return run_command(config, summary_out, vtad::run_protocol);
}
vtad_status vtad_run_train(const vtad_config* config, char** summary_out) {
  return run_command(config, summary_out, vtad::run_train);
}
vtad_status vtad_run_infer(const vtad_config* config, char** summary_out) {
  return run_command(config, summary_out, vtad::run_infer);
}
vtad_status vtad_run_score(const vtad_config* config, char** summary_out) {
  return run_command(config, summary_out, vtad::run_score);
}
vtad_status vtad_run_validate(const vtad_config* config, char** summary_out) {
  return run_command(config, summary_out, vtad::run_validate);
}

vtad_status vtad_corpus_open(const char* annotations_path, const char* inventory_path,
                             vtad_corpus** out) {
  if (vtad_status s = require(annotations_path && inventory_path && out, "NULL argument"))
    return s;
  return guarded([&] {
    std::istringstream inv_in(vtad::read_text_file(inventory_path));
    vtad::SpeakerInventory inventory = vtad::SpeakerInventory::parse(inv_in);
    std::istringstream ann_in(vtad::read_text_file(annotations_path));
    vtad::AnnotationSet set = vtad::parse_annotations(
        ann_in, vtad::DescriptorVocabulary::default_vocabulary(), inventory);
    auto corpus = std::make_unique<vtad_corpus>();
    if (!set.pairs.empty()) corpus->distribution = vtad::descriptor_distribution(set);
    corpus->annotations = std::move(set);
    *out = corpus.release();
  });
}

void vtad_corpus_free(vtad_corpus* corpus) { delete corpus; }

vtad_status vtad_corpus_speaker_count(const vtad_corpus* corpus, size_t* out) {
  if (vtad_status s = require(corpus && out, "NULL argument")) return s;
  *out = corpus->annotations.speakers.speaker_count();
  return VTAD_OK;
}

vtad_status vtad_corpus_pair_count(const vtad_corpus* corpus, size_t* out) {
  if (vtad_status s = require(corpus && out, "NULL argument")) return s;
  *out = corpus->annotations.pairs.size();
  return VTAD_OK;
}

vtad_status vtad_corpus_utterance_count(const vtad_corpus* corpus, size_t* out) {
  if (vtad_status s = require(corpus && out, "NULL argument")) return s;
  *out = corpus->annotations.speakers.utterance_count();
  return VTAD_OK;
}

vtad_status vtad_corpus_descriptor_percentage(const vtad_corpus* corpus,
                                              const char* descriptor, double* out) {
  if (vtad_status s = require(corpus && descriptor && out, "NULL argument")) return s;
  return guarded([&] {
    auto it = corpus->distribution.find(vtad::lower(vtad::trim(descriptor)));
    if (it == corpus->distribution.end())
      vtad::fail(vtad::ErrorCode::unknown_descriptor,
                 std::string("descriptor '") + descriptor + "' has no mentions");
    *out = it->second;
  });
}

vtad_status vtad_trials_open(const char* path, vtad_trials** out) {
  if (vtad_status s = require(path && out, "NULL argument")) return s;
  return guarded([&] {
    std::istringstream in(vtad::read_text_file(path));
    *out = new vtad_trials{vtad::parse_trials(in)};
  });
}

void vtad_trials_free(vtad_trials* trials) { delete trials; }

vtad_status vtad_trials_count(const vtad_trials* trials, size_t* out) {
  if (vtad_status s = require(trials && out, "NULL argument")) return s;
  *out = trials->list.items.size();
  return VTAD_OK;
}

vtad_status vtad_trials_has_labels(const vtad_trials* trials, int* out) {
  if (vtad_status s = require(trials && out, "NULL argument")) return s;
  *out = trials->list.has_labels ? 1 : 0;
  return VTAD_OK;
}

vtad_status vtad_model_load(const char* path, vtad_model** out) {
  if (vtad_status s = require(path && out, "NULL argument")) return s;
  return guarded([&] { *out = new vtad_model{vtad::DiffNetModel::load(path)}; });
}

void vtad_model_free(vtad_model* model) { delete model; }

vtad_status vtad_model_embedding_dim(const vtad_model* model, size_t* out) {
  if (vtad_status s = require(model && out, "NULL argument")) return s;
  *out = model->model.config().input_dim / 2;
  return VTAD_OK;
}

vtad_status vtad_model_node_count(const vtad_model* model, size_t* out) {
  if (vtad_status s = require(model && out, "NULL argument")) return s;
  *out = model->model.node_names().size();
  return VTAD_OK;
}

vtad_status vtad_model_node_name(const vtad_model* model, size_t index,
                                 const char** name_out) {
  if (vtad_status s = require(model && name_out, "NULL argument")) return s;
  return guarded([&] {
    const auto& names = model->model.node_names();
    if (index >= names.size())
      vtad::fail(vtad::ErrorCode::unknown_descriptor_node,
                 "node index " + std::to_string(index) + " out of range");
    *name_out = names[index].c_str();
  });
}

vtad_status vtad_model_score_pair(const vtad_model* model, const float* first,
                                  const float* second, size_t dim,
                                  double* scores_out) {
  if (vtad_status s = require(model && first && second && scores_out, "NULL argument"))
    return s;
  return guarded([&] {
    std::vector<double> scores = model->model.forward_pair(
        std::span<const float>(first, dim), std::span<const float>(second, dim));
    std::memcpy(scores_out, scores.data(), scores.size() * sizeof(double));
  });
}

vtad_status vtad_score_files(const char* submission_path, const char* key_path,
                             int include_pooled_eer, vtad_metrics** out) {
  if (vtad_status s = require(submission_path && key_path && out, "NULL argument"))
    return s;
  return guarded([&] {
    std::istringstream sub_in(vtad::read_text_file(submission_path));
    vtad::SubmissionFile submission = vtad::SubmissionFile::parse(sub_in);
    std::istringstream key_in(vtad::read_text_file(key_path));
    vtad::TrialList key = vtad::parse_trials(key_in);
    *out = new vtad_metrics{
        vtad::score_against_key(submission, key, include_pooled_eer != 0)};
  });
}

void vtad_metrics_free(vtad_metrics* metrics) { delete metrics; }

vtad_status vtad_metrics_cell_count(const vtad_metrics* metrics, size_t* out) {
  if (vtad_status s = require(metrics && out, "NULL argument")) return s;
  *out = metrics->report.per_cell.size();
  return VTAD_OK;
}

vtad_status vtad_metrics_overall_eer(const vtad_metrics* metrics, double* value_out,
                                     int* present_out) {
  if (vtad_status s = require(metrics != nullptr, "metrics is NULL")) return s;
  return optional_metric(metrics->report.overall_eer, value_out, present_out);
}

vtad_status vtad_metrics_overall_acc(const vtad_metrics* metrics, double* value_out,
                                     int* present_out) {
  if (vtad_status s = require(metrics != nullptr, "metrics is NULL")) return s;
  return optional_metric(metrics->report.overall_acc, value_out, present_out);
}

vtad_status vtad_metrics_cell_eer(const vtad_metrics* metrics, const char* gender,
                                  const char* descriptor, double* value_out,
                                  int* present_out) {
  return cell_metric(metrics, gender, descriptor, true, value_out, present_out);
}

vtad_status vtad_metrics_cell_acc(const vtad_metrics* metrics, const char* gender,
                                  const char* descriptor, double* value_out,
                                  int* present_out) {
  return cell_metric(metrics, gender, descriptor, false, value_out, present_out);
}

vtad_status vtad_metrics_kv_text(const vtad_metrics* metrics, char** text_out) {
  if (vtad_status s = require(metrics && text_out, "NULL argument")) return s;
  return guarded([&] { *text_out = dup_string(metrics->report.to_kv()); });
}

vtad_status vtad_compute_eer(const double* scores, const int* labels, size_t n,
                             double* eer_out) {
  if (vtad_status s = require(scores && labels && eer_out, "NULL argument")) return s;
  return guarded([&] {
    std::vector<std::pair<double, int>> scored(n);
    for (size_t i = 0; i < n; ++i) scored[i] = {scores[i], labels[i]};
    *eer_out = vtad::compute_eer(scored);
  });
}

vtad_status vtad_compute_acc(const int* decisions, const int* labels, size_t n,
                             double* acc_out) {
  if (vtad_status s = require(decisions && labels && acc_out, "NULL argument")) return s;
  return guarded([&] {
    std::vector<std::pair<int, int>> decided(n);
    for (size_t i = 0; i < n; ++i) decided[i] = {decisions[i], labels[i]};
    *acc_out = vtad::compute_acc(decided);
  });
}

}  // extern "C"
