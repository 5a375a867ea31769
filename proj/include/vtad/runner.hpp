// include/vtad/runner.hpp

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

// Command-level operations wiring the modules into reproducible runs. Each
// command reads/writes artifacts under the configured output directory,
// embeds the run's config digest into everything it produces, and refuses to
// mix artifacts from different runs unless `force` is set.
//
// Artifacts (relative to `out`):
//   synth:     annotations.tsv inventory.tsv profiles.tsv embeddings.vtade
//   ingest:    annotations.norm.tsv inventory.norm.tsv ingest_report.txt
//   protocol:  split.json trials_key.tsv trials_participant.tsv
//              protocol_audit.txt
//   train:     model_<gender>.vtadm / model_joint.vtadm, train_<...>.log
//   infer:     submission.tsv
//   score:     report.txt report.kv
// Environment: VTAD_CORPUS_ROOT supplies corpus.root when unset;
// VTAD_ENCODER_ROOT resolves bare encoder names to <root>/<name>.vtade.

#ifndef VTAD_RUNNER_HPP_
#define VTAD_RUNNER_HPP_

#include <string>

#include "vtad/kvconfig.hpp"

namespace vtad {

struct RunResult {
  std::string summary;
};

RunResult run_synth(const RunConfig& config);
RunResult run_ingest(const RunConfig& config);
RunResult run_protocol(const RunConfig& config);
RunResult run_train(const RunConfig& config);
RunResult run_infer(const RunConfig& config);
RunResult run_score(const RunConfig& config);
RunResult run_validate(const RunConfig& config);

}  // namespace vtad

#endif  // VTAD_RUNNER_HPP_
