// include/vtad/scoring.hpp

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

// EER/ACC metric computation and the organizer-side submission scoring path.
//
// Submission format, one row per trial (header line optional):
//   #team=<token> track=<seen|unseen> system=<label>
//   trial_id<TAB>score<TAB>decision
// 'NA' is permitted in the score or decision column (not both).

#ifndef VTAD_SCORING_HPP_
#define VTAD_SCORING_HPP_

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vtad/common.hpp"
#include "vtad/protocol.hpp"

namespace vtad {

struct ScoredTrial {
  std::string trial_id;
  int label = 0;
  std::optional<double> score;
  std::optional<int> decision;
};

// Equal error rate over (score, label) items, label 1 = target. Decisions are
// "accept iff score >= threshold"; the threshold sweep runs over all distinct
// scores in descending order and the FAR/FRR crossing is located by linear
// interpolation between the two bracketing operating points. Result in [0,1].
// Requires at least one item of each label (SingleClassInput otherwise).
double compute_eer(std::span<const std::pair<double, int>> scored);

// Fraction of items whose decision equals the label. EmptyInput if empty.
double compute_acc(std::span<const std::pair<int, int>> decided);

struct SubmissionEntry {
  std::string trial_id;
  std::optional<double> score;
  std::optional<int> decision;

  bool operator==(const SubmissionEntry&) const = default;
};

struct SubmissionFile {
  std::string team;
  std::string track;
  std::string system;
  std::string config_digest;  // optional provenance header
  std::vector<SubmissionEntry> entries;

  static SubmissionFile parse(std::istream& in);
  std::string serialize() const;

  bool operator==(const SubmissionFile&) const = default;
};

// Scoring cell: one (gender, descriptor) pair. Gender is recovered from the
// trial-id scheme ({track}-{gender}-{descriptor}-{pair}-{serial}); ids outside
// the scheme fall into gender "na" so foreign keys still score.
struct CellKey {
  std::string gender;
  std::string descriptor;
  auto operator<=>(const CellKey&) const = default;
};

struct CellMetrics {
  std::optional<double> eer;
  std::optional<double> acc;
  size_t positives = 0;
  size_t negatives = 0;
  size_t scored = 0;
  size_t decided = 0;
};

struct MetricsReport {
  std::map<CellKey, CellMetrics> per_cell;
  std::optional<double> overall_eer;  // unweighted mean over cells with EER
  std::optional<double> overall_acc;
  std::optional<double> pooled_eer;   // single EER over all scored trials
  std::vector<CellKey> eer_absent_cells;
  std::vector<std::string> warnings;

  std::string to_text() const;
  // One `key = value` line per field; keys are stable for leaderboard diffs.
  std::string to_kv() const;
};

// Validates and scores a submission against a labeled key. Per-cell EER is
// absent (with a warning) when a cell lacks scores or has a single class.
// Throws ValidationFailed when validate_submission reports errors.
MetricsReport score_against_key(const SubmissionFile& submission,
                                const TrialList& key,
                                bool include_pooled_eer = false);

// Checks trial-id bijection with the key, field domains and duplicates.
ValidationReport validate_submission(const SubmissionFile& submission,
                                     const TrialList& key);

}  // namespace vtad

#endif  // VTAD_SCORING_HPP_
