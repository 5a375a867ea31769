// include/vtad/protocol.hpp

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

// Seen/unseen evaluation split construction and deterministic trial
// generation.
//
// Split rules:
//   unseen  eval speakers never appear in training.
//   seen    eval speakers train, but their eval utterances and the evaluated
//           ordered speaker pairs are held out of training.
//
// Trials: for each evaluation cell (ordered eval pair (A,B), descriptor v),
// positives are utterance pairs <a in A, b in B> labeled 1 and negatives are
// the reversed pairs <b, a> labeled 0, both sampled without replacement.
// When a config asks for more negatives than the reversal pool holds, the
// remainder comes from distractor speakers of the same gender that carry no
// (A, D, v) annotation. Per-cell RNG streams are derived from (seed, cell
// key), so adding a pair never reshuffles another cell's trials.
//
// Trial list file: trial_id<TAB>first<TAB>second<TAB>descriptor<TAB>label;
// the participant variant omits the label column. '#'-prefixed header lines
// carry provenance (split_ref, seed, config digest).

#ifndef VTAD_PROTOCOL_HPP_
#define VTAD_PROTOCOL_HPP_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "vtad/common.hpp"
#include "vtad/corpus.hpp"

namespace vtad {

struct SplitConfig {
  Track track = Track::unseen;
  std::map<Gender, std::vector<std::string>> eval_descriptors;
  std::map<Gender, size_t> train_speaker_count;  // required per gender
  // Unseen track: eval speakers drawn from the non-training pool; 0 = all.
  std::map<Gender, size_t> eval_speaker_count;
  size_t utterances_per_eval_speaker = 20;
  // Pairs selected per (gender, descriptor) evaluation cell; 0 = all
  // eligible. Co-annotated pairs may activate extra cells beyond the cap.
  size_t eval_pairs_per_descriptor = 10;
  size_t positives_per_cell = 100;
  size_t negatives_per_cell = 300;
  uint64_t seed = 1;

  // Challenge defaults: 29/49 training speakers, per-gender test descriptors
  // {bright, thin, low, magnetic, pure} (male) and
  // {bright, thin, low, coarse, slim} (female), 20 eval utterances, 100/300.
  static SplitConfig challenge_defaults(Track track);

  std::string canonical_text() const;
  bool operator==(const SplitConfig&) const = default;
};

struct SplitPlan {
  Track track = Track::unseen;
  std::vector<OrderedPairAnnotation> train_pairs;
  std::vector<OrderedPairAnnotation> eval_pairs;
  std::map<std::string, std::vector<std::string>> train_utterances;
  std::map<std::string, std::vector<std::string>> eval_utterances;
  std::map<Gender, std::vector<std::string>> eval_descriptors;
  std::map<std::string, Gender> speaker_genders;  // speakers used by the plan
  uint64_t seed = 1;
  SplitConfig config;
  std::string config_digest;  // provenance of the producing run, may be empty

  // Stable identity of the plan contents (used as TrialList::split_ref).
  std::string id() const;
  std::string serialize() const;  // JSON
  static SplitPlan deserialize(const std::string& text);

  std::set<std::string> train_speakers() const;
  std::set<std::string> eval_speakers() const;

  bool operator==(const SplitPlan&) const = default;
};

struct TrialItem {
  std::string trial_id;
  std::string utterance_first;   // role of the weaker-hypothesis side
  std::string utterance_second;  // hypothesized stronger side
  std::string descriptor;
  int label = 0;  // 1 iff the second utterance is stronger in descriptor

  bool operator==(const TrialItem&) const = default;
};

struct TrialList {
  std::vector<TrialItem> items;
  std::string split_ref;
  uint64_t generation_seed = 0;
  std::string config_digest;
  bool has_labels = true;

  bool operator==(const TrialList&) const = default;
};

// One evaluation cell: ordered eval pair + descriptor. pair_index is the
// pair's position among the cell list of its (gender, descriptor) group,
// sorted by (weaker, stronger).
struct EvalCell {
  Gender gender = Gender::male;
  std::string descriptor;
  std::string weaker_speaker;
  std::string stronger_speaker;
  size_t pair_index = 0;

  std::string key() const;       // stable RNG/stat key (speaker based)
  std::string id_prefix(Track track) const;  // {track}-{gender}-{descriptor}-{pair_index}
};

std::vector<EvalCell> enumerate_cells(const SplitPlan& split);

// Deterministic for fixed (annotations, config). Throws
// InsufficientSpeakers, DescriptorUncovered or InsufficientUtterances when
// the corpus cannot satisfy the config.
SplitPlan build_split(const AnnotationSet& annotations, const SplitConfig& config);

// Deterministic for fixed (split, seed). Trial ids follow
// {track}-{gender}-{descriptor}-{pairIndex}-{serial}; item order within a
// cell is shuffled so ids do not leak labels.
TrialList generate_trials(const SplitPlan& split, uint64_t seed);

// Report-only re-verification of a generated list against its split.
ValidationReport audit_trials(const TrialList& trials, const SplitPlan& split);

std::string serialize_trials(const TrialList& trials, bool with_labels);
TrialList parse_trials(std::istream& in);

// Parses {track}-{gender}-{descriptor}-{pairIndex}-{serial}; nullopt when the
// id does not follow the scheme.
struct TrialIdParts {
  std::string track;
  std::string gender;
  std::string descriptor;
  size_t pair_index = 0;
  size_t serial = 0;
};
std::optional<TrialIdParts> parse_trial_id(std::string_view trial_id);

}  // namespace vtad

#endif  // VTAD_PROTOCOL_HPP_
