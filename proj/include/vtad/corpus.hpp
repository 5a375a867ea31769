// include/vtad/corpus.hpp

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

// Descriptor vocabulary, speaker/utterance inventory and ingestion of
// ordered-pair timbre annotations.
//
// File formats:
//   annotations:  weaker_id<TAB>stronger_id<TAB>descriptor[,descriptor[,...]]
//   inventory:    speaker_id<TAB>gender<TAB>utterance_id[,utterance_id,...]
// Lines starting with '#' are comments; descriptor names are lowercased and
// trimmed on input. Each annotation row states that the stronger speaker
// exceeds the weaker one in every listed descriptor.

#ifndef VTAD_CORPUS_HPP_
#define VTAD_CORPUS_HPP_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "vtad/common.hpp"

namespace vtad {

enum class GenderRestriction { none, female_only, male_only };

const char* gender_restriction_name(GenderRestriction r);
std::optional<GenderRestriction> parse_gender_restriction(std::string_view token);

struct Descriptor {
  std::string name;         // canonical lowercase token
  std::string translation;  // reference gloss
  GenderRestriction restriction = GenderRestriction::none;
  double reference_percentage = 0.0;  // share of annotation mentions

  bool operator==(const Descriptor&) const = default;
};

// Ordered descriptor set. The built-in default has 18 entries; the printed
// reference percentages of the default vocabulary total 93.19, so fidelity
// checks against them must renormalize before comparing with an empirical
// mention distribution (which always sums to 100).
class DescriptorVocabulary {
 public:
  DescriptorVocabulary() = default;
  explicit DescriptorVocabulary(std::vector<Descriptor> entries);

  static DescriptorVocabulary default_vocabulary();
  static DescriptorVocabulary parse(std::istream& in);
  std::string serialize() const;

  const std::vector<Descriptor>& entries() const { return entries_; }
  size_t size() const { return entries_.size(); }
  std::optional<size_t> index_of(std::string_view name) const;
  const Descriptor& at(size_t i) const { return entries_.at(i); }
  bool contains(std::string_view name) const { return index_of(name).has_value(); }
  bool allowed_for(std::string_view name, Gender gender) const;
  // Descriptor names usable for a gender, in vocabulary order (17 of 18 in
  // the default vocabulary: one exclusive descriptor per gender).
  std::vector<std::string> names_for(Gender gender) const;
  std::vector<std::string> names() const;

  double reference_percentage_sum() const;

  bool operator==(const DescriptorVocabulary& other) const {
    return entries_ == other.entries_;
  }

 private:
  std::vector<Descriptor> entries_;
  std::unordered_map<std::string, size_t> index_;
};

struct SpeakerRecord {
  std::string speaker_id;
  Gender gender = Gender::male;
  std::vector<std::string> utterance_ids;

  bool operator==(const SpeakerRecord&) const = default;
};

// {weaker A, stronger B, descriptors}: B is stronger than A in each listed
// descriptor. Descriptor order is preserved from the source row.
struct OrderedPairAnnotation {
  std::string weaker_speaker;
  std::string stronger_speaker;
  std::vector<std::string> descriptors;

  bool operator==(const OrderedPairAnnotation&) const = default;
};

class SpeakerInventory {
 public:
  SpeakerInventory() = default;

  static SpeakerInventory parse(std::istream& in);
  // <root>/<speaker_id>/<utterance_file>; genders come from a two-column
  // speaker_id<TAB>gender map file.
  static SpeakerInventory scan_tree(const std::filesystem::path& root,
                                    const std::filesystem::path& gender_map);
  std::string serialize() const;

  void add(SpeakerRecord record);

  const std::map<std::string, SpeakerRecord>& speakers() const { return speakers_; }
  const SpeakerRecord* find(std::string_view speaker_id) const;
  const SpeakerRecord* speaker_of_utterance(std::string_view utterance_id) const;
  size_t speaker_count() const { return speakers_.size(); }
  size_t utterance_count() const;
  std::vector<std::string> speaker_ids(Gender gender) const;

  // Reports speakers with fewer utterances than expected. Report-only: an
  // empty inventory passes with a zero-speakers warning.
  ValidationReport validate(size_t expected_utterance_count) const;

  bool operator==(const SpeakerInventory& other) const {
    return speakers_ == other.speakers_;
  }

 private:
  std::map<std::string, SpeakerRecord> speakers_;
  std::unordered_map<std::string, std::string> utterance_to_speaker_;
};

struct AnnotationSet {
  SpeakerInventory speakers;
  std::vector<OrderedPairAnnotation> pairs;
  DescriptorVocabulary vocabulary;

  bool operator==(const AnnotationSet&) const = default;
};

// Parses annotation rows, enforcing: known speakers, same-gender pairs,
// known descriptors valid for the pair's gender, 1..3 descriptors per pair,
// and no duplicate (weaker, stronger, descriptor) triple. Errors carry the
// offending line number.
AnnotationSet parse_annotations(std::istream& in,
                                const DescriptorVocabulary& vocabulary,
                                const SpeakerInventory& speakers);

// Canonical form: one row per pair, tab-separated, comma-joined descriptors.
// parse(serialize(x)) == x.
std::string serialize_annotations(const AnnotationSet& annotations);

// Percentage of descriptor mentions (a pair with k descriptors contributes k
// mentions). Values sum to 100 within 1e-9. Keys are canonical names.
std::map<std::string, double> descriptor_distribution(
    const AnnotationSet& annotations);

}  // namespace vtad

#endif  // VTAD_CORPUS_HPP_
