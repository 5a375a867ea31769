// src/corpus.cpp

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

#include "vtad/corpus.hpp"

#include <algorithm>
#include <istream>
#include <set>
#include <sstream>

namespace vtad {

namespace fs = std::filesystem;

const char* gender_restriction_name(GenderRestriction r) {
  switch (r) {
    case GenderRestriction::none: return "none";
    case GenderRestriction::female_only: return "female_only";
    case GenderRestriction::male_only: return "male_only";
  }
  return "none";
}

std::optional<GenderRestriction> parse_gender_restriction(std::string_view token) {
  std::string t = lower(trim(token));
  if (t == "none" || t.empty()) return GenderRestriction::none;
  if (t == "female_only") return GenderRestriction::female_only;
  if (t == "male_only") return GenderRestriction::male_only;
  return std::nullopt;
}

DescriptorVocabulary::DescriptorVocabulary(std::vector<Descriptor> entries)
    : entries_(std::move(entries)) {
  for (size_t i = 0; i < entries_.size(); ++i) {
    Descriptor& d = entries_[i];
    d.name = lower(trim(d.name));
    if (d.name.empty())
      fail(ErrorCode::parse, "vocabulary entry " + std::to_string(i) + " has an empty name");
    if (!index_.emplace(d.name, i).second)
      fail(ErrorCode::parse, "duplicate descriptor name: " + d.name);
  }
}

DescriptorVocabulary DescriptorVocabulary::default_vocabulary() {
  using R = GenderRestriction;
  // Reference mention percentages from the VCTK-RVA descriptor table; the
  // printed column totals 93.19.
  std::vector<Descriptor> entries = {
      {"bright", "明亮", R::none, 17.10},
      {"thin", "单薄", R::none, 13.03},
      {"coarse", "粗", R::none, 11.62},
      {"slim", "细", R::none, 11.31},
      {"low", "低沉", R::none, 7.43},
      {"pure", "干净", R::none, 5.48},
      {"rich", "厚实", R::none, 4.71},
      {"magnetic", "磁性", R::none, 3.64},
      {"muddy", "浑浊", R::none, 3.59},
      {"hoarse", "沙哑", R::none, 3.32},
      {"round", "圆润", R::none, 2.48},
      {"flat", "平淡", R::none, 2.15},
      {"shrill", "尖锐", R::female_only, 2.08},
      {"shriveled", "干瘪", R::none, 1.74},
      {"muffled", "沉闷", R::none, 1.44},
      {"soft", "柔和", R::none, 0.82},
      {"transparent", "通透", R::none, 0.66},
      {"husky", "干哑", R::male_only, 0.59},
  };
  return DescriptorVocabulary(std::move(entries));
}

DescriptorVocabulary DescriptorVocabulary::parse(std::istream& in) {
  std::vector<Descriptor> entries;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::vector<std::string> cols = split(t, '\t');
    if (cols.size() != 4)
      fail(ErrorCode::parse, "vocabulary:" + std::to_string(lineno) +
                                 ": expected 4 tab-separated columns, got " +
                                 std::to_string(cols.size()));
    Descriptor d;
    d.name = lower(trim(cols[0]));
    d.translation = trim(cols[1]);
    auto restriction = parse_gender_restriction(cols[2]);
    if (!restriction)
      fail(ErrorCode::parse, "vocabulary:" + std::to_string(lineno) +
                                 ": bad gender restriction '" + cols[2] + "'");
    d.restriction = *restriction;
    if (!parse_double(trim(cols[3]), d.reference_percentage))
      fail(ErrorCode::parse, "vocabulary:" + std::to_string(lineno) +
                                 ": bad percentage '" + cols[3] + "'");
    entries.push_back(std::move(d));
  }
  return DescriptorVocabulary(std::move(entries));
}

std::string DescriptorVocabulary::serialize() const {
  std::ostringstream out;
  out << "#descriptor\ttranslation\trestriction\tpercentage\n";
  for (const Descriptor& d : entries_) {
    out << d.name << '\t' << d.translation << '\t'
        << gender_restriction_name(d.restriction) << '\t'
        << format_double(d.reference_percentage, 2) << '\n';
  }
  return out.str();
}

std::optional<size_t> DescriptorVocabulary::index_of(std::string_view name) const {
  auto it = index_.find(lower(trim(name)));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

bool DescriptorVocabulary::allowed_for(std::string_view name, Gender gender) const {
  auto idx = index_of(name);
  if (!idx) return false;
  switch (entries_[*idx].restriction) {
    case GenderRestriction::none: return true;
    case GenderRestriction::female_only: return gender == Gender::female;
    case GenderRestriction::male_only: return gender == Gender::male;
  }
  return false;
}

std::vector<std::string> DescriptorVocabulary::names_for(Gender gender) const {
  std::vector<std::string> out;
  for (const Descriptor& d : entries_)
    if (allowed_for(d.name, gender)) out.push_back(d.name);
  return out;
}

std::vector<std::string> DescriptorVocabulary::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const Descriptor& d : entries_) out.push_back(d.name);
  return out;
}

double DescriptorVocabulary::reference_percentage_sum() const {
  double sum = 0.0;
  for (const Descriptor& d : entries_) sum += d.reference_percentage;
  return sum;
}

SpeakerInventory SpeakerInventory::parse(std::istream& in) {
  SpeakerInventory inv;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::vector<std::string> cols = split(t, '\t');
    if (cols.size() != 3)
      fail(ErrorCode::parse, "inventory:" + std::to_string(lineno) +
                                 ": expected 3 tab-separated columns, got " +
                                 std::to_string(cols.size()));
    SpeakerRecord rec;
    rec.speaker_id = trim(cols[0]);
    if (rec.speaker_id.empty())
      fail(ErrorCode::parse, "inventory:" + std::to_string(lineno) + ": empty speaker id");
    auto gender = parse_gender(cols[1]);
    if (!gender)
      fail(ErrorCode::parse, "inventory:" + std::to_string(lineno) +
                                 ": bad gender '" + cols[1] + "'");
    rec.gender = *gender;
    for (const std::string& u : split(cols[2], ',')) {
      std::string utt = trim(u);
      if (utt.empty())
        fail(ErrorCode::parse, "inventory:" + std::to_string(lineno) + ": empty utterance id");
      rec.utterance_ids.push_back(std::move(utt));
    }
    if (rec.utterance_ids.empty())
      fail(ErrorCode::parse, "inventory:" + std::to_string(lineno) +
                                 ": speaker " + rec.speaker_id + " has no utterances");
    try {
      inv.add(std::move(rec));
    } catch (const Error& e) {
      fail(e.code(), "inventory:" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return inv;
}

SpeakerInventory SpeakerInventory::scan_tree(const fs::path& root,
                                             const fs::path& gender_map) {
  std::map<std::string, Gender> genders;
  {
    std::istringstream in(read_text_file(gender_map));
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::string t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      std::vector<std::string> cols = split(t, '\t');
      if (cols.size() != 2)
        fail(ErrorCode::parse, "gender map:" + std::to_string(lineno) +
                                   ": expected 2 columns");
      auto gender = parse_gender(cols[1]);
      if (!gender)
        fail(ErrorCode::parse, "gender map:" + std::to_string(lineno) +
                                   ": bad gender '" + cols[1] + "'");
      genders[trim(cols[0])] = *gender;
    }
  }

  if (!fs::is_directory(root))
    fail(ErrorCode::io, "corpus root is not a directory: " + root.string());

  SpeakerInventory inv;
  std::vector<fs::path> speaker_dirs;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory()) speaker_dirs.push_back(entry.path());
  std::sort(speaker_dirs.begin(), speaker_dirs.end());

  for (const fs::path& dir : speaker_dirs) {
    SpeakerRecord rec;
    rec.speaker_id = dir.filename().string();
    auto it = genders.find(rec.speaker_id);
    if (it == genders.end())
      fail(ErrorCode::unknown_speaker,
           "speaker " + rec.speaker_id + " not present in gender map " + gender_map.string());
    rec.gender = it->second;
    std::vector<std::string> utts;
    for (const auto& f : fs::directory_iterator(dir))
      if (f.is_regular_file()) utts.push_back(f.path().stem().string());
    std::sort(utts.begin(), utts.end());
    rec.utterance_ids = std::move(utts);
    if (rec.utterance_ids.empty()) continue;  // ignore empty speaker dirs
    inv.add(std::move(rec));
  }
  return inv;
}

std::string SpeakerInventory::serialize() const {
  std::ostringstream out;
  for (const auto& [id, rec] : speakers_) {
    out << id << '\t' << gender_name(rec.gender) << '\t'
        << join(rec.utterance_ids, ",") << '\n';
  }
  return out.str();
}

void SpeakerInventory::add(SpeakerRecord record) {
  if (speakers_.count(record.speaker_id))
    fail(ErrorCode::duplicate_speaker, "duplicate speaker id: " + record.speaker_id);
  std::set<std::string> seen;
  for (const std::string& utt : record.utterance_ids) {
    if (!seen.insert(utt).second)
      fail(ErrorCode::duplicate_utterance,
           "speaker " + record.speaker_id + " lists utterance " + utt + " twice");
    auto [it, inserted] = utterance_to_speaker_.emplace(utt, record.speaker_id);
    if (!inserted)
      fail(ErrorCode::duplicate_utterance,
           "utterance id " + utt + " appears under speakers " + it->second +
               " and " + record.speaker_id);
  }
  std::string id = record.speaker_id;
  speakers_.emplace(std::move(id), std::move(record));
}

const SpeakerRecord* SpeakerInventory::find(std::string_view speaker_id) const {
  auto it = speakers_.find(std::string(speaker_id));
  return it == speakers_.end() ? nullptr : &it->second;
}

const SpeakerRecord* SpeakerInventory::speaker_of_utterance(
    std::string_view utterance_id) const {
  auto it = utterance_to_speaker_.find(std::string(utterance_id));
  if (it == utterance_to_speaker_.end()) return nullptr;
  return find(it->second);
}

size_t SpeakerInventory::utterance_count() const {
  size_t n = 0;
  for (const auto& [id, rec] : speakers_) n += rec.utterance_ids.size();
  return n;
}

std::vector<std::string> SpeakerInventory::speaker_ids(Gender gender) const {
  std::vector<std::string> out;
  for (const auto& [id, rec] : speakers_)
    if (rec.gender == gender) out.push_back(id);
  return out;
}

ValidationReport SpeakerInventory::validate(size_t expected_utterance_count) const {
  ValidationReport report;
  if (speakers_.empty()) {
    report.add_warning("inventory", "inventory contains zero speakers");
    return report;
  }
  for (const auto& [id, rec] : speakers_) {
    if (rec.utterance_ids.size() < expected_utterance_count) {
      report.add_error("inventory",
                       "speaker " + id + " has " +
                           std::to_string(rec.utterance_ids.size()) +
                           " utterances, expected at least " +
                           std::to_string(expected_utterance_count));
    }
  }
  return report;
}

AnnotationSet parse_annotations(std::istream& in,
                                const DescriptorVocabulary& vocabulary,
                                const SpeakerInventory& speakers) {
  AnnotationSet set;
  set.vocabulary = vocabulary;
  set.speakers = speakers;

  std::set<std::string> seen_triples;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const std::string where = "annotations:" + std::to_string(lineno) + ": ";
    std::vector<std::string> cols = split(t, '\t');
    if (cols.size() != 3)
      fail(ErrorCode::parse, where + "expected 3 tab-separated columns, got " +
                                 std::to_string(cols.size()));

    OrderedPairAnnotation pair;
    pair.weaker_speaker = trim(cols[0]);
    pair.stronger_speaker = trim(cols[1]);

    const SpeakerRecord* weaker = speakers.find(pair.weaker_speaker);
    if (!weaker)
      fail(ErrorCode::unknown_speaker, where + "unknown speaker '" + pair.weaker_speaker + "'");
    const SpeakerRecord* stronger = speakers.find(pair.stronger_speaker);
    if (!stronger)
      fail(ErrorCode::unknown_speaker, where + "unknown speaker '" + pair.stronger_speaker + "'");
    if (pair.weaker_speaker == pair.stronger_speaker)
      fail(ErrorCode::parse, where + "pair references the same speaker twice ('" +
                                 pair.weaker_speaker + "')");
    if (weaker->gender != stronger->gender)
      fail(ErrorCode::gender_violation,
           where + "cross-gender pair " + pair.weaker_speaker + " (" +
               gender_name(weaker->gender) + ") / " + pair.stronger_speaker +
               " (" + gender_name(stronger->gender) + ")");

    std::vector<std::string> raw = split(cols[2], ',');
    for (const std::string& r : raw) {
      std::string name = lower(trim(r));
      if (name.empty()) continue;
      if (!vocabulary.contains(name))
        fail(ErrorCode::unknown_descriptor, where + "unknown descriptor '" + name + "'");
      if (!vocabulary.allowed_for(name, weaker->gender))
        fail(ErrorCode::gender_violation,
             where + "descriptor '" + name + "' is not valid for " +
                 gender_name(weaker->gender) + " speakers");
      pair.descriptors.push_back(std::move(name));
    }
    if (pair.descriptors.empty() || pair.descriptors.size() > 3)
      fail(ErrorCode::descriptor_count,
           where + "pair carries " + std::to_string(pair.descriptors.size()) +
               " descriptors, expected 1..3");
    for (const std::string& d : pair.descriptors) {
      std::string key = pair.weaker_speaker + "\t" + pair.stronger_speaker + "\t" + d;
      if (!seen_triples.insert(key).second)
        fail(ErrorCode::duplicate_triple,
             where + "duplicate triple (" + pair.weaker_speaker + ", " +
                 pair.stronger_speaker + ", " + d + ")");
    }
    // Duplicate descriptor within one row is also a duplicate triple, caught
    // above, so at this point descriptors are distinct.
    set.pairs.push_back(std::move(pair));
  }
  return set;
}

std::string serialize_annotations(const AnnotationSet& annotations) {
  std::ostringstream out;
  for (const OrderedPairAnnotation& pair : annotations.pairs) {
    out << pair.weaker_speaker << '\t' << pair.stronger_speaker << '\t'
        << join(pair.descriptors, ",") << '\n';
  }
  return out.str();
}

std::map<std::string, double> descriptor_distribution(
    const AnnotationSet& annotations) {
  if (annotations.pairs.empty())
    fail(ErrorCode::empty_annotation_set,
         "descriptor distribution of an empty annotation set");
  std::map<std::string, size_t> counts;
  size_t total = 0;
  for (const OrderedPairAnnotation& pair : annotations.pairs) {
    for (const std::string& d : pair.descriptors) {
      ++counts[d];
      ++total;
    }
  }
  std::map<std::string, double> out;
  for (const auto& [name, count] : counts)
    out[name] = 100.0 * static_cast<double>(count) / static_cast<double>(total);
  return out;
}

}  // namespace vtad
