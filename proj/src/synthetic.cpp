// src/synthetic.cpp

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

#include "vtad/synthetic.hpp"

#include <algorithm>
#include <cstdio>

#include "vtad/rng.hpp"

namespace vtad {

namespace {

std::string speaker_name(Gender g, size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "s%c%03zu", g == Gender::male ? 'm' : 'f',
                index + 1);
  return std::string(buf);
}

std::string utterance_name(const std::string& speaker, size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "_%04zu", index);
  return speaker + buf;
}

}  // namespace

SyntheticCorpus build_synthetic_corpus(const DescriptorVocabulary& vocabulary,
                                       const SyntheticCorpusConfig& config) {
  SyntheticCorpus corpus;
  corpus.profiles.dim = config.dim;
  corpus.profiles.noise_scale = config.noise_scale;
  corpus.profiles.seed = config.seed;

  SpeakerInventory inventory;
  for (Gender g : {Gender::male, Gender::female}) {
    std::vector<std::string> valid = vocabulary.names_for(g);
    for (size_t i = 0; i < config.speakers_per_gender; ++i) {
      SyntheticSpeakerProfile profile;
      profile.speaker_id = speaker_name(g, i);
      profile.gender = g;
      profile.base_seed = fnv1a64_mix(config.seed, "profile|" + profile.speaker_id);
      Rng rng(fnv1a64_mix(config.seed, "intensity|" + profile.speaker_id));
      for (const std::string& name : valid)
        profile.attribute_intensities[name] = rng.uniform();
      corpus.profiles.profiles.push_back(profile);

      SpeakerRecord rec;
      rec.speaker_id = profile.speaker_id;
      rec.gender = g;
      for (size_t u = 0; u < config.utterances_per_speaker; ++u)
        rec.utterance_ids.push_back(utterance_name(profile.speaker_id, u));
      inventory.add(std::move(rec));
    }
  }

  // Annotations from ground-truth intensities: within each gender, for each
  // ordered pair, annotate the descriptors whose intensity difference clears
  // the margin, keeping at most three (largest differences first).
  std::vector<OrderedPairAnnotation> pairs;
  for (Gender g : {Gender::male, Gender::female}) {
    std::vector<const SyntheticSpeakerProfile*> gender_profiles;
    for (const auto& p : corpus.profiles.profiles)
      if (p.gender == g) gender_profiles.push_back(&p);
    for (const auto* weaker : gender_profiles) {
      for (const auto* stronger : gender_profiles) {
        if (weaker == stronger) continue;
        std::vector<std::pair<double, std::string>> qualifying;
        for (const auto& [name, weak_value] : weaker->attribute_intensities) {
          double diff = stronger->attribute_intensities.at(name) - weak_value;
          if (diff >= config.margin) qualifying.push_back({diff, name});
        }
        if (qualifying.empty()) continue;
        std::sort(qualifying.begin(), qualifying.end(),
                  [](const auto& a, const auto& b) {
                    return a.first > b.first || (a.first == b.first && a.second < b.second);
                  });
        if (qualifying.size() > 3) qualifying.resize(3);
        OrderedPairAnnotation pair;
        pair.weaker_speaker = weaker->speaker_id;
        pair.stronger_speaker = stronger->speaker_id;
        for (const auto& [diff, name] : qualifying) pair.descriptors.push_back(name);
        pairs.push_back(std::move(pair));
      }
    }
  }

  corpus.annotations.vocabulary = vocabulary;
  corpus.annotations.speakers = std::move(inventory);
  corpus.annotations.pairs = std::move(pairs);

  SyntheticSpace space(vocabulary, config.dim, config.seed);
  corpus.embeddings = EmbeddingTable(
      "synthetic-d" + std::to_string(config.dim) + "-s" + std::to_string(config.seed),
      config.dim);
  for (const auto& profile : corpus.profiles.profiles) {
    for (size_t u = 0; u < config.utterances_per_speaker; ++u) {
      corpus.embeddings.insert(utterance_name(profile.speaker_id, u),
                               space.embed(profile, u, config.noise_scale));
    }
  }
  return corpus;
}

}  // namespace vtad
