// include/vtad/encoders.hpp

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

// Frozen speaker-embedding abstraction. Heavyweight pretrained encoders run
// out of process and land here as precomputed-embedding files; the synthetic
// encoder provides a deterministic, analytically checkable stand-in for
// desk-scale verification. Nothing in this module ever mutates encoder
// parameters.
//
// Precomputed-embedding file (binary): magic "VTADEMB1", then
//   u32 encoder_id_len, encoder_id bytes, u32 dim, u64 count,
//   count records of (u32 utterance_id_len, utterance_id bytes,
//                     dim little-endian float32).
// Text import format: utterance_id<TAB>v1,v2,...

#ifndef VTAD_ENCODERS_HPP_
#define VTAD_ENCODERS_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vtad/common.hpp"
#include "vtad/corpus.hpp"

namespace vtad {

struct Embedding {
  std::vector<float> vector;
  std::string encoder_id;
  std::string utterance_id;

  bool operator==(const Embedding&) const = default;
};

class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::string encoder_id, size_t dim)
      : encoder_id_(std::move(encoder_id)), dim_(dim) {}

  static EmbeddingTable read_file(const std::filesystem::path& path);
  void write_file(const std::filesystem::path& path) const;
  static EmbeddingTable import_text(std::istream& in, std::string encoder_id);
  std::string export_text() const;

  void insert(const std::string& utterance_id, std::vector<float> vector);
  const std::vector<float>* find(std::string_view utterance_id) const;
  const std::map<std::string, std::vector<float>>& vectors() const { return vectors_; }
  size_t size() const { return vectors_.size(); }
  size_t dim() const { return dim_; }
  const std::string& encoder_id() const { return encoder_id_; }

  // Normalizes every vector to unit length and tags the encoder id with
  // "+l2norm" so downstream bindings record the switch.
  void apply_length_norm();

  uint64_t content_checksum() const;

 private:
  std::string encoder_id_;
  size_t dim_ = 0;
  std::map<std::string, std::vector<float>> vectors_;
};

// A frozen encoder. embed() is deterministic for a fixed utterance;
// parameter_checksum() must be invariant across any sequence of embed calls.
class Encoder {
 public:
  virtual ~Encoder() = default;
  virtual const std::string& id() const = 0;
  virtual size_t dim() const = 0;
  virtual std::vector<float> embed(const std::string& utterance_id) = 0;
  virtual uint64_t parameter_checksum() const = 0;
};

// Lookup into a precomputed table; UtteranceNotFound on a miss.
class PrecomputedEncoder : public Encoder {
 public:
  explicit PrecomputedEncoder(EmbeddingTable table);
  const std::string& id() const override { return table_.encoder_id(); }
  size_t dim() const override { return table_.dim(); }
  std::vector<float> embed(const std::string& utterance_id) override;
  uint64_t parameter_checksum() const override { return checksum_; }
  const EmbeddingTable& table() const { return table_; }

 private:
  EmbeddingTable table_;
  uint64_t checksum_ = 0;
};

// Synthetic speaker: seeded base direction plus per-descriptor intensities in
// [0,1], defined for every descriptor valid for the gender.
struct SyntheticSpeakerProfile {
  std::string speaker_id;
  Gender gender = Gender::male;
  std::map<std::string, double> attribute_intensities;
  uint64_t base_seed = 0;

  bool operator==(const SyntheticSpeakerProfile&) const = default;
};

// Deterministic synthetic embedding space. Attribute directions are the
// first |V| vectors of a seeded random orthonormal basis of dimension d, so
// per-attribute effects are orthogonal and analytically checkable. Speaker
// base vectors are unit vectors in the orthogonal complement of the
// attribute subspace:
//   e(speaker, k) = base + sum_v intensity(v) * direction(v) + noise(k)
class SyntheticSpace {
 public:
  SyntheticSpace(const DescriptorVocabulary& vocabulary, size_t dim, uint64_t seed);

  size_t dim() const { return dim_; }
  uint64_t seed() const { return seed_; }
  const std::vector<std::string>& attribute_names() const { return names_; }
  // Unit attribute direction, orthogonal to all other directions.
  std::vector<double> direction(std::string_view descriptor) const;
  std::vector<double> base_vector(const SyntheticSpeakerProfile& profile) const;

  std::vector<float> embed(const SyntheticSpeakerProfile& profile,
                           size_t utterance_index, double noise_scale) const;
  // Full-precision variant backing embed(); analytic checks use this.
  std::vector<double> embed_f64(const SyntheticSpeakerProfile& profile,
                                size_t utterance_index, double noise_scale) const;

  uint64_t parameter_checksum() const;

 private:
  size_t dim_ = 0;
  uint64_t seed_ = 0;
  std::vector<std::string> names_;
  std::map<std::string, size_t> name_index_;
  std::vector<std::vector<double>> basis_;  // orthonormal columns, row-major
};

std::vector<float> synthetic_embed(const SyntheticSpace& space,
                                   const SyntheticSpeakerProfile& profile,
                                   size_t utterance_index, double noise_scale);

// Profiles file: '#'-header with dim/noise_scale/seed, then one row per
// speaker: speaker_id<TAB>gender<TAB>base_seed<TAB>v1=x,v2=y,...
struct SyntheticProfileSet {
  size_t dim = 64;
  double noise_scale = 0.0;
  uint64_t seed = 1;
  std::vector<SyntheticSpeakerProfile> profiles;

  static SyntheticProfileSet parse(std::istream& in);
  std::string serialize() const;
  const SyntheticSpeakerProfile* find(std::string_view speaker_id) const;

  bool operator==(const SyntheticProfileSet&) const = default;
};

// On-demand synthetic encoder. Utterance ids follow <speaker>_<index>; the
// index suffix is parsed after the last underscore.
class SyntheticEncoder : public Encoder {
 public:
  SyntheticEncoder(const DescriptorVocabulary& vocabulary, SyntheticProfileSet profiles);
  const std::string& id() const override { return id_; }
  size_t dim() const override { return space_.dim(); }
  std::vector<float> embed(const std::string& utterance_id) override;
  uint64_t parameter_checksum() const override;
  const SyntheticSpace& space() const { return space_; }

 private:
  SyntheticProfileSet profiles_;
  SyntheticSpace space_;
  std::string id_;
};

// Write-once, content-addressed embedding cache: one binary record per
// utterance keyed by (encoder_id, utterance_id, content digest) plus a
// plain-text manifest per encoder. Records are written via tmp+rename.
class EmbeddingCache {
 public:
  explicit EmbeddingCache(std::filesystem::path root);

  std::optional<std::vector<float>> lookup(const std::string& encoder_id,
                                           const std::string& utterance_id,
                                           uint64_t content_digest) const;
  void store(const std::string& encoder_id, const std::string& utterance_id,
             uint64_t content_digest, const std::vector<float>& vector);

 private:
  std::filesystem::path record_path(const std::string& encoder_id,
                                    const std::string& utterance_id) const;
  std::filesystem::path root_;
};

struct EmbedCorpusResult {
  EmbeddingTable table;
  std::vector<std::pair<std::string, std::string>> failures;  // utterance, message
  size_t encoder_invocations = 0;
  size_t cache_hits = 0;
};

// Embeds every utterance exactly once across repeated runs: cache hits skip
// the encoder entirely. Per-utterance failures are collected, not fatal.
EmbedCorpusResult embed_corpus(const std::vector<std::string>& utterance_ids,
                               Encoder& encoder, EmbeddingCache* cache);

}  // namespace vtad

#endif  // VTAD_ENCODERS_HPP_
