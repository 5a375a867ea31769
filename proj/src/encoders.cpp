// src/encoders.cpp

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

#include "vtad/encoders.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <sstream>

#include "vtad/bytes.hpp"
#include "vtad/rng.hpp"

namespace vtad {

namespace fs = std::filesystem;

namespace {

constexpr char kEmbeddingMagic[8] = {'V', 'T', 'A', 'D', 'E', 'M', 'B', '1'};
constexpr char kRecordMagic[8] = {'V', 'T', 'A', 'D', 'R', 'E', 'C', '1'};

}  // namespace

EmbeddingTable EmbeddingTable::read_file(const fs::path& path) {
  std::string data = read_binary_file(path);
  ByteReader reader(data, "embeddings " + path.string());
  if (reader.bytes(8) != std::string(kEmbeddingMagic, 8))
    fail(ErrorCode::parse, path.string() + " is not an embedding file");
  uint32_t id_len = reader.u32();
  std::string encoder_id = reader.bytes(id_len);
  uint32_t dim = reader.u32();
  uint64_t count = reader.u64();
  EmbeddingTable table(encoder_id, dim);
  for (uint64_t i = 0; i < count; ++i) {
    uint32_t utt_len = reader.u32();
    std::string utt = reader.bytes(utt_len);
    std::vector<float> vec(dim);
    for (uint32_t k = 0; k < dim; ++k) vec[k] = reader.f32();
    table.insert(utt, std::move(vec));
  }
  if (!reader.at_end())
    fail(ErrorCode::parse, path.string() + ": trailing bytes after last record");
  return table;
}

void EmbeddingTable::write_file(const fs::path& path) const {
  std::string out;
  out.append(kEmbeddingMagic, 8);
  put_u32(out, static_cast<uint32_t>(encoder_id_.size()));
  out += encoder_id_;
  put_u32(out, static_cast<uint32_t>(dim_));
  put_u64(out, vectors_.size());
  for (const auto& [utt, vec] : vectors_) {
    put_u32(out, static_cast<uint32_t>(utt.size()));
    out += utt;
    for (float v : vec) put_f32(out, v);
  }
  write_binary_file(path, out);
}

EmbeddingTable EmbeddingTable::import_text(std::istream& in, std::string encoder_id) {
  EmbeddingTable table(std::move(encoder_id), 0);
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::vector<std::string> cols = split(t, '\t');
    if (cols.size() != 2)
      fail(ErrorCode::parse, "embeddings:" + std::to_string(lineno) +
                                 ": expected 2 tab-separated columns");
    std::vector<float> vec;
    for (const std::string& tok : split(cols[1], ',')) {
      double v = 0.0;
      if (!parse_double(trim(tok), v))
        fail(ErrorCode::parse, "embeddings:" + std::to_string(lineno) +
                                   ": bad value '" + tok + "'");
      vec.push_back(static_cast<float>(v));
    }
    table.insert(trim(cols[0]), std::move(vec));
  }
  return table;
}

std::string EmbeddingTable::export_text() const {
  std::ostringstream out;
  for (const auto& [utt, vec] : vectors_) {
    out << utt << '\t';
    for (size_t i = 0; i < vec.size(); ++i) {
      if (i) out << ',';
      out << format_double_shortest(vec[i]);
    }
    out << '\n';
  }
  return out.str();
}

void EmbeddingTable::insert(const std::string& utterance_id, std::vector<float> vector) {
  for (float v : vector)
    if (!std::isfinite(v))
      fail(ErrorCode::parse, "embedding for " + utterance_id + " has a non-finite entry");
  if (dim_ == 0) dim_ = vector.size();
  if (vector.size() != dim_)
    fail(ErrorCode::dimension_mismatch,
         "embedding for " + utterance_id + " has dimension " +
             std::to_string(vector.size()) + ", table dimension is " +
             std::to_string(dim_));
  if (!vectors_.emplace(utterance_id, std::move(vector)).second)
    fail(ErrorCode::duplicate_utterance,
         "embedding for " + utterance_id + " inserted twice");
}

const std::vector<float>* EmbeddingTable::find(std::string_view utterance_id) const {
  auto it = vectors_.find(std::string(utterance_id));
  return it == vectors_.end() ? nullptr : &it->second;
}

void EmbeddingTable::apply_length_norm() {
  for (auto& [utt, vec] : vectors_) {
    double norm2 = 0.0;
    for (float v : vec) norm2 += static_cast<double>(v) * v;
    double norm = std::sqrt(norm2);
    if (norm == 0.0) continue;
    for (float& v : vec) v = static_cast<float>(v / norm);
  }
  encoder_id_ += "+l2norm";
}

uint64_t EmbeddingTable::content_checksum() const {
  uint64_t h = fnv1a64(encoder_id_);
  for (const auto& [utt, vec] : vectors_) {
    h = fnv1a64(utt, h);
    h = fnv1a64(std::string_view(reinterpret_cast<const char*>(vec.data()),
                                 vec.size() * sizeof(float)),
                h);
  }
  return h;
}

PrecomputedEncoder::PrecomputedEncoder(EmbeddingTable table)
    : table_(std::move(table)), checksum_(table_.content_checksum()) {}

std::vector<float> PrecomputedEncoder::embed(const std::string& utterance_id) {
  const std::vector<float>* vec = table_.find(utterance_id);
  if (!vec)
    fail(ErrorCode::utterance_not_found,
         "utterance " + utterance_id + " has no precomputed embedding (encoder " +
             table_.encoder_id() + ")");
  return *vec;
}

SyntheticSpace::SyntheticSpace(const DescriptorVocabulary& vocabulary,
                               size_t dim, uint64_t seed)
    : dim_(dim), seed_(seed) {
  names_ = vocabulary.names();
  if (names_.size() > dim_)
    fail(ErrorCode::dimension_mismatch,
         "synthetic dimension " + std::to_string(dim_) + " cannot host " +
             std::to_string(names_.size()) + " attribute directions");
  for (size_t i = 0; i < names_.size(); ++i) name_index_[names_[i]] = i;

  // Gram-Schmidt over seeded Gaussian draws; re-draw on near-degeneracy.
  Rng rng = Rng::keyed(seed, "synthetic|basis");
  basis_.reserve(names_.size());
  while (basis_.size() < names_.size()) {
    std::vector<double> v(dim_);
    for (double& x : v) x = rng.normal();
    for (const auto& b : basis_) {
      double dot = 0.0;
      for (size_t i = 0; i < dim_; ++i) dot += v[i] * b[i];
      for (size_t i = 0; i < dim_; ++i) v[i] -= dot * b[i];
    }
    double norm2 = 0.0;
    for (double x : v) norm2 += x * x;
    if (norm2 < 1e-12) continue;
    double inv = 1.0 / std::sqrt(norm2);
    for (double& x : v) x *= inv;
    basis_.push_back(std::move(v));
  }
}

std::vector<double> SyntheticSpace::direction(std::string_view descriptor) const {
  auto it = name_index_.find(lower(trim(descriptor)));
  if (it == name_index_.end())
    fail(ErrorCode::unknown_descriptor,
         "descriptor '" + std::string(descriptor) + "' has no synthetic direction");
  return basis_[it->second];
}

std::vector<double> SyntheticSpace::base_vector(const SyntheticSpeakerProfile& profile) const {
  Rng rng(fnv1a64_mix(profile.base_seed, "synthetic|base|" + profile.speaker_id));
  std::vector<double> v(dim_);
  for (double& x : v) x = rng.normal();
  // Project out the attribute subspace so bases never alias intensities.
  for (const auto& b : basis_) {
    double dot = 0.0;
    for (size_t i = 0; i < dim_; ++i) dot += v[i] * b[i];
    for (size_t i = 0; i < dim_; ++i) v[i] -= dot * b[i];
  }
  double norm2 = 0.0;
  for (double x : v) norm2 += x * x;
  if (norm2 > 1e-12) {
    double inv = 1.0 / std::sqrt(norm2);
    for (double& x : v) x *= inv;
  }
  return v;
}

std::vector<double> SyntheticSpace::embed_f64(const SyntheticSpeakerProfile& profile,
                                              size_t utterance_index,
                                              double noise_scale) const {
  if (noise_scale < 0.0)
    fail(ErrorCode::parse, "noise_scale must be nonnegative");
  std::vector<double> v = base_vector(profile);
  for (const auto& [name, intensity] : profile.attribute_intensities) {
    auto it = name_index_.find(name);
    if (it == name_index_.end())
      fail(ErrorCode::unknown_descriptor,
           "profile " + profile.speaker_id + " carries unknown descriptor '" + name + "'");
    const auto& dir = basis_[it->second];
    for (size_t i = 0; i < dim_; ++i) v[i] += intensity * dir[i];
  }
  if (noise_scale > 0.0) {
    Rng rng(fnv1a64_mix(profile.base_seed,
                        "synthetic|noise|" + profile.speaker_id + "|" +
                            std::to_string(utterance_index)));
    for (size_t i = 0; i < dim_; ++i) v[i] += noise_scale * rng.normal();
  }
  return v;
}

std::vector<float> SyntheticSpace::embed(const SyntheticSpeakerProfile& profile,
                                         size_t utterance_index,
                                         double noise_scale) const {
  std::vector<double> v = embed_f64(profile, utterance_index, noise_scale);
  std::vector<float> out(dim_);
  for (size_t i = 0; i < dim_; ++i) out[i] = static_cast<float>(v[i]);
  return out;
}

uint64_t SyntheticSpace::parameter_checksum() const {
  uint64_t h = fnv1a64("synthetic");
  h = fnv1a64(std::to_string(dim_) + "|" + std::to_string(seed_), h);
  for (const auto& b : basis_)
    h = fnv1a64(std::string_view(reinterpret_cast<const char*>(b.data()),
                                 b.size() * sizeof(double)),
                h);
  return h;
}

std::vector<float> synthetic_embed(const SyntheticSpace& space,
                                   const SyntheticSpeakerProfile& profile,
                                   size_t utterance_index, double noise_scale) {
  return space.embed(profile, utterance_index, noise_scale);
}

SyntheticProfileSet SyntheticProfileSet::parse(std::istream& in) {
  SyntheticProfileSet set;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      if (starts_with(t, "#dim=")) {
        uint64_t v = 0;
        if (parse_u64(t.substr(5), v)) set.dim = v;
      } else if (starts_with(t, "#noise_scale=")) {
        parse_double(t.substr(13), set.noise_scale);
      } else if (starts_with(t, "#seed=")) {
        parse_u64(t.substr(6), set.seed);
      }
      continue;
    }
    std::vector<std::string> cols = split(t, '\t');
    if (cols.size() != 4)
      fail(ErrorCode::parse, "profiles:" + std::to_string(lineno) +
                                 ": expected 4 tab-separated columns");
    SyntheticSpeakerProfile p;
    p.speaker_id = trim(cols[0]);
    auto gender = parse_gender(cols[1]);
    if (!gender)
      fail(ErrorCode::parse, "profiles:" + std::to_string(lineno) +
                                 ": bad gender '" + cols[1] + "'");
    p.gender = *gender;
    if (!parse_u64(trim(cols[2]), p.base_seed))
      fail(ErrorCode::parse, "profiles:" + std::to_string(lineno) +
                                 ": bad base seed '" + cols[2] + "'");
    for (const std::string& tok : split(cols[3], ',')) {
      auto eq = tok.find('=');
      if (eq == std::string::npos)
        fail(ErrorCode::parse, "profiles:" + std::to_string(lineno) +
                                   ": bad intensity token '" + tok + "'");
      double v = 0.0;
      if (!parse_double(trim(tok.substr(eq + 1)), v))
        fail(ErrorCode::parse, "profiles:" + std::to_string(lineno) +
                                   ": bad intensity value in '" + tok + "'");
      p.attribute_intensities[lower(trim(tok.substr(0, eq)))] = v;
    }
    set.profiles.push_back(std::move(p));
  }
  return set;
}

std::string SyntheticProfileSet::serialize() const {
  std::ostringstream out;
  out << "#dim=" << dim << "\n";
  out << "#noise_scale=" << format_double_shortest(noise_scale) << "\n";
  out << "#seed=" << seed << "\n";
  for (const SyntheticSpeakerProfile& p : profiles) {
    out << p.speaker_id << '\t' << gender_name(p.gender) << '\t' << p.base_seed << '\t';
    bool first = true;
    for (const auto& [name, value] : p.attribute_intensities) {
      if (!first) out << ',';
      out << name << '=' << format_double_shortest(value);
      first = false;
    }
    out << '\n';
  }
  return out.str();
}

const SyntheticSpeakerProfile* SyntheticProfileSet::find(std::string_view speaker_id) const {
  for (const SyntheticSpeakerProfile& p : profiles)
    if (p.speaker_id == speaker_id) return &p;
  return nullptr;
}

SyntheticEncoder::SyntheticEncoder(const DescriptorVocabulary& vocabulary,
                                   SyntheticProfileSet profiles)
    : profiles_(std::move(profiles)),
      space_(vocabulary, profiles_.dim, profiles_.seed),
      id_("synthetic-d" + std::to_string(profiles_.dim) + "-s" +
          std::to_string(profiles_.seed)) {}

std::vector<float> SyntheticEncoder::embed(const std::string& utterance_id) {
  auto underscore = utterance_id.rfind('_');
  if (underscore == std::string::npos)
    fail(ErrorCode::utterance_not_found,
         "utterance id '" + utterance_id + "' does not follow <speaker>_<index>");
  std::string speaker = utterance_id.substr(0, underscore);
  uint64_t index = 0;
  if (!parse_u64(utterance_id.substr(underscore + 1), index))
    fail(ErrorCode::utterance_not_found,
         "utterance id '" + utterance_id + "' has a non-numeric index suffix");
  const SyntheticSpeakerProfile* profile = profiles_.find(speaker);
  if (!profile)
    fail(ErrorCode::utterance_not_found,
         "speaker " + speaker + " has no synthetic profile");
  return space_.embed(*profile, index, profiles_.noise_scale);
}

uint64_t SyntheticEncoder::parameter_checksum() const {
  uint64_t h = space_.parameter_checksum();
  h = fnv1a64(profiles_.serialize(), h);
  return h;
}

EmbeddingCache::EmbeddingCache(fs::path root) : root_(std::move(root)) {
  fs::create_directories(root_);
}

fs::path EmbeddingCache::record_path(const std::string& encoder_id,
                                     const std::string& utterance_id) const {
  // File names are hashed: utterance ids may contain characters that are not
  // filesystem safe.
  return root_ / encoder_id / (to_hex(fnv1a64(utterance_id)) + ".emb");
}

std::optional<std::vector<float>> EmbeddingCache::lookup(
    const std::string& encoder_id, const std::string& utterance_id,
    uint64_t content_digest) const {
  fs::path path = record_path(encoder_id, utterance_id);
  if (!fs::exists(path)) return std::nullopt;
  std::string data = read_binary_file(path);
  ByteReader reader(data, "cache record " + path.string());
  if (reader.bytes(8) != std::string(kRecordMagic, 8)) return std::nullopt;
  uint32_t id_len = reader.u32();
  if (reader.bytes(id_len) != encoder_id) return std::nullopt;
  uint32_t utt_len = reader.u32();
  if (reader.bytes(utt_len) != utterance_id) return std::nullopt;
  if (reader.u64() != content_digest) return std::nullopt;
  uint32_t dim = reader.u32();
  std::vector<float> vec(dim);
  for (uint32_t i = 0; i < dim; ++i) vec[i] = reader.f32();
  return vec;
}

void EmbeddingCache::store(const std::string& encoder_id,
                           const std::string& utterance_id,
                           uint64_t content_digest,
                           const std::vector<float>& vector) {
  std::string out;
  out.append(kRecordMagic, 8);
  put_u32(out, static_cast<uint32_t>(encoder_id.size()));
  out += encoder_id;
  put_u32(out, static_cast<uint32_t>(utterance_id.size()));
  out += utterance_id;
  put_u64(out, content_digest);
  put_u32(out, static_cast<uint32_t>(vector.size()));
  for (float v : vector) put_f32(out, v);
  fs::path path = record_path(encoder_id, utterance_id);
  write_binary_file(path, out);

  fs::path manifest = root_ / encoder_id / "manifest.tsv";
  std::string entry = utterance_id + "\t" + to_hex(content_digest) + "\t" +
                      std::to_string(vector.size()) + "\t" +
                      path.filename().string() + "\n";
  std::string existing;
  if (fs::exists(manifest)) existing = read_text_file(manifest);
  write_text_file(manifest, existing + entry);
}

EmbedCorpusResult embed_corpus(const std::vector<std::string>& utterance_ids,
                               Encoder& encoder, EmbeddingCache* cache) {
  EmbedCorpusResult result;
  result.table = EmbeddingTable(encoder.id(), encoder.dim());
  for (const std::string& utt : utterance_ids) {
    uint64_t digest = fnv1a64(utt);
    if (cache) {
      auto cached = cache->lookup(encoder.id(), utt, digest);
      if (cached) {
        result.table.insert(utt, std::move(*cached));
        ++result.cache_hits;
        continue;
      }
    }
    try {
      std::vector<float> vec = encoder.embed(utt);
      ++result.encoder_invocations;
      if (cache) cache->store(encoder.id(), utt, digest, vec);
      result.table.insert(utt, std::move(vec));
    } catch (const Error& e) {
      result.failures.push_back({utt, e.what()});
    }
  }
  return result;
}

}  // namespace vtad
