// src/common.cpp

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

#include "vtad/common.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace vtad {

namespace fs = std::filesystem;

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::ok: return "Ok";
    case ErrorCode::io: return "IoError";
    case ErrorCode::parse: return "ParseError";
    case ErrorCode::unknown_speaker: return "UnknownSpeaker";
    case ErrorCode::unknown_descriptor: return "UnknownDescriptor";
    case ErrorCode::gender_violation: return "GenderViolation";
    case ErrorCode::descriptor_count: return "DescriptorCountViolation";
    case ErrorCode::duplicate_triple: return "DuplicateTriple";
    case ErrorCode::duplicate_speaker: return "DuplicateSpeaker";
    case ErrorCode::duplicate_utterance: return "DuplicateUtterance";
    case ErrorCode::empty_annotation_set: return "EmptyAnnotationSet";
    case ErrorCode::empty_input: return "EmptyInput";
    case ErrorCode::empty_training_set: return "EmptyTrainingSet";
    case ErrorCode::insufficient_speakers: return "InsufficientSpeakers";
    case ErrorCode::insufficient_utterances: return "InsufficientUtterances";
    case ErrorCode::descriptor_uncovered: return "DescriptorUncovered";
    case ErrorCode::negative_pool_exhausted: return "NegativePoolExhausted";
    case ErrorCode::dimension_mismatch: return "DimensionMismatch";
    case ErrorCode::encoder_mismatch: return "EncoderMismatch";
    case ErrorCode::missing_embedding: return "MissingEmbedding";
    case ErrorCode::unknown_descriptor_node: return "UnknownDescriptorNode";
    case ErrorCode::nonfinite_loss: return "NonFiniteLoss";
    case ErrorCode::all_masked: return "AllMasked";
    case ErrorCode::corrupt_model: return "CorruptModelFile";
    case ErrorCode::version_mismatch: return "VersionMismatch";
    case ErrorCode::single_class: return "SingleClassInput";
    case ErrorCode::utterance_not_found: return "UtteranceNotFound";
    case ErrorCode::encoder_load_failure: return "EncoderLoadFailure";
    case ErrorCode::audio_decode_failure: return "AudioDecodeFailure";
    case ErrorCode::validation_failed: return "ValidationFailed";
    case ErrorCode::config: return "ConfigError";
    case ErrorCode::digest_mismatch: return "DigestMismatch";
    case ErrorCode::internal: return "InternalError";
  }
  return "UnknownError";
}

void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

uint64_t fnv1a64(std::string_view bytes, uint64_t basis) {
  uint64_t h = basis;
  for (unsigned char c : bytes) {
    h ^= static_cast<uint64_t>(c);
    h *= 1099511628211ull;
  }
  return h;
}

uint64_t fnv1a64_mix(uint64_t seed, std::string_view key) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>(seed >> (8 * i));
  uint64_t h = fnv1a64(std::string_view(buf, 8));
  return fnv1a64(key, h);
}

std::string to_hex(uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(value));
  return std::string(buf);
}

std::string trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<std::string> split(std::string_view s, char delim) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t pos = s.find(delim, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(s.substr(start));
      break;
    }
    out.emplace_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

bool starts_with(std::string_view s, std::string_view prefix) {
  return s.size() >= prefix.size() && s.substr(0, prefix.size()) == prefix;
}

std::string format_double(double value, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, value);
  return std::string(buf);
}

std::string format_double_shortest(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) fail(ErrorCode::internal, "to_chars failed");
  return std::string(buf, ptr);
}

bool parse_double(std::string_view s, double& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

bool parse_u64(std::string_view s, uint64_t& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

bool parse_i64(std::string_view s, int64_t& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

static void write_file_impl(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::io, "cannot write file: " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) fail(ErrorCode::io, "short write: " + tmp.string());
  }
  fs::rename(tmp, path);
}

void write_text_file(const fs::path& path, std::string_view content) {
  write_file_impl(path, content);
}

std::string read_binary_file(const fs::path& path) {
  return read_text_file(path);
}

void write_binary_file(const fs::path& path, std::string_view bytes) {
  write_file_impl(path, bytes);
}

void ValidationReport::add_error(std::string category, std::string message) {
  errors.push_back({std::move(category), std::move(message)});
}

void ValidationReport::add_warning(std::string category, std::string message) {
  warnings.push_back({std::move(category), std::move(message)});
}

std::string ValidationReport::to_text() const {
  std::ostringstream out;
  for (const auto& e : errors) out << "ERROR " << e.category << ": " << e.message << "\n";
  for (const auto& w : warnings) out << "WARN " << w.category << ": " << w.message << "\n";
  if (errors.empty() && warnings.empty()) out << "OK\n";
  return out.str();
}

const char* gender_name(Gender g) {
  return g == Gender::male ? "male" : "female";
}

std::optional<Gender> parse_gender(std::string_view token) {
  std::string t = lower(trim(token));
  if (t == "male" || t == "m") return Gender::male;
  if (t == "female" || t == "f") return Gender::female;
  return std::nullopt;
}

const char* track_name(Track t) {
  return t == Track::seen ? "seen" : "unseen";
}

std::optional<Track> parse_track(std::string_view token) {
  std::string t = lower(trim(token));
  if (t == "seen") return Track::seen;
  if (t == "unseen") return Track::unseen;
  return std::nullopt;
}

}  // namespace vtad
