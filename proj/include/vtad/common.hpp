// include/vtad/common.hpp

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

#ifndef VTAD_COMMON_HPP_
#define VTAD_COMMON_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vtad {

// Error codes shared with the C API (include/vtad.h mirrors this list).
enum class ErrorCode {
  ok = 0,
  io,
  parse,
  unknown_speaker,
  unknown_descriptor,
  gender_violation,
  descriptor_count,
  duplicate_triple,
  duplicate_speaker,
  duplicate_utterance,
  empty_annotation_set,
  empty_input,
  empty_training_set,
  insufficient_speakers,
  insufficient_utterances,
  descriptor_uncovered,
  negative_pool_exhausted,
  dimension_mismatch,
  encoder_mismatch,
  missing_embedding,
  unknown_descriptor_node,
  nonfinite_loss,
  all_masked,
  corrupt_model,
  version_mismatch,
  single_class,
  utterance_not_found,
  encoder_load_failure,
  audio_decode_failure,
  validation_failed,
  config,
  digest_mismatch,
  internal,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

// FNV-1a, used for seeding, content digests and container checksums.
uint64_t fnv1a64(std::string_view bytes,
                 uint64_t basis = 14695981039346656037ull);
uint64_t fnv1a64_mix(uint64_t seed, std::string_view key);
std::string to_hex(uint64_t value);

std::string trim(std::string_view s);
std::string lower(std::string_view s);
std::vector<std::string> split(std::string_view s, char delim);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
bool starts_with(std::string_view s, std::string_view prefix);

std::string format_double(double value, int precision);
// Shortest decimal form that round-trips bit-exactly through parse_double.
std::string format_double_shortest(double value);
bool parse_double(std::string_view s, double& out);
bool parse_u64(std::string_view s, uint64_t& out);
bool parse_i64(std::string_view s, int64_t& out);

std::string read_text_file(const std::filesystem::path& path);
// Write-then-rename so readers never observe a partial file.
void write_text_file(const std::filesystem::path& path,
                     std::string_view content);
std::string read_binary_file(const std::filesystem::path& path);
void write_binary_file(const std::filesystem::path& path,
                       std::string_view bytes);

struct ValidationIssue {
  std::string category;
  std::string message;
  bool operator==(const ValidationIssue&) const = default;
};

// Report-only validation outcome. A report passes when it has no errors;
// warnings carry degenerate-but-legal observations (e.g. empty inventory).
struct ValidationReport {
  std::vector<ValidationIssue> errors;
  std::vector<ValidationIssue> warnings;

  bool passed() const { return errors.empty(); }
  void add_error(std::string category, std::string message);
  void add_warning(std::string category, std::string message);
  std::string to_text() const;
};

enum class Gender { male, female };

const char* gender_name(Gender g);
std::optional<Gender> parse_gender(std::string_view token);

enum class Track { seen, unseen };

const char* track_name(Track t);
std::optional<Track> parse_track(std::string_view token);

}  // namespace vtad

#endif  // VTAD_COMMON_HPP_
