// src/kvconfig.cpp

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

#include "vtad/kvconfig.hpp"

#include <sstream>

namespace vtad {

namespace {

// key, default value. Keys outside this registry are config errors.
const std::vector<std::pair<std::string, std::string>> kDefaults = {
    {"out", "out"},
    {"cache", ""},  // empty: <out>/cache
    {"seed", "1"},
    {"track", "unseen"},
    {"encoder", "synthetic"},
    {"force", "false"},
    {"corpus.annotations", ""},
    {"corpus.inventory", ""},
    {"corpus.root", ""},
    {"corpus.genders", ""},
    {"corpus.vocabulary", ""},
    {"corpus.expected_utterances", "20"},
    {"protocol.eval_descriptors.male", "bright,thin,low,magnetic,pure"},
    {"protocol.eval_descriptors.female", "bright,thin,low,coarse,slim"},
    {"protocol.train_speakers.male", "29"},
    {"protocol.train_speakers.female", "49"},
    {"protocol.eval_speakers.male", "0"},
    {"protocol.eval_speakers.female", "0"},
    {"protocol.eval_utterances", "20"},
    {"protocol.eval_pairs_per_descriptor", "10"},
    {"protocol.positives_per_cell", "100"},
    {"protocol.negatives_per_cell", "300"},
    {"diffnet.hidden", "256,256"},
    {"diffnet.batch_norm", "true"},
    {"diffnet.activation", "tanh"},
    {"diffnet.threshold", "0.5"},
    {"diffnet.learning_rate", "0.001"},
    {"diffnet.batch_size", "64"},
    {"diffnet.epochs", "15"},
    {"diffnet.optimizer", "adam"},
    {"diffnet.momentum", "0.9"},
    {"diffnet.pairs_per_annotation", "8"},
    {"diffnet.head", "per_gender"},
    {"synth.speakers_per_gender", "50"},
    {"synth.utterances_per_speaker", "26"},
    {"synth.dim", "64"},
    {"synth.noise_scale", "0.05"},
    {"synth.margin", "0.3"},
    {"train.resume", ""},
    {"infer.model_dir", ""},   // empty: <out>
    {"infer.trials", ""},      // empty: <out>/trials_participant.tsv
    {"score.submission", ""},  // empty: <out>/submission.tsv
    {"score.key", ""},         // empty: <out>/trials_key.tsv
    {"score.pooled_eer", "false"},
    {"validate.submission", ""},
    {"validate.key", ""},
    {"submission.team", "baseline"},
    {"submission.system", "diffnet"},
};

// Prefixes/keys that shape run outputs and therefore feed the digest.
// Path-valued keys stay out: the digest must be identical across machines
// and working directories (mixing embedding files is caught separately by
// the encoder_id binding).
bool in_digest(const std::string& key) {
  static const std::vector<std::string> path_keys = {
      "corpus.annotations", "corpus.inventory", "corpus.root",
      "corpus.genders", "corpus.vocabulary"};
  for (const std::string& p : path_keys)
    if (key == p) return false;
  static const std::vector<std::string> prefixes = {
      "seed", "track", "encoder", "corpus.", "protocol.", "diffnet.", "synth."};
  for (const std::string& p : prefixes) {
    if (key == p || starts_with(key, p)) return true;
  }
  return false;
}

// Reduce the encoder spec to its scheme and switches, dropping the path.
std::string digest_value(const std::string& key, const std::string& value) {
  if (key != "encoder") return value;
  std::string core = value;
  std::string suffix;
  if (core.size() > 7 && core.substr(core.size() - 7) == ",l2norm") {
    suffix = "+l2norm";
    core = core.substr(0, core.size() - 7);
  }
  auto colon = core.find(':');
  if (colon != std::string::npos) core = core.substr(0, colon);
  return core + suffix;
}

}  // namespace

const std::vector<std::pair<std::string, std::string>>& RunConfig::defaults() {
  return kDefaults;
}

RunConfig::RunConfig() {
  for (const auto& [key, value] : kDefaults) values_[key] = value;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end())
    fail(ErrorCode::config, "unknown configuration key '" + key + "'");
  it->second = value;
}

RunConfig RunConfig::load(const std::optional<std::filesystem::path>& config_file,
                          const std::vector<std::string>& overrides) {
  RunConfig cfg;
  if (config_file) {
    std::istringstream in(read_text_file(*config_file));
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::string t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      auto eq = t.find('=');
      if (eq == std::string::npos)
        fail(ErrorCode::config, config_file->string() + ":" + std::to_string(lineno) +
                                    ": expected key = value");
      std::string key = trim(t.substr(0, eq));
      std::string value = trim(t.substr(eq + 1));
      try {
        cfg.set(key, value);
      } catch (const Error& e) {
        fail(ErrorCode::config, config_file->string() + ":" + std::to_string(lineno) +
                                    ": " + e.what());
      }
    }
  }
  for (const std::string& ov : overrides) {
    auto eq = ov.find('=');
    if (eq == std::string::npos)
      fail(ErrorCode::config, "override '" + ov + "' is not of the form key=value");
    cfg.set(trim(ov.substr(0, eq)), trim(ov.substr(eq + 1)));
  }
  return cfg;
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end())
    fail(ErrorCode::config, "unknown configuration key '" + key + "'");
  return it->second;
}

uint64_t RunConfig::get_u64(const std::string& key) const {
  uint64_t v = 0;
  if (!parse_u64(get(key), v))
    fail(ErrorCode::config, "configuration key '" + key + "' = '" + get(key) +
                                "' is not an unsigned integer");
  return v;
}

double RunConfig::get_double(const std::string& key) const {
  double v = 0.0;
  if (!parse_double(get(key), v))
    fail(ErrorCode::config,
         "configuration key '" + key + "' = '" + get(key) + "' is not a number");
  return v;
}

bool RunConfig::get_bool(const std::string& key) const {
  std::string v = lower(get(key));
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  fail(ErrorCode::config,
       "configuration key '" + key + "' = '" + get(key) + "' is not a boolean");
}

std::vector<std::string> RunConfig::get_list(const std::string& key) const {
  std::vector<std::string> out;
  for (const std::string& tok : split(get(key), ',')) {
    std::string t = trim(tok);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

bool RunConfig::is_set(const std::string& key) const { return !get(key).empty(); }

std::string RunConfig::effective_text() const {
  std::ostringstream out;
  for (const auto& [key, value] : values_) out << key << " = " << value << "\n";
  return out.str();
}

std::string RunConfig::digest() const {
  std::ostringstream out;
  for (const auto& [key, value] : values_)
    if (in_digest(key)) out << key << "=" << digest_value(key, value) << "\n";
  return to_hex(fnv1a64(out.str()));
}

}  // namespace vtad
