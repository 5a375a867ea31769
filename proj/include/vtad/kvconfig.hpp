// include/vtad/kvconfig.hpp

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

// Run configuration: `key = value` file, overridden by CLI-style
// `key=value` strings (flags > file > defaults). Unknown keys are rejected.
// Every run artifact embeds digest(): reproducibility disputes are config
// disputes, so the digest covers exactly the keys that shape results (not
// output locations, labels or post-hoc scoring switches).

#ifndef VTAD_KVCONFIG_HPP_
#define VTAD_KVCONFIG_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vtad/common.hpp"

namespace vtad {

class RunConfig {
 public:
  // Defaults only.
  RunConfig();

  static RunConfig load(const std::optional<std::filesystem::path>& config_file,
                        const std::vector<std::string>& overrides);

  const std::string& get(const std::string& key) const;
  uint64_t get_u64(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<std::string> get_list(const std::string& key) const;
  bool is_set(const std::string& key) const;  // non-empty value

  void set(const std::string& key, const std::string& value);

  // Every effective key=value pair, sorted by key (echoed into run logs).
  std::string effective_text() const;
  // FNV-1a hex digest over the reproducibility-relevant keys.
  std::string digest() const;

  static const std::vector<std::pair<std::string, std::string>>& defaults();

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace vtad

#endif  // VTAD_KVCONFIG_HPP_
