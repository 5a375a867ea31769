// src/scoring.cpp

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

#include "vtad/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <set>
#include <sstream>

namespace vtad {

double compute_eer(std::span<const std::pair<double, int>> scored) {
  std::vector<double> pos, neg;
  for (const auto& [score, label] : scored) {
    if (!std::isfinite(score))
      fail(ErrorCode::parse, "non-finite score in EER input");
    if (label == 1)
      pos.push_back(score);
    else
      neg.push_back(score);
  }
  if (pos.empty() || neg.empty())
    fail(ErrorCode::single_class,
         "EER needs both classes: " + std::to_string(pos.size()) +
             " positives, " + std::to_string(neg.size()) + " negatives");
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());

  std::vector<double> thresholds;
  thresholds.reserve(pos.size() + neg.size());
  thresholds.insert(thresholds.end(), pos.begin(), pos.end());
  thresholds.insert(thresholds.end(), neg.begin(), neg.end());
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());

  const double n_pos = static_cast<double>(pos.size());
  const double n_neg = static_cast<double>(neg.size());

  // Accept iff score >= t. Sweeping t downward, FAR rises 0 -> 1 while FRR
  // falls 1 -> 0; the difference is monotone, so the crossing is unique.
  double prev_far = 0.0, prev_frr = 1.0;  // virtual t = +inf
  for (double t : thresholds) {
    auto ge_neg = neg.end() - std::lower_bound(neg.begin(), neg.end(), t);
    auto lt_pos = std::lower_bound(pos.begin(), pos.end(), t) - pos.begin();
    double far = static_cast<double>(ge_neg) / n_neg;
    double frr = static_cast<double>(lt_pos) / n_pos;
    if (far >= frr) {
      if (far == frr) return far;
      double denom = (far - prev_far) - (frr - prev_frr);
      double alpha = (prev_frr - prev_far) / denom;
      return prev_far + alpha * (far - prev_far);
    }
    prev_far = far;
    prev_frr = frr;
  }
  // Virtual t = -inf point: FAR = 1, FRR = 0.
  double denom = (1.0 - prev_far) - (0.0 - prev_frr);
  double alpha = (prev_frr - prev_far) / denom;
  return prev_far + alpha * (1.0 - prev_far);
}

double compute_acc(std::span<const std::pair<int, int>> decided) {
  if (decided.empty()) fail(ErrorCode::empty_input, "ACC of an empty decision list");
  size_t correct = 0;
  for (const auto& [decision, label] : decided)
    if (decision == label) ++correct;
  return static_cast<double>(correct) / static_cast<double>(decided.size());
}

SubmissionFile SubmissionFile::parse(std::istream& in) {
  SubmissionFile sub;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      if (starts_with(t, "#config_digest=")) {
        sub.config_digest = t.substr(15);
        continue;
      }
      // Metadata header: #team=<token> track=<...> system=<label>
      for (const std::string& tok : split(t.substr(1), ' ')) {
        auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        std::string key = tok.substr(0, eq), value = tok.substr(eq + 1);
        if (key == "team") sub.team = value;
        else if (key == "track") sub.track = value;
        else if (key == "system") sub.system = value;
      }
      continue;
    }
    std::vector<std::string> cols = split(t, '\t');
    if (cols.size() != 3)
      fail(ErrorCode::parse, "submission:" + std::to_string(lineno) +
                                 ": expected 3 tab-separated columns, got " +
                                 std::to_string(cols.size()));
    SubmissionEntry entry;
    entry.trial_id = trim(cols[0]);
    std::string score_tok = trim(cols[1]);
    if (lower(score_tok) != "na") {
      double s = 0.0;
      if (!parse_double(lower(score_tok), s))
        fail(ErrorCode::parse, "submission:" + std::to_string(lineno) +
                                   ": bad score '" + score_tok + "'");
      entry.score = s;
    }
    std::string dec_tok = trim(cols[2]);
    if (lower(dec_tok) != "na") {
      int64_t d = 0;
      if (!parse_i64(dec_tok, d))
        fail(ErrorCode::parse, "submission:" + std::to_string(lineno) +
                                   ": bad decision '" + dec_tok + "'");
      entry.decision = static_cast<int>(d);
    }
    sub.entries.push_back(std::move(entry));
  }
  return sub;
}

std::string SubmissionFile::serialize() const {
  std::ostringstream out;
  out << "#team=" << team << " track=" << track << " system=" << system << "\n";
  if (!config_digest.empty()) out << "#config_digest=" << config_digest << "\n";
  for (const SubmissionEntry& e : entries) {
    out << e.trial_id << '\t'
        << (e.score ? format_double_shortest(*e.score) : std::string("NA")) << '\t'
        << (e.decision ? std::to_string(*e.decision) : std::string("NA")) << '\n';
  }
  return out.str();
}

namespace {

std::string cell_label(const CellKey& key) {
  return key.gender + "." + key.descriptor;
}

std::optional<double> mean_of_present(const std::map<CellKey, CellMetrics>& cells,
                                      std::optional<double> CellMetrics::*field) {
  double sum = 0.0;
  size_t n = 0;
  for (const auto& [key, metrics] : cells) {
    if (metrics.*field) {
      sum += *(metrics.*field);
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

}  // namespace

std::string MetricsReport::to_text() const {
  std::ostringstream out;
  out << "gender      descriptor    EER       ACC       pos     neg\n";
  for (const auto& [key, m] : per_cell) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-11s %-13s %-9s %-9s %-7zu %zu\n",
                  key.gender.c_str(), key.descriptor.c_str(),
                  m.eer ? format_double(*m.eer, 4).c_str() : "--",
                  m.acc ? format_double(*m.acc, 4).c_str() : "--",
                  m.positives, m.negatives);
    out << buf;
  }
  out << "overall: EER "
      << (overall_eer ? format_double(*overall_eer, 4) : std::string("--"))
      << "  ACC "
      << (overall_acc ? format_double(*overall_acc, 4) : std::string("--"))
      << "\n";
  if (pooled_eer)
    out << "pooled EER over all scored trials: " << format_double(*pooled_eer, 4)
        << "\n";
  for (const auto& w : warnings) out << "warning: " << w << "\n";
  return out.str();
}

std::string MetricsReport::to_kv() const {
  std::ostringstream out;
  out << "cells = " << per_cell.size() << "\n";
  for (const auto& [key, m] : per_cell) {
    const std::string label = cell_label(key);
    if (m.eer) out << "eer." << label << " = " << format_double(*m.eer, 6) << "\n";
    if (m.acc) out << "acc." << label << " = " << format_double(*m.acc, 6) << "\n";
    out << "n_pos." << label << " = " << m.positives << "\n";
    out << "n_neg." << label << " = " << m.negatives << "\n";
  }
  if (overall_eer) out << "eer.overall = " << format_double(*overall_eer, 6) << "\n";
  if (overall_acc) out << "acc.overall = " << format_double(*overall_acc, 6) << "\n";
  if (pooled_eer) out << "eer.pooled = " << format_double(*pooled_eer, 6) << "\n";
  if (!eer_absent_cells.empty()) {
    std::vector<std::string> labels;
    for (const auto& key : eer_absent_cells) labels.push_back(cell_label(key));
    out << "eer.absent = " << join(labels, ",") << "\n";
  }
  return out.str();
}

ValidationReport validate_submission(const SubmissionFile& submission,
                                     const TrialList& key) {
  ValidationReport report;
  std::set<std::string> key_ids;
  for (const TrialItem& item : key.items) key_ids.insert(item.trial_id);

  std::set<std::string> seen;
  for (const SubmissionEntry& e : submission.entries) {
    if (!seen.insert(e.trial_id).second)
      report.add_error("duplicate", "trial id " + e.trial_id + " submitted twice");
    if (!key_ids.count(e.trial_id))
      report.add_error("unknown_trial",
                       "trial id " + e.trial_id + " is not in the key");
    if (!e.score && !e.decision)
      report.add_error("domain", "trial " + e.trial_id +
                                     " carries neither a score nor a decision");
    if (e.score && !std::isfinite(*e.score))
      report.add_error("domain", "trial " + e.trial_id + " has a non-finite score");
    if (e.decision && *e.decision != 0 && *e.decision != 1)
      report.add_error("domain", "trial " + e.trial_id + " has decision " +
                                     std::to_string(*e.decision) +
                                     ", expected 0 or 1");
  }
  for (const std::string& id : key_ids) {
    if (!seen.count(id))
      report.add_error("missing_trial", "key trial id " + id + " is missing");
  }
  return report;
}

MetricsReport score_against_key(const SubmissionFile& submission,
                                const TrialList& key,
                                bool include_pooled_eer) {
  ValidationReport validation = validate_submission(submission, key);
  if (!validation.passed())
    fail(ErrorCode::validation_failed,
         "submission failed validation:\n" + validation.to_text());
  if (!key.has_labels)
    fail(ErrorCode::parse, "scoring key carries no labels");

  struct KeyInfo {
    int label;
    CellKey cell;
  };
  std::map<std::string, KeyInfo> by_id;
  for (const TrialItem& item : key.items) {
    CellKey cell;
    cell.descriptor = item.descriptor;
    auto parts = parse_trial_id(item.trial_id);
    cell.gender = parts ? parts->gender : std::string("na");
    by_id[item.trial_id] = {item.label, std::move(cell)};
  }

  std::map<CellKey, std::vector<std::pair<double, int>>> scored;
  std::map<CellKey, std::vector<std::pair<int, int>>> decided;
  std::map<CellKey, CellMetrics> cells;
  std::vector<std::pair<double, int>> pooled;

  for (const SubmissionEntry& e : submission.entries) {
    const KeyInfo& info = by_id.at(e.trial_id);
    CellMetrics& m = cells[info.cell];
    if (info.label == 1)
      ++m.positives;
    else
      ++m.negatives;
    if (e.score) {
      scored[info.cell].push_back({*e.score, info.label});
      ++m.scored;
      pooled.push_back({*e.score, info.label});
    }
    if (e.decision) {
      decided[info.cell].push_back({*e.decision, info.label});
      ++m.decided;
    }
  }

  MetricsReport report;
  report.per_cell = std::move(cells);
  for (auto& [key_cell, metrics] : report.per_cell) {
    auto s_it = scored.find(key_cell);
    if (s_it != scored.end() && !s_it->second.empty()) {
      bool has_pos = false, has_neg = false;
      for (const auto& [s, l] : s_it->second) (l == 1 ? has_pos : has_neg) = true;
      if (has_pos && has_neg) {
        metrics.eer = compute_eer(s_it->second);
      } else {
        report.warnings.push_back("cell " + cell_label(key_cell) +
                                  ": scores cover a single class, EER absent");
      }
    } else {
      report.warnings.push_back("cell " + cell_label(key_cell) +
                                ": no scores submitted, EER absent");
    }
    if (!metrics.eer) report.eer_absent_cells.push_back(key_cell);
    auto d_it = decided.find(key_cell);
    if (d_it != decided.end() && !d_it->second.empty()) {
      metrics.acc = compute_acc(d_it->second);
    } else {
      report.warnings.push_back("cell " + cell_label(key_cell) +
                                ": no decisions submitted, ACC absent");
    }
  }
  report.overall_eer = mean_of_present(report.per_cell, &CellMetrics::eer);
  report.overall_acc = mean_of_present(report.per_cell, &CellMetrics::acc);
  if (include_pooled_eer && !pooled.empty()) {
    bool has_pos = false, has_neg = false;
    for (const auto& [s, l] : pooled) (l == 1 ? has_pos : has_neg) = true;
    if (has_pos && has_neg) report.pooled_eer = compute_eer(pooled);
  }
  return report;
}

}  // namespace vtad
