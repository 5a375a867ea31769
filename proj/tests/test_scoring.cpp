// tests/test_scoring.cpp

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

#include <doctest.h>

#include <cmath>
#include <sstream>

#include "support/oracles.hpp"
#include "vtad/rng.hpp"
#include "vtad/scoring.hpp"

using namespace vtad;
using vtad_test::eer_oracle;

namespace {

std::vector<std::pair<double, int>> scored_of(std::vector<double> pos,
                                              std::vector<double> neg) {
  std::vector<std::pair<double, int>> out;
  for (double s : pos) out.push_back({s, 1});
  for (double s : neg) out.push_back({s, 0});
  return out;
}

// A key with two (gender, descriptor) cells following the trial-id scheme.
TrialList two_cell_key(size_t pos_per_cell, size_t neg_per_cell) {
  TrialList key;
  key.split_ref = "test";
  const char* prefixes[] = {"unseen-male-bright-0-", "unseen-female-low-0-"};
  for (const char* prefix : prefixes) {
    for (size_t i = 0; i < pos_per_cell + neg_per_cell; ++i) {
      TrialItem item;
      item.trial_id = std::string(prefix) + std::to_string(i);
      item.utterance_first = "a_" + std::to_string(i);
      item.utterance_second = "b_" + std::to_string(i);
      item.descriptor = std::string(prefix).find("bright") != std::string::npos
                            ? "bright"
                            : "low";
      item.label = i < pos_per_cell ? 1 : 0;
      key.items.push_back(std::move(item));
    }
  }
  return key;
}

}  // namespace

TEST_CASE("EER on hand-derived score sets") {
  // Perfect separation.
  CHECK(compute_eer(scored_of({0.9, 0.8}, {0.2, 0.1})) == doctest::Approx(0.0));
  // Brute-force by hand: at thresholds in (0.3, 0.7], FAR = FRR = 1/3.
  CHECK(compute_eer(scored_of({0.9, 0.8, 0.3}, {0.7, 0.2, 0.1})) ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  // Total inversion: positives all below negatives.
  CHECK(compute_eer(scored_of({0.1, 0.2}, {0.8, 0.9})) == doctest::Approx(1.0));
}

TEST_CASE("EER requires both classes") {
  CHECK_THROWS_AS(compute_eer(scored_of({0.9, 0.8}, {})), Error);
  CHECK_THROWS_AS(compute_eer(scored_of({}, {0.1})), Error);
}

TEST_CASE("EER matches the exhaustive oracle on random score sets") {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    size_t n_pos = 5 + rng.below(500);
    size_t n_neg = 5 + rng.below(500);
    std::vector<std::pair<double, int>> scored;
    double shift = rng.uniform();  // overlap varies per draw
    for (size_t i = 0; i < n_pos; ++i) scored.push_back({rng.uniform() + shift, 1});
    for (size_t i = 0; i < n_neg; ++i) scored.push_back({rng.uniform(), 0});
    // Quantize a third of the sets to force score ties.
    if (trial % 3 == 0)
      for (auto& [s, l] : scored) s = std::floor(s * 20.0) / 20.0;
    double fast = compute_eer(scored);
    double slow = eer_oracle(scored);
    CHECK(std::abs(fast - slow) < 1e-9);
    CHECK(fast >= 0.0);
    CHECK(fast <= 1.0);
  }
}

TEST_CASE("EER is invariant under strictly increasing transforms") {
  Rng rng(7);
  std::vector<std::pair<double, int>> scored;
  for (int i = 0; i < 400; ++i)
    scored.push_back({rng.normal(), static_cast<int>(rng.below(2))});
  double base = compute_eer(scored);

  auto transformed = scored;
  for (auto& [s, l] : transformed) s = 3.0 * s + 11.0;
  CHECK(compute_eer(transformed) == doctest::Approx(base).epsilon(1e-12));
  transformed = scored;
  for (auto& [s, l] : transformed) s = std::exp(s);
  CHECK(compute_eer(transformed) == doctest::Approx(base).epsilon(1e-12));
  transformed = scored;
  for (auto& [s, l] : transformed) s = s * s * s;
  CHECK(compute_eer(transformed) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("EER is symmetric under label flip with score negation") {
  Rng rng(13);
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<std::pair<double, int>> scored;
    for (int i = 0; i < 200; ++i)
      scored.push_back({rng.uniform() + 0.3 * rng.normal(),
                        static_cast<int>(rng.below(2))});
    auto flipped = scored;
    for (auto& [s, l] : flipped) {
      s = -s;
      l = 1 - l;
    }
    CHECK(std::abs(compute_eer(scored) - compute_eer(flipped)) < 1e-9);
  }
}

TEST_CASE("chance-level scores give EER near one half") {
  Rng rng(31337);
  std::vector<std::pair<double, int>> scored;
  for (int i = 0; i < 10000; ++i)
    scored.push_back({rng.uniform(), static_cast<int>(rng.below(2))});
  CHECK(std::abs(compute_eer(scored) - 0.5) <= 0.02);
}

TEST_CASE("ACC counts matching decisions") {
  std::vector<std::pair<int, int>> all_correct(400);
  for (size_t i = 0; i < 400; ++i) {
    int label = i < 100 ? 1 : 0;
    all_correct[i] = {label, label};
  }
  CHECK(compute_acc(all_correct) == doctest::Approx(1.0));

  std::vector<std::pair<int, int>> three_of_four = {{1, 1}, {0, 0}, {1, 1}, {1, 0}};
  CHECK(compute_acc(three_of_four) == doctest::Approx(0.75));

  // All-1 decisions on a standard 100/300 cell accept only the positives.
  std::vector<std::pair<int, int>> all_one(400);
  for (size_t i = 0; i < 400; ++i) all_one[i] = {1, i < 100 ? 1 : 0};
  CHECK(compute_acc(all_one) == doctest::Approx(0.25));

  CHECK_THROWS_AS(compute_acc({}), Error);
}

TEST_CASE("ACC recomputed from scores at the threshold matches decisions") {
  Rng rng(5);
  std::vector<std::pair<double, int>> scored;
  for (int i = 0; i < 500; ++i) scored.push_back({rng.uniform(), static_cast<int>(rng.below(2))});
  const double tau = 0.5;
  std::vector<std::pair<int, int>> from_scores, submitted;
  for (const auto& [s, l] : scored) {
    int decision = s >= tau ? 1 : 0;
    from_scores.push_back({decision, l});
    submitted.push_back({decision, l});
  }
  CHECK(compute_acc(from_scores) == doctest::Approx(compute_acc(submitted)));
}

TEST_CASE("submission files parse and round-trip") {
  std::string text =
      "#team=tteam track=unseen system=sys1\n"
      "unseen-male-bright-0-0\t0.73\t1\n"
      "unseen-male-bright-0-1\tNA\t0\n"
      "unseen-male-bright-0-2\t0.25\tNA\n";
  std::istringstream in(text);
  SubmissionFile sub = SubmissionFile::parse(in);
  CHECK(sub.team == "tteam");
  CHECK(sub.track == "unseen");
  CHECK(sub.system == "sys1");
  REQUIRE(sub.entries.size() == 3);
  CHECK(sub.entries[0].score == doctest::Approx(0.73));
  CHECK(sub.entries[0].decision == 1);
  CHECK_FALSE(sub.entries[1].score.has_value());
  CHECK_FALSE(sub.entries[2].decision.has_value());

  std::istringstream again(sub.serialize());
  CHECK(SubmissionFile::parse(again) == sub);
}

TEST_CASE("submission validation catches every domain violation") {
  TrialList key = two_cell_key(2, 2);

  SubmissionFile good;
  for (const TrialItem& item : key.items)
    good.entries.push_back({item.trial_id, 0.5, 1});
  CHECK(validate_submission(good, key).passed());

  SUBCASE("missing trial id") {
    SubmissionFile sub = good;
    std::string dropped = sub.entries.back().trial_id;
    sub.entries.pop_back();
    ValidationReport report = validate_submission(sub, key);
    CHECK_FALSE(report.passed());
    CHECK(report.errors[0].message.find(dropped) != std::string::npos);
  }
  SUBCASE("duplicate trial id") {
    SubmissionFile sub = good;
    sub.entries.push_back(sub.entries.front());
    CHECK_FALSE(validate_submission(sub, key).passed());
  }
  SUBCASE("unknown trial id") {
    SubmissionFile sub = good;
    sub.entries.push_back({"bogus-id", 0.5, 1});
    CHECK_FALSE(validate_submission(sub, key).passed());
  }
  SUBCASE("NaN score names the row") {
    SubmissionFile sub = good;
    sub.entries[1].score = std::nan("");
    ValidationReport report = validate_submission(sub, key);
    CHECK_FALSE(report.passed());
    CHECK(report.errors[0].message.find(sub.entries[1].trial_id) != std::string::npos);
  }
  SUBCASE("decision outside {0,1}") {
    SubmissionFile sub = good;
    sub.entries[0].decision = 2;
    CHECK_FALSE(validate_submission(sub, key).passed());
  }
  SUBCASE("neither score nor decision") {
    SubmissionFile sub = good;
    sub.entries[0].score.reset();
    sub.entries[0].decision.reset();
    CHECK_FALSE(validate_submission(sub, key).passed());
  }
}

TEST_CASE("scoring a perfect submission") {
  TrialList key = two_cell_key(10, 30);
  SubmissionFile sub;
  for (const TrialItem& item : key.items)
    sub.entries.push_back({item.trial_id, item.label == 1 ? 0.9 : 0.1, item.label});

  MetricsReport report = score_against_key(sub, key);
  REQUIRE(report.per_cell.size() == 2);
  for (const auto& [cell, metrics] : report.per_cell) {
    REQUIRE(metrics.eer.has_value());
    REQUIRE(metrics.acc.has_value());
    CHECK(*metrics.eer == doctest::Approx(0.0));
    CHECK(*metrics.acc == doctest::Approx(1.0));
    CHECK(metrics.positives == 10);
    CHECK(metrics.negatives == 30);
  }
  CHECK(*report.overall_acc == doctest::Approx(1.0));
  CHECK(*report.overall_eer == doctest::Approx(0.0));
}

TEST_CASE("decisions-only submissions score ACC with EER absent") {
  TrialList key = two_cell_key(5, 15);
  SubmissionFile sub;
  for (const TrialItem& item : key.items)
    sub.entries.push_back({item.trial_id, std::nullopt, item.label});
  MetricsReport report = score_against_key(sub, key);
  for (const auto& [cell, metrics] : report.per_cell) {
    CHECK_FALSE(metrics.eer.has_value());
    CHECK(metrics.acc == doctest::Approx(1.0));
  }
  CHECK_FALSE(report.overall_eer.has_value());
  CHECK(report.eer_absent_cells.size() == 2);
  CHECK(report.overall_acc == doctest::Approx(1.0));
}

TEST_CASE("overall metrics are unweighted cell means") {
  TrialList key = two_cell_key(5, 5);
  // Cell 1: 9/10 correct; cell 2: 7/10 correct -> overall 0.8.
  SubmissionFile sub;
  size_t wrong_budget_cell1 = 1, wrong_budget_cell2 = 3;
  for (const TrialItem& item : key.items) {
    bool cell1 = item.trial_id.find("male-bright") != std::string::npos;
    size_t& budget = cell1 ? wrong_budget_cell1 : wrong_budget_cell2;
    int decision = item.label;
    if (budget > 0) {
      decision = 1 - decision;
      --budget;
    }
    sub.entries.push_back({item.trial_id, std::nullopt, decision});
  }
  MetricsReport report = score_against_key(sub, key);
  CHECK(*report.overall_acc == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("aggregation is linear: overall equals mean regardless of cell size") {
  Rng rng(99);
  for (int round = 0; round < 20; ++round) {
    TrialList key;
    std::vector<std::string> cells = {"unseen-male-bright-0-",
                                      "unseen-female-low-0-",
                                      "unseen-male-pure-0-"};
    SubmissionFile sub;
    for (const std::string& prefix : cells) {
      size_t n = 4 + rng.below(40);
      for (size_t i = 0; i < n; ++i) {
        TrialItem item;
        item.trial_id = prefix + std::to_string(i);
        item.utterance_first = "a";
        item.utterance_second = "b";
        item.descriptor = split(prefix, '-')[2];
        item.label = static_cast<int>(rng.below(2));
        sub.entries.push_back(
            {item.trial_id, std::nullopt, static_cast<int>(rng.below(2))});
        key.items.push_back(std::move(item));
      }
    }
    MetricsReport report = score_against_key(sub, key);
    double mean = 0.0;
    for (const auto& [cell, metrics] : report.per_cell) mean += *metrics.acc;
    mean /= static_cast<double>(report.per_cell.size());
    CHECK(*report.overall_acc == doctest::Approx(mean).epsilon(1e-12));
  }
}

TEST_CASE("scoring an invalid submission throws ValidationFailed") {
  TrialList key = two_cell_key(2, 2);
  SubmissionFile sub;  // empty: every key id missing
  try {
    score_against_key(sub, key);
    FAIL("expected ValidationFailed");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::validation_failed);
  }
}

TEST_CASE("single-class cells surface as absent EER, not a crash") {
  TrialList key = two_cell_key(3, 3);
  SubmissionFile sub;
  for (const TrialItem& item : key.items) {
    // Scores only on positives of the bright cell.
    bool scored = item.label == 1 || item.trial_id.find("low") != std::string::npos;
    sub.entries.push_back({item.trial_id,
                           scored && item.trial_id.find("bright") != std::string::npos
                               ? std::optional<double>(0.6)
                               : (item.trial_id.find("low") != std::string::npos
                                      ? std::optional<double>(0.4)
                                      : std::nullopt),
                           item.label});
  }
  MetricsReport report = score_against_key(sub, key);
  CellKey bright{"male", "bright"};
  CHECK_FALSE(report.per_cell.at(bright).eer.has_value());
  CHECK(report.eer_absent_cells.size() >= 1);
}

TEST_CASE("pooled EER is available behind the flag") {
  TrialList key = two_cell_key(10, 10);
  SubmissionFile sub;
  Rng rng(3);
  for (const TrialItem& item : key.items)
    sub.entries.push_back({item.trial_id,
                           item.label == 1 ? 0.6 + 0.4 * rng.uniform()
                                           : 0.4 * rng.uniform(),
                           item.label});
  MetricsReport without = score_against_key(sub, key, false);
  CHECK_FALSE(without.pooled_eer.has_value());
  MetricsReport with = score_against_key(sub, key, true);
  REQUIRE(with.pooled_eer.has_value());
  CHECK(*with.pooled_eer == doctest::Approx(0.0));
}

TEST_CASE("reports render stable machine-readable keys") {
  TrialList key = two_cell_key(2, 2);
  SubmissionFile sub;
  for (const TrialItem& item : key.items)
    sub.entries.push_back({item.trial_id, item.label == 1 ? 0.9 : 0.1, item.label});
  MetricsReport report = score_against_key(sub, key);
  std::string kv = report.to_kv();
  CHECK(kv.find("cells = 2") != std::string::npos);
  CHECK(kv.find("acc.male.bright = 1.000000") != std::string::npos);
  CHECK(kv.find("eer.female.low = 0.000000") != std::string::npos);
  CHECK(kv.find("acc.overall = 1.000000") != std::string::npos);
  CHECK(kv.find("n_pos.male.bright = 2") != std::string::npos);
}
