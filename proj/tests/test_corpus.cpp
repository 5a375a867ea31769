// tests/test_corpus.cpp

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

#include "support/builders.hpp"
#include "vtad/corpus.hpp"
#include "vtad/rng.hpp"

using namespace vtad;

namespace {

SpeakerInventory two_speaker_inventory(Gender g1 = Gender::female,
                                       Gender g2 = Gender::female) {
  SpeakerInventory inv;
  inv.add({"p001", g1, {"p001_001", "p001_002"}});
  inv.add({"p002", g2, {"p002_001", "p002_002"}});
  return inv;
}

AnnotationSet parse_rows(const std::string& rows, const SpeakerInventory& inv) {
  std::istringstream in(rows);
  return parse_annotations(in, DescriptorVocabulary::default_vocabulary(), inv);
}

}  // namespace

TEST_CASE("default vocabulary matches the reference table") {
  DescriptorVocabulary vocab = DescriptorVocabulary::default_vocabulary();
  CHECK(vocab.size() == 18);

  REQUIRE(vocab.index_of("Bright").has_value());
  CHECK(vocab.at(*vocab.index_of("Bright")).reference_percentage == 17.10);
  CHECK(vocab.at(*vocab.index_of("thin")).reference_percentage == 13.03);
  const Descriptor& husky = vocab.at(*vocab.index_of("husky"));
  CHECK(husky.reference_percentage == 0.59);
  CHECK(husky.restriction == GenderRestriction::male_only);

  size_t female_only = 0, male_only = 0;
  for (const Descriptor& d : vocab.entries()) {
    female_only += d.restriction == GenderRestriction::female_only;
    male_only += d.restriction == GenderRestriction::male_only;
  }
  CHECK(female_only == 1);
  CHECK(male_only == 1);
  CHECK(vocab.at(*vocab.index_of("shrill")).restriction ==
        GenderRestriction::female_only);

  // Independent addition of the printed reference column gives 93.19 (the
  // column does not total 100).
  double sum = 0.0;
  for (const Descriptor& d : vocab.entries()) sum += d.reference_percentage;
  CHECK(std::abs(sum - 93.19) < 1e-9);
  CHECK(vocab.reference_percentage_sum() == doctest::Approx(sum));

  // 17 descriptors are usable per gender: one exclusive each.
  CHECK(vocab.names_for(Gender::male).size() == 17);
  CHECK(vocab.names_for(Gender::female).size() == 17);
  CHECK_FALSE(vocab.allowed_for("shrill", Gender::male));
  CHECK_FALSE(vocab.allowed_for("husky", Gender::female));
  CHECK(vocab.allowed_for("bright", Gender::male));
}

TEST_CASE("vocabulary serialization round-trips") {
  DescriptorVocabulary vocab = DescriptorVocabulary::default_vocabulary();
  std::istringstream in(vocab.serialize());
  CHECK(DescriptorVocabulary::parse(in) == vocab);
}

TEST_CASE("annotation rows map onto ordered pairs") {
  AnnotationSet set = parse_rows("p001\tp002\tBright,Low\n", two_speaker_inventory());
  REQUIRE(set.pairs.size() == 1);
  CHECK(set.pairs[0].weaker_speaker == "p001");
  CHECK(set.pairs[0].stronger_speaker == "p002");
  CHECK(set.pairs[0].descriptors == std::vector<std::string>{"bright", "low"});
}

TEST_CASE("comments, blank lines and case are normalized away") {
  AnnotationSet set = parse_rows(
      "# header comment\n"
      "\n"
      "p001\tp002\t BRIGHT , low \n",
      two_speaker_inventory());
  REQUIRE(set.pairs.size() == 1);
  CHECK(set.pairs[0].descriptors == std::vector<std::string>{"bright", "low"});
}

TEST_CASE("each malformed-row class raises its designated error") {
  SpeakerInventory female_pair = two_speaker_inventory();
  SpeakerInventory male_pair = two_speaker_inventory(Gender::male, Gender::male);
  SpeakerInventory mixed = two_speaker_inventory(Gender::female, Gender::male);

  struct Case {
    const char* rows;
    const SpeakerInventory* inventory;
    ErrorCode expected;
  };
  const Case cases[] = {
      {"p001\tp999\tbright\n", &female_pair, ErrorCode::unknown_speaker},
      {"p001\tp002\tsparkly\n", &female_pair, ErrorCode::unknown_descriptor},
      {"p001\tp002\tshrill\n", &male_pair, ErrorCode::gender_violation},
      {"p001\tp002\thusky\n", &female_pair, ErrorCode::gender_violation},
      {"p001\tp002\tbright\n", &mixed, ErrorCode::gender_violation},
      {"p001\tp002\t,\n", &female_pair, ErrorCode::descriptor_count},
      {"p001\tp002\tbright,low,thin,soft\n", &female_pair, ErrorCode::descriptor_count},
      {"p001\tp002\tbright\np001\tp002\tbright\n", &female_pair,
       ErrorCode::duplicate_triple},
      {"p001\tp002\tbright,bright\n", &female_pair, ErrorCode::duplicate_triple},
      {"p001\tp001\tbright\n", &female_pair, ErrorCode::parse},
      {"p001\tp002\n", &female_pair, ErrorCode::parse},
  };
  for (const Case& c : cases) {
    CAPTURE(c.rows);
    try {
      parse_rows(c.rows, *c.inventory);
      FAIL("expected an error for: " << c.rows);
    } catch (const Error& e) {
      CHECK(e.code() == c.expected);
    }
  }
}

TEST_CASE("errors carry the offending line number") {
  try {
    parse_rows("# comment\np001\tp002\tbright\np001\tp999\tlow\n",
               two_speaker_inventory());
    FAIL("expected UnknownSpeaker");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("annotations:3") != std::string::npos);
    CHECK(std::string(e.what()).find("p999") != std::string::npos);
  }
}

TEST_CASE("same descriptor on both pair directions is legal") {
  AnnotationSet set = parse_rows("p001\tp002\tbright\np002\tp001\tbright\n",
                                 two_speaker_inventory());
  CHECK(set.pairs.size() == 2);
}

TEST_CASE("annotation round-trip: parse, serialize, parse") {
  AnnotationSet set = vtad_test::make_toy_corpus(5, 4, 99);
  std::string text = serialize_annotations(set);
  std::istringstream in(text);
  AnnotationSet reparsed = parse_annotations(in, set.vocabulary, set.speakers);
  CHECK(reparsed == set);
  CHECK(serialize_annotations(reparsed) == text);
}

TEST_CASE("inventory round-trip and lookups") {
  SpeakerInventory inventory = vtad_test::make_inventory(4, 3);
  std::istringstream in(inventory.serialize());
  SpeakerInventory reparsed = SpeakerInventory::parse(in);
  CHECK(reparsed == inventory);
  const SpeakerRecord* rec = inventory.speaker_of_utterance("tf02_001");
  REQUIRE(rec != nullptr);
  CHECK(rec->speaker_id == "tf02");
  CHECK(inventory.speaker_of_utterance("nope") == nullptr);
  CHECK(inventory.speaker_ids(Gender::male).size() == 4);
}

TEST_CASE("inventory rejects duplicate speakers and utterances") {
  SpeakerInventory inv;
  inv.add({"a", Gender::male, {"a_1"}});
  CHECK_THROWS_AS(inv.add({"a", Gender::male, {"a_2"}}), Error);
  CHECK_THROWS_AS(inv.add({"b", Gender::male, {"a_1"}}), Error);
  CHECK_THROWS_AS(inv.add({"c", Gender::male, {"c_1", "c_1"}}), Error);
}

TEST_CASE("descriptor distribution counts mentions") {
  SpeakerInventory inv;
  inv.add({"f1", Gender::female, {"f1_1"}});
  inv.add({"f2", Gender::female, {"f2_1"}});
  inv.add({"f3", Gender::female, {"f3_1"}});

  SUBCASE("single pair, single descriptor takes 100%") {
    AnnotationSet set = parse_rows("f1\tf2\tbright\n", inv);
    auto dist = descriptor_distribution(set);
    CHECK(dist.at("bright") == doctest::Approx(100.0).epsilon(1e-12));
  }

  SUBCASE("mentions, not pairs, form the denominator") {
    // {x} and {x, y}: three mentions, so x = 2/3 and y = 1/3.
    AnnotationSet set = parse_rows("f1\tf2\tbright\nf1\tf3\tbright,low\n", inv);
    auto dist = descriptor_distribution(set);
    CHECK(dist.at("bright") == doctest::Approx(200.0 / 3.0).epsilon(1e-12));
    CHECK(dist.at("low") == doctest::Approx(100.0 / 3.0).epsilon(1e-12));
  }

  SUBCASE("empty set is an error") {
    AnnotationSet set = parse_rows("", inv);
    CHECK_THROWS_AS(descriptor_distribution(set), Error);
  }
}

TEST_CASE("distribution sums to 100 for random annotation sets") {
  for (uint64_t seed = 1; seed <= 30; ++seed) {
    AnnotationSet set = vtad_test::make_toy_corpus(3 + seed % 5, 3, seed);
    auto dist = descriptor_distribution(set);
    double sum = 0.0;
    for (const auto& [name, pct] : dist) {
      CHECK(pct >= 0.0);
      sum += pct;
    }
    CHECK(std::abs(sum - 100.0) < 1e-9);
  }
}

TEST_CASE("inventory validation reports undersupplied speakers") {
  SpeakerInventory inv = vtad_test::make_inventory(2, 20);
  CHECK(inv.validate(20).passed());
  CHECK(inv.validate(20).warnings.empty());

  SpeakerInventory small;
  small.add({"x", Gender::male, {"x_1", "x_2", "x_3", "x_4", "x_5"}});
  ValidationReport report = small.validate(20);
  CHECK_FALSE(report.passed());
  REQUIRE(report.errors.size() == 1);
  CHECK(report.errors[0].message.find("x") != std::string::npos);

  SpeakerInventory empty;
  ValidationReport degenerate = empty.validate(20);
  CHECK(degenerate.passed());
  REQUIRE(degenerate.warnings.size() == 1);
  CHECK(degenerate.warnings[0].message.find("zero speakers") != std::string::npos);
}

TEST_CASE("directory tree scanning builds an inventory") {
  namespace fs = std::filesystem;
  fs::path root = fs::temp_directory_path() / "vtad_scan_test";
  fs::remove_all(root);
  fs::create_directories(root / "p001");
  fs::create_directories(root / "p002");
  write_text_file(root / "p001" / "p001_001.wav", "x");
  write_text_file(root / "p001" / "p001_002.wav", "x");
  write_text_file(root / "p002" / "p002_001.wav", "x");
  write_text_file(root / "genders.tsv", "p001\tfemale\np002\tmale\n");

  SpeakerInventory inv = SpeakerInventory::scan_tree(root, root / "genders.tsv");
  CHECK(inv.speaker_count() == 2);
  REQUIRE(inv.find("p001") != nullptr);
  CHECK(inv.find("p001")->utterance_ids ==
        std::vector<std::string>{"p001_001", "p001_002"});
  CHECK(inv.find("p002")->gender == Gender::male);
  fs::remove_all(root);
}
