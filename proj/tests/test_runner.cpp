// tests/test_runner.cpp

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

#include <algorithm>
#include <filesystem>
#include <sstream>

#include "vtad/diffnet.hpp"
#include "vtad/kvconfig.hpp"
#include "vtad/runner.hpp"
#include "vtad/scoring.hpp"

using namespace vtad;
namespace fs = std::filesystem;

namespace {

// Small synthetic chain configuration rooted at `dir`.
std::vector<std::string> mini_overrides(const fs::path& dir, uint64_t seed) {
  return {
      "out=" + dir.string(),
      "seed=" + std::to_string(seed),
      "track=unseen",
      "encoder=precomputed:" + (dir / "embeddings.vtade").string(),
      "corpus.annotations=" + (dir / "annotations.tsv").string(),
      "corpus.inventory=" + (dir / "inventory.tsv").string(),
      "corpus.expected_utterances=8",
      "synth.speakers_per_gender=12",
      "synth.utterances_per_speaker=8",
      "synth.dim=20",
      "synth.noise_scale=0.02",
      "synth.margin=0.3",
      "protocol.eval_descriptors.male=bright,low",
      "protocol.eval_descriptors.female=bright,low",
      "protocol.train_speakers.male=4",
      "protocol.train_speakers.female=4",
      "protocol.eval_utterances=4",
      "protocol.eval_pairs_per_descriptor=1",
      "protocol.positives_per_cell=8",
      "protocol.negatives_per_cell=12",
      "diffnet.hidden=16,16",
      "diffnet.epochs=4",
      "diffnet.batch_size=32",
      "diffnet.pairs_per_annotation=3",
  };
}

RunConfig mini_config(const fs::path& dir, uint64_t seed) {
  return RunConfig::load(std::nullopt, mini_overrides(dir, seed));
}

void run_chain(const RunConfig& cfg) {
  run_synth(cfg);
  run_ingest(cfg);
  run_protocol(cfg);
  run_train(cfg);
  run_infer(cfg);
  run_score(cfg);
}

}  // namespace

TEST_CASE("config precedence: overrides beat file beats defaults") {
  fs::path dir = fs::temp_directory_path() / "vtad_cfg_test";
  fs::create_directories(dir);
  write_text_file(dir / "run.cfg",
                  "# comment\nseed = 7\ndiffnet.epochs = 3\ntrack = seen\n");

  RunConfig cfg = RunConfig::load(dir / "run.cfg", {"seed=9"});
  CHECK(cfg.get_u64("seed") == 9);                // override wins
  CHECK(cfg.get_u64("diffnet.epochs") == 3);      // file wins over default
  CHECK(cfg.get("track") == "seen");              // file
  CHECK(cfg.get("diffnet.optimizer") == "adam");  // default

  CHECK_THROWS_AS(RunConfig::load(dir / "run.cfg", {"nonsense.key=1"}), Error);
  write_text_file(dir / "bad.cfg", "unknown_key = 1\n");
  CHECK_THROWS_AS(RunConfig::load(dir / "bad.cfg", {}), Error);
  fs::remove_all(dir);
}

TEST_CASE("config digest tracks reproducibility keys only") {
  RunConfig a = RunConfig::load(std::nullopt, {});
  RunConfig b = RunConfig::load(std::nullopt, {"seed=2"});
  CHECK(a.digest() != b.digest());
  RunConfig c = RunConfig::load(std::nullopt, {"score.pooled_eer=true"});
  CHECK(a.digest() == c.digest());  // post-hoc scoring flag, not reproducibility
  RunConfig d = RunConfig::load(std::nullopt, {"out=elsewhere"});
  CHECK(a.digest() == d.digest());
  RunConfig e = RunConfig::load(std::nullopt, {"diffnet.epochs=99"});
  CHECK(a.digest() != e.digest());

  // paths never enter the digest, encoder parameters beyond the path do
  RunConfig f = RunConfig::load(
      std::nullopt, {"corpus.annotations=/tmp/x.tsv", "encoder=precomputed:/tmp/e1"});
  RunConfig g = RunConfig::load(
      std::nullopt, {"corpus.annotations=/other/y.tsv", "encoder=precomputed:/run2/e2"});
  CHECK(f.digest() == g.digest());
  RunConfig h = RunConfig::load(std::nullopt,
                                {"encoder=precomputed:/tmp/e1,l2norm"});
  CHECK(f.digest() != h.digest());
}

TEST_CASE("effective config echo lists every key") {
  RunConfig cfg = RunConfig::load(std::nullopt, {});
  std::string text = cfg.effective_text();
  for (const auto& [key, value] : RunConfig::defaults())
    CHECK(text.find(key + " = ") != std::string::npos);
}

TEST_CASE("synthetic end-to-end chain produces clean artifacts") {
  fs::path dir = fs::temp_directory_path() / "vtad_chain_test";
  fs::remove_all(dir);
  RunConfig cfg = mini_config(dir, 11);
  run_chain(cfg);

  for (const char* name :
       {"annotations.tsv", "inventory.tsv", "profiles.tsv", "embeddings.vtade",
        "annotations.norm.tsv", "inventory.norm.tsv", "ingest_report.txt",
        "split.json", "trials_key.tsv", "trials_participant.tsv",
        "protocol_audit.txt", "model_male.vtadm", "model_female.vtadm",
        "train_male.log", "train_female.log", "submission.tsv", "report.txt",
        "report.kv"})
    CHECK(fs::exists(dir / name));

  std::string kv = read_text_file(dir / "report.kv");
  CHECK(kv.find("acc.overall = ") != std::string::npos);
  CHECK(kv.find("eer.overall = ") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("the full chain is byte-identical across reruns with a fixed seed") {
  fs::path dir1 = fs::temp_directory_path() / "vtad_chain_a";
  fs::path dir2 = fs::temp_directory_path() / "vtad_chain_b";
  fs::remove_all(dir1);
  fs::remove_all(dir2);
  run_chain(mini_config(dir1, 21));
  run_chain(mini_config(dir2, 21));

  for (const char* name : {"annotations.tsv", "trials_participant.tsv",
                           "submission.tsv", "report.kv"}) {
    std::string a = read_text_file(dir1 / name);
    std::string b = read_text_file(dir2 / name);
    // outputs embed the config digest, which covers values, not paths
    CHECK(a == b);
  }
  // key files differ only in... nothing: fully byte-identical
  CHECK(read_text_file(dir1 / "trials_key.tsv") ==
        read_text_file(dir2 / "trials_key.tsv"));

  // a different seed changes the artifacts
  fs::path dir3 = fs::temp_directory_path() / "vtad_chain_c";
  fs::remove_all(dir3);
  run_chain(mini_config(dir3, 22));
  CHECK(read_text_file(dir1 / "trials_key.tsv") !=
        read_text_file(dir3 / "trials_key.tsv"));
  fs::remove_all(dir1);
  fs::remove_all(dir2);
  fs::remove_all(dir3);
}

TEST_CASE("digest mismatch refuses cross-run mixing unless forced") {
  fs::path dir = fs::temp_directory_path() / "vtad_digest_test";
  fs::remove_all(dir);
  RunConfig cfg = mini_config(dir, 31);
  run_synth(cfg);
  run_ingest(cfg);
  run_protocol(cfg);

  // same out dir, different seed: split.json now belongs to another run
  RunConfig other = mini_config(dir, 32);
  try {
    run_train(other);
    FAIL("expected DigestMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::digest_mismatch);
  }
  CHECK(mini_config(dir, 31).digest() != other.digest());
  RunConfig forced = mini_config(dir, 32);
  forced.set("force", "true");
  run_train(forced);  // forced mixing is allowed
  fs::remove_all(dir);
}

TEST_CASE("ingest rejects corpora with validation errors, citing the row") {
  fs::path dir = fs::temp_directory_path() / "vtad_ingest_err";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_text_file(dir / "inventory.tsv",
                  "m1\tmale\tm1_0,m1_1\nm2\tmale\tm2_0,m2_1\n");
  write_text_file(dir / "annotations.tsv", "m1\tm2\tbright\nm1\tm2\tshrill\n");
  RunConfig cfg = RunConfig::load(
      std::nullopt, {"out=" + (dir / "out").string(),
                     "corpus.annotations=" + (dir / "annotations.tsv").string(),
                     "corpus.inventory=" + (dir / "inventory.tsv").string()});
  try {
    run_ingest(cfg);
    FAIL("expected GenderViolation");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::gender_violation);
    CHECK(std::string(e.what()).find("annotations:2") != std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("protocol surfaces InsufficientSpeakers through the pipeline") {
  fs::path dir = fs::temp_directory_path() / "vtad_proto_err";
  fs::remove_all(dir);
  RunConfig cfg = mini_config(dir, 41);
  run_synth(cfg);
  run_ingest(cfg);
  RunConfig bad = mini_config(dir, 41);
  bad.set("protocol.train_speakers.male", "30");  // corpus has 12
  bad.set("force", "true");  // past the digest check, into the real error
  try {
    run_protocol(bad);
    FAIL("expected InsufficientSpeakers");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::insufficient_speakers);
  }
  fs::remove_all(dir);
}

TEST_CASE("resume continues training with loss continuity") {
  fs::path dir = fs::temp_directory_path() / "vtad_resume_test";
  fs::remove_all(dir);
  RunConfig cfg = mini_config(dir, 51);
  run_synth(cfg);
  run_ingest(cfg);
  run_protocol(cfg);
  run_train(cfg);

  std::istringstream first_in(read_text_file(dir / "train_male.log"));
  TrainingLog first = TrainingLog::parse(first_in);
  REQUIRE(first.entries.size() == 4);

  RunConfig resume = mini_config(dir, 51);
  resume.set("train.resume", dir.string());
  run_train(resume);
  std::istringstream second_in(read_text_file(dir / "train_male.log"));
  TrainingLog second = TrainingLog::parse(second_in);
  REQUIRE(second.entries.size() == 8);
  // history preserved and epoch numbering continues
  for (size_t i = 0; i < 4; ++i) {
    CHECK(second.entries[i].epoch == first.entries[i].epoch);
    CHECK(second.entries[i].mean_loss == first.entries[i].mean_loss);
  }
  CHECK(second.entries[4].epoch == 4);
  // continuity: the first resumed epoch does not regress beyond the spread
  // of losses seen so far (optimizer state is persisted in the container)
  double spread = first.entries.front().mean_loss - first.entries.back().mean_loss;
  CHECK(second.entries[4].mean_loss <=
        first.entries.back().mean_loss + std::max(0.05, 0.5 * spread));
  fs::remove_all(dir);
}

TEST_CASE("infer output validates against the participant list") {
  fs::path dir = fs::temp_directory_path() / "vtad_infer_test";
  fs::remove_all(dir);
  RunConfig cfg = mini_config(dir, 61);
  run_chain(cfg);

  std::istringstream sub_in(read_text_file(dir / "submission.tsv"));
  SubmissionFile sub = SubmissionFile::parse(sub_in);
  std::istringstream key_in(read_text_file(dir / "trials_key.tsv"));
  TrialList key = parse_trials(key_in);
  CHECK(validate_submission(sub, key).passed());
  CHECK(sub.entries.size() == key.items.size());
  // submissions carry the run's provenance
  CHECK_FALSE(sub.config_digest.empty());
  fs::remove_all(dir);
}

TEST_CASE("validate command fails on broken submissions") {
  fs::path dir = fs::temp_directory_path() / "vtad_validate_test";
  fs::remove_all(dir);
  RunConfig cfg = mini_config(dir, 71);
  run_chain(cfg);

  // break the submission: drop the last row
  std::string sub_text = read_text_file(dir / "submission.tsv");
  size_t cut = sub_text.find_last_of('\n', sub_text.size() - 2);
  write_text_file(dir / "broken.tsv", sub_text.substr(0, cut + 1));

  RunConfig validate_cfg = mini_config(dir, 71);
  validate_cfg.set("validate.submission", (dir / "broken.tsv").string());
  try {
    run_validate(validate_cfg);
    FAIL("expected ValidationFailed");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::validation_failed);
  }

  // the intact submission passes
  RunConfig ok_cfg = mini_config(dir, 71);
  run_validate(ok_cfg);
  fs::remove_all(dir);
}

TEST_CASE("scoring a decisions-only external submission") {
  fs::path dir = fs::temp_directory_path() / "vtad_ext_score";
  fs::remove_all(dir);
  RunConfig cfg = mini_config(dir, 81);
  run_synth(cfg);
  run_ingest(cfg);
  run_protocol(cfg);

  // a team that submits only decisions (every row score NA)
  std::istringstream key_in(read_text_file(dir / "trials_key.tsv"));
  TrialList key = parse_trials(key_in);
  std::string sub = "#team=t9 track=unseen system=manual\n";
  for (const TrialItem& item : key.items)
    sub += item.trial_id + "\tNA\t" + std::to_string(item.label) + "\n";
  write_text_file(dir / "team9.tsv", sub);

  RunConfig score_cfg = mini_config(dir, 81);
  score_cfg.set("score.submission", (dir / "team9.tsv").string());
  RunResult result = run_score(score_cfg);
  CHECK(result.summary.find("ACC 1.0000") != std::string::npos);
  std::string kv = read_text_file(dir / "report.kv");
  CHECK(kv.find("acc.overall = 1.000000") != std::string::npos);
  CHECK(kv.find("eer.overall") == std::string::npos);  // no scores anywhere
  CHECK(kv.find("eer.absent = ") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("run logs echo the effective configuration") {
  fs::path dir = fs::temp_directory_path() / "vtad_runlog_test";
  fs::remove_all(dir);
  RunConfig cfg = mini_config(dir, 91);
  run_synth(cfg);
  std::string log = read_text_file(dir / "run-synth.log");
  CHECK(log.find("config_digest = " + cfg.digest()) != std::string::npos);
  CHECK(log.find("seed = 91") != std::string::npos);
  CHECK(log.find("synth.dim = 20") != std::string::npos);
  fs::remove_all(dir);
}
