// tools/vtad_main.cpp

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

// Command-line front end. Argument handling only: all work happens behind
// the libvtad C API. Precedence of configuration values is
// flags > config file > defaults.

#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vtad.h"

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> sets;
  std::string seed, encoder, track, out;
  bool force = false;
};

void add_common_flags(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "key = value configuration file");
  cmd->add_option("--set", args.sets, "override: key=value (repeatable)")
      ->take_all();
  cmd->add_option("--seed", args.seed, "master seed for all sampling");
  cmd->add_option("--encoder", args.encoder,
                  "encoder: synthetic[:profiles]|precomputed:<file>|<name>");
  cmd->add_option("--track", args.track, "evaluation track: seen|unseen");
  cmd->add_option("--out", args.out, "output directory for run artifacts");
  cmd->add_flag("--force", args.force, "ignore config digest mismatches");
}

int run(const CommonArgs& args, const std::vector<std::string>& extra,
        vtad_status (*fn)(const vtad_config*, char**)) {
  std::vector<std::string> overrides = args.sets;
  if (!args.seed.empty()) overrides.push_back("seed=" + args.seed);
  if (!args.encoder.empty()) overrides.push_back("encoder=" + args.encoder);
  if (!args.track.empty()) overrides.push_back("track=" + args.track);
  if (!args.out.empty()) overrides.push_back("out=" + args.out);
  if (args.force) overrides.push_back("force=true");
  overrides.insert(overrides.end(), extra.begin(), extra.end());

  std::vector<const char*> raw;
  for (const std::string& s : overrides) raw.push_back(s.c_str());

  vtad_config* config = nullptr;
  vtad_status status = vtad_config_open(
      args.config_path.empty() ? nullptr : args.config_path.c_str(), raw.data(),
      raw.size(), &config);
  if (status != VTAD_OK) {
    std::fprintf(stderr, "error [%s]: %s\n", vtad_status_name(status),
                 vtad_last_error());
    return 1;
  }

  char* summary = nullptr;
  status = fn(config, &summary);
  if (status == VTAD_OK) {
    if (summary) std::fputs(summary, stdout);
  } else {
    std::fprintf(stderr, "error [%s]: %s\n", vtad_status_name(status),
                 vtad_last_error());
  }
  vtad_string_free(summary);
  vtad_config_free(config);
  return status == VTAD_OK ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vTAD benchmark toolkit: corpus ingestion, evaluation protocol "
               "construction, baseline training/inference and scoring"};
  app.require_subcommand(1);
  app.set_version_flag("--version", vtad_version());

  struct Sub {
    CLI::App* cmd;
    CommonArgs args;
    std::vector<std::string> extra;
    vtad_status (*fn)(const vtad_config*, char**);
  };
  std::vector<Sub> subs(7);

  subs[0].cmd = app.add_subcommand("synth",
                                   "generate a seeded synthetic corpus "
                                   "(annotations, inventory, profiles, embeddings)");
  subs[0].fn = vtad_run_synth;

  subs[1].cmd = app.add_subcommand("ingest",
                                   "validate and normalize an annotation corpus");
  subs[1].fn = vtad_run_ingest;
  {
    static std::string annotations, inventory, root, genders;
    subs[1].cmd->add_option("--annotations", annotations, "ordered-pair annotation file");
    subs[1].cmd->add_option("--inventory", inventory, "speaker inventory file");
    subs[1].cmd->add_option("--corpus-root", root,
                            "speaker/utterance directory tree (or $VTAD_CORPUS_ROOT)");
    subs[1].cmd->add_option("--genders", genders, "speaker_id<TAB>gender map for --corpus-root");
    subs[1].cmd->callback([&] {
      if (!annotations.empty()) subs[1].extra.push_back("corpus.annotations=" + annotations);
      if (!inventory.empty()) subs[1].extra.push_back("corpus.inventory=" + inventory);
      if (!root.empty()) subs[1].extra.push_back("corpus.root=" + root);
      if (!genders.empty()) subs[1].extra.push_back("corpus.genders=" + genders);
    });
  }

  subs[2].cmd = app.add_subcommand("protocol",
                                   "build the evaluation split and trial lists");
  subs[2].fn = vtad_run_protocol;

  subs[3].cmd = app.add_subcommand("train", "train the baseline comparator");
  subs[3].fn = vtad_run_train;
  {
    static std::string resume;
    subs[3].cmd->add_option("--resume", resume, "directory with models to continue from");
    subs[3].cmd->callback([&] {
      if (!resume.empty()) subs[3].extra.push_back("train.resume=" + resume);
    });
  }

  subs[4].cmd = app.add_subcommand("infer", "score trials into a submission file");
  subs[4].fn = vtad_run_infer;
  {
    static std::string model_dir, trials;
    subs[4].cmd->add_option("--model-dir", model_dir, "directory holding model files");
    subs[4].cmd->add_option("--trials", trials, "participant trial file");
    subs[4].cmd->callback([&] {
      if (!model_dir.empty()) subs[4].extra.push_back("infer.model_dir=" + model_dir);
      if (!trials.empty()) subs[4].extra.push_back("infer.trials=" + trials);
    });
  }

  subs[5].cmd = app.add_subcommand("score", "score a submission against the key");
  subs[5].fn = vtad_run_score;
  {
    static std::string submission, key;
    static bool pooled = false;
    subs[5].cmd->add_option("--submission", submission, "submission file");
    subs[5].cmd->add_option("--key", key, "labeled key file");
    subs[5].cmd->add_flag("--pooled-eer", pooled, "also report one EER pooled over all trials");
    subs[5].cmd->callback([&] {
      if (!submission.empty()) subs[5].extra.push_back("score.submission=" + submission);
      if (!key.empty()) subs[5].extra.push_back("score.key=" + key);
      if (pooled) subs[5].extra.push_back("score.pooled_eer=true");
    });
  }

  subs[6].cmd = app.add_subcommand("validate",
                                   "validate a submission against the key's trial ids");
  subs[6].fn = vtad_run_validate;
  {
    static std::string submission, key;
    subs[6].cmd->add_option("--submission", submission, "submission file");
    subs[6].cmd->add_option("--key", key, "key or participant trial file");
    subs[6].cmd->callback([&] {
      if (!submission.empty()) subs[6].extra.push_back("validate.submission=" + submission);
      if (!key.empty()) subs[6].extra.push_back("validate.key=" + key);
    });
  }

  for (Sub& sub : subs) add_common_flags(sub.cmd, sub.args);

  CLI11_PARSE(app, argc, argv);

  for (Sub& sub : subs)
    if (sub.cmd->parsed()) return run(sub.args, sub.extra, sub.fn);
  return 1;
}
