// src/runner.cpp

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

#include "vtad/runner.hpp"

#include <algorithm>
#include <cstdlib>
#include <sstream>

#include "vtad/corpus.hpp"
#include "vtad/diffnet.hpp"
#include "vtad/encoders.hpp"
#include "vtad/protocol.hpp"
#include "vtad/scoring.hpp"
#include "vtad/synthetic.hpp"

namespace vtad {

namespace fs = std::filesystem;

namespace {

fs::path out_dir(const RunConfig& cfg) { return fs::path(cfg.get("out")); }

fs::path cache_dir(const RunConfig& cfg) {
  if (cfg.is_set("cache")) return fs::path(cfg.get("cache"));
  return out_dir(cfg) / "cache";
}

void write_run_log(const RunConfig& cfg, const std::string& command,
                   const std::string& summary) {
  std::ostringstream log;
  log << "# vtad " << command << "\n";
  log << "# config_digest = " << cfg.digest() << "\n";
  log << "# effective configuration:\n" << cfg.effective_text();
  log << "# summary:\n" << summary;
  write_text_file(out_dir(cfg) / ("run-" + command + ".log"), log.str());
}

std::optional<std::string> digest_header_of(const fs::path& path) {
  if (!fs::exists(path)) return std::nullopt;
  std::istringstream in(read_text_file(path));
  std::string line;
  while (std::getline(in, line)) {
    std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] != '#') break;
    if (starts_with(t, "#config_digest=")) return t.substr(15);
  }
  return std::nullopt;
}

// Refuse inputs produced by a different run unless force is set. Artifacts
// without a digest header (foreign files) are accepted as-is.
void check_digest(const RunConfig& cfg, const fs::path& path,
                  const std::optional<std::string>& artifact_digest) {
  if (!artifact_digest || artifact_digest->empty()) return;
  if (*artifact_digest == cfg.digest()) return;
  if (cfg.get_bool("force")) return;
  fail(ErrorCode::digest_mismatch,
       path.string() + " was produced by config " + *artifact_digest +
           " but this run is " + cfg.digest() +
           "; regenerate upstream artifacts or pass force=true");
}

DescriptorVocabulary load_vocabulary(const RunConfig& cfg) {
  if (cfg.is_set("corpus.vocabulary")) {
    std::istringstream in(read_text_file(cfg.get("corpus.vocabulary")));
    return DescriptorVocabulary::parse(in);
  }
  return DescriptorVocabulary::default_vocabulary();
}

SpeakerInventory load_source_inventory(const RunConfig& cfg) {
  if (cfg.is_set("corpus.inventory")) {
    std::istringstream in(read_text_file(cfg.get("corpus.inventory")));
    return SpeakerInventory::parse(in);
  }
  std::string root = cfg.get("corpus.root");
  if (root.empty()) {
    const char* env = std::getenv("VTAD_CORPUS_ROOT");
    if (env) root = env;
  }
  if (!root.empty()) {
    if (!cfg.is_set("corpus.genders"))
      fail(ErrorCode::config,
           "corpus.root scanning needs corpus.genders (speaker_id<TAB>gender map)");
    return SpeakerInventory::scan_tree(root, cfg.get("corpus.genders"));
  }
  fail(ErrorCode::config,
       "no speaker inventory: set corpus.inventory, corpus.root or VTAD_CORPUS_ROOT");
}

AnnotationSet load_ingested_corpus(const RunConfig& cfg) {
  fs::path ann = out_dir(cfg) / "annotations.norm.tsv";
  fs::path inv = out_dir(cfg) / "inventory.norm.tsv";
  if (!fs::exists(ann) || !fs::exists(inv))
    fail(ErrorCode::io, "ingested corpus not found under " + out_dir(cfg).string() +
                            "; run `vtad ingest` first");
  check_digest(cfg, ann, digest_header_of(ann));
  check_digest(cfg, inv, digest_header_of(inv));
  std::istringstream inv_in(read_text_file(inv));
  SpeakerInventory inventory = SpeakerInventory::parse(inv_in);
  std::istringstream ann_in(read_text_file(ann));
  return parse_annotations(ann_in, load_vocabulary(cfg), inventory);
}

SplitConfig split_config_from(const RunConfig& cfg) {
  SplitConfig sc;
  auto track = parse_track(cfg.get("track"));
  if (!track) fail(ErrorCode::config, "track must be 'seen' or 'unseen'");
  sc.track = *track;
  sc.eval_descriptors[Gender::male] = cfg.get_list("protocol.eval_descriptors.male");
  sc.eval_descriptors[Gender::female] = cfg.get_list("protocol.eval_descriptors.female");
  sc.train_speaker_count[Gender::male] = cfg.get_u64("protocol.train_speakers.male");
  sc.train_speaker_count[Gender::female] = cfg.get_u64("protocol.train_speakers.female");
  sc.eval_speaker_count[Gender::male] = cfg.get_u64("protocol.eval_speakers.male");
  sc.eval_speaker_count[Gender::female] = cfg.get_u64("protocol.eval_speakers.female");
  sc.utterances_per_eval_speaker = cfg.get_u64("protocol.eval_utterances");
  sc.eval_pairs_per_descriptor = cfg.get_u64("protocol.eval_pairs_per_descriptor");
  sc.positives_per_cell = cfg.get_u64("protocol.positives_per_cell");
  sc.negatives_per_cell = cfg.get_u64("protocol.negatives_per_cell");
  sc.seed = cfg.get_u64("seed");
  return sc;
}

DiffNetConfig diffnet_config_from(const RunConfig& cfg, size_t input_dim,
                                  size_t output_dim, uint64_t seed) {
  DiffNetConfig dc;
  dc.input_dim = input_dim;
  dc.output_dim = output_dim;
  dc.hidden.clear();
  for (const std::string& tok : cfg.get_list("diffnet.hidden")) {
    uint64_t w = 0;
    if (!parse_u64(tok, w) || w == 0)
      fail(ErrorCode::config, "diffnet.hidden entry '" + tok + "' is not a layer width");
    dc.hidden.push_back(w);
  }
  dc.use_batch_norm = cfg.get_bool("diffnet.batch_norm");
  auto act = parse_activation(cfg.get("diffnet.activation"));
  if (!act) fail(ErrorCode::config, "unknown diffnet.activation");
  dc.activation = *act;
  dc.threshold = cfg.get_double("diffnet.threshold");
  dc.learning_rate = cfg.get_double("diffnet.learning_rate");
  dc.batch_size = cfg.get_u64("diffnet.batch_size");
  dc.epochs = cfg.get_u64("diffnet.epochs");
  auto opt = parse_optimizer(cfg.get("diffnet.optimizer"));
  if (!opt) fail(ErrorCode::config, "unknown diffnet.optimizer");
  dc.optimizer = *opt;
  dc.momentum = cfg.get_double("diffnet.momentum");
  dc.pairs_per_annotation = cfg.get_u64("diffnet.pairs_per_annotation");
  dc.seed = seed;
  return dc;
}

// encoder forms: "synthetic[:profiles.tsv]", "precomputed:<path>[,l2norm]",
// or a bare name resolved to $VTAD_ENCODER_ROOT/<name>.vtade.
EmbeddingTable resolve_embeddings(const RunConfig& cfg,
                                  const std::vector<std::string>& utterances) {
  std::string spec = cfg.get("encoder");
  bool l2norm = false;
  if (spec.size() > 7 && spec.substr(spec.size() - 7) == ",l2norm") {
    l2norm = true;
    spec = spec.substr(0, spec.size() - 7);
  }

  EmbeddingTable table;
  if (spec == "synthetic" || starts_with(spec, "synthetic:")) {
    fs::path profiles_path = spec == "synthetic"
                                 ? out_dir(cfg) / "profiles.tsv"
                                 : fs::path(spec.substr(10));
    if (!fs::exists(profiles_path))
      fail(ErrorCode::encoder_load_failure,
           "synthetic encoder needs a profiles file; not found at " +
               profiles_path.string());
    std::istringstream in(read_text_file(profiles_path));
    SyntheticEncoder encoder(load_vocabulary(cfg), SyntheticProfileSet::parse(in));
    EmbeddingCache cache(cache_dir(cfg));
    EmbedCorpusResult result = embed_corpus(utterances, encoder, &cache);
    if (!result.failures.empty())
      fail(ErrorCode::encoder_load_failure,
           "failed to embed " + result.failures.front().first + ": " +
               result.failures.front().second);
    table = std::move(result.table);
  } else {
    fs::path path;
    if (starts_with(spec, "precomputed:")) {
      path = fs::path(spec.substr(12));
    } else {
      const char* root = std::getenv("VTAD_ENCODER_ROOT");
      if (!root)
        fail(ErrorCode::encoder_load_failure,
             "encoder '" + spec + "' needs VTAD_ENCODER_ROOT to resolve");
      path = fs::path(root) / (spec + ".vtade");
    }
    if (!fs::exists(path))
      fail(ErrorCode::encoder_load_failure,
           "embedding file not found: " + path.string());
    table = EmbeddingTable::read_file(path);
    for (const std::string& utt : utterances)
      if (!table.find(utt))
        fail(ErrorCode::missing_embedding,
             "utterance " + utt + " is missing from " + path.string());
  }
  if (l2norm) table.apply_length_norm();
  return table;
}

std::string distribution_text(const AnnotationSet& annotations) {
  std::map<std::string, double> dist = descriptor_distribution(annotations);
  std::ostringstream out;
  out << "descriptor distribution (% of mentions):\n";
  for (const auto& [name, pct] : dist)
    out << "  " << name << " = " << format_double(pct, 2) << "\n";
  return out.str();
}

// Compare an empirical mention distribution against the vocabulary's
// reference column, renormalized to sum to 100.
std::string reference_comparison(const AnnotationSet& annotations) {
  std::map<std::string, double> dist = descriptor_distribution(annotations);
  double ref_sum = annotations.vocabulary.reference_percentage_sum();
  if (ref_sum <= 0.0) return "";
  std::ostringstream out;
  double worst = 0.0;
  out << "comparison against the reference distribution (renormalized):\n";
  for (const Descriptor& d : annotations.vocabulary.entries()) {
    double ref = d.reference_percentage * 100.0 / ref_sum;
    auto it = dist.find(d.name);
    double got = it == dist.end() ? 0.0 : it->second;
    double diff = std::abs(got - ref);
    worst = std::max(worst, diff);
    out << "  " << d.name << ": got " << format_double(got, 2) << ", reference "
        << format_double(ref, 2) << ", |diff| " << format_double(diff, 3) << "\n";
  }
  out << "  max per-descriptor deviation: " << format_double(worst, 3)
      << (worst <= 0.1 ? " (within 0.1)" : " (exceeds 0.1)") << "\n";
  return out.str();
}

Gender gender_of_trial(const TrialItem& item, const SpeakerInventory& inventory) {
  const SpeakerRecord* rec = inventory.speaker_of_utterance(item.utterance_first);
  if (rec) return rec->gender;
  auto parts = parse_trial_id(item.trial_id);
  if (parts) {
    auto g = parse_gender(parts->gender);
    if (g) return *g;
  }
  fail(ErrorCode::unknown_speaker,
       "cannot resolve the gender of trial " + item.trial_id);
}

}  // namespace

RunResult run_synth(const RunConfig& cfg) {
  DescriptorVocabulary vocabulary = load_vocabulary(cfg);
  SyntheticCorpusConfig sc;
  sc.speakers_per_gender = cfg.get_u64("synth.speakers_per_gender");
  sc.utterances_per_speaker = cfg.get_u64("synth.utterances_per_speaker");
  sc.dim = cfg.get_u64("synth.dim");
  sc.noise_scale = cfg.get_double("synth.noise_scale");
  sc.margin = cfg.get_double("synth.margin");
  sc.seed = cfg.get_u64("seed");

  SyntheticCorpus corpus = build_synthetic_corpus(vocabulary, sc);
  const fs::path out = out_dir(cfg);
  const std::string digest_line = "#config_digest=" + cfg.digest() + "\n";
  write_text_file(out / "annotations.tsv",
                  digest_line + serialize_annotations(corpus.annotations));
  write_text_file(out / "inventory.tsv",
                  digest_line + corpus.annotations.speakers.serialize());
  write_text_file(out / "profiles.tsv", digest_line + corpus.profiles.serialize());
  corpus.embeddings.write_file(out / "embeddings.vtade");

  std::ostringstream summary;
  summary << "synthetic corpus: " << corpus.annotations.speakers.speaker_count()
          << " speakers, " << corpus.annotations.pairs.size() << " annotated pairs, "
          << corpus.embeddings.size() << " embeddings (d=" << sc.dim << ")\n";
  RunResult result{summary.str()};
  write_run_log(cfg, "synth", result.summary);
  return result;
}

RunResult run_ingest(const RunConfig& cfg) {
  DescriptorVocabulary vocabulary = load_vocabulary(cfg);
  SpeakerInventory inventory = load_source_inventory(cfg);
  if (!cfg.is_set("corpus.annotations"))
    fail(ErrorCode::config, "corpus.annotations is required for ingest");
  std::istringstream ann_in(read_text_file(cfg.get("corpus.annotations")));
  AnnotationSet annotations = parse_annotations(ann_in, vocabulary, inventory);

  ValidationReport inventory_report =
      inventory.validate(cfg.get_u64("corpus.expected_utterances"));

  const fs::path out = out_dir(cfg);
  const std::string digest_line = "#config_digest=" + cfg.digest() + "\n";
  write_text_file(out / "annotations.norm.tsv",
                  digest_line + serialize_annotations(annotations));
  write_text_file(out / "inventory.norm.tsv", digest_line + inventory.serialize());

  std::ostringstream summary;
  summary << "ingested " << inventory.speaker_count() << " speakers, "
          << annotations.pairs.size() << " ordered pairs, "
          << inventory.utterance_count() << " utterances\n";
  if (!annotations.pairs.empty()) summary << distribution_text(annotations);
  // The published dataset: 101 speakers, 6,038 ordered pairs.
  if (inventory.speaker_count() == 101 && annotations.pairs.size() == 6038) {
    summary << "full dataset detected\n" << reference_comparison(annotations);
  }
  summary << "inventory validation ("
          << cfg.get_u64("corpus.expected_utterances") << " utterances expected):\n"
          << inventory_report.to_text();

  write_text_file(out / "ingest_report.txt", summary.str());
  RunResult result{summary.str()};
  write_run_log(cfg, "ingest", result.summary);
  return result;
}

RunResult run_protocol(const RunConfig& cfg) {
  AnnotationSet annotations = load_ingested_corpus(cfg);
  SplitConfig sc = split_config_from(cfg);
  SplitPlan split = build_split(annotations, sc);
  split.config_digest = cfg.digest();
  TrialList trials = generate_trials(split, cfg.get_u64("seed"));

  ValidationReport audit = audit_trials(trials, split);
  const fs::path out = out_dir(cfg);
  write_text_file(out / "protocol_audit.txt", audit.to_text());
  if (!audit.passed())
    fail(ErrorCode::internal,
         "freshly generated trials failed their own audit:\n" + audit.to_text());

  write_text_file(out / "split.json", split.serialize());
  write_text_file(out / "trials_key.tsv", serialize_trials(trials, true));
  write_text_file(out / "trials_participant.tsv", serialize_trials(trials, false));

  size_t positives = 0;
  for (const TrialItem& item : trials.items) positives += item.label == 1;
  std::ostringstream summary;
  summary << "split (" << track_name(split.track) << "): "
          << split.train_pairs.size() << " train pairs, " << split.eval_pairs.size()
          << " eval pairs, " << enumerate_cells(split).size() << " cells\n"
          << "trials: " << trials.items.size() << " items (" << positives
          << " positive), audit clean\n";
  RunResult result{summary.str()};
  write_run_log(cfg, "protocol", result.summary);
  return result;
}

namespace {

struct TrainTarget {
  std::string tag;    // "male", "female" or "joint"
  std::vector<std::string> nodes;
  std::vector<OrderedPairAnnotation> pairs;
};

std::vector<TrainTarget> train_targets(const RunConfig& cfg, const SplitPlan& split,
                                       const DescriptorVocabulary& vocabulary) {
  std::string head = cfg.get("diffnet.head");
  std::vector<TrainTarget> targets;
  if (head == "joint") {
    targets.push_back({"joint", vocabulary.names(), split.train_pairs});
  } else if (head == "per_gender") {
    for (Gender g : {Gender::male, Gender::female}) {
      TrainTarget t;
      t.tag = gender_name(g);
      t.nodes = vocabulary.names_for(g);
      for (const auto& pair : split.train_pairs) {
        auto it = split.speaker_genders.find(pair.weaker_speaker);
        if (it != split.speaker_genders.end() && it->second == g) t.pairs.push_back(pair);
      }
      targets.push_back(std::move(t));
    }
  } else {
    fail(ErrorCode::config, "diffnet.head must be 'per_gender' or 'joint'");
  }
  return targets;
}

}  // namespace

RunResult run_train(const RunConfig& cfg) {
  const fs::path out = out_dir(cfg);
  fs::path split_path = out / "split.json";
  if (!fs::exists(split_path))
    fail(ErrorCode::io, "split plan not found: " + split_path.string() +
                            "; run `vtad protocol` first");
  SplitPlan split = SplitPlan::deserialize(read_text_file(split_path));
  check_digest(cfg, split_path,
               split.config_digest.empty()
                   ? std::nullopt
                   : std::optional<std::string>(split.config_digest));

  DescriptorVocabulary vocabulary = load_vocabulary(cfg);

  std::vector<std::string> needed;
  for (const auto& [speaker, utts] : split.train_utterances)
    needed.insert(needed.end(), utts.begin(), utts.end());
  EmbeddingTable table = resolve_embeddings(cfg, needed);
  const uint64_t frozen_before = table.content_checksum();

  std::ostringstream summary;
  for (const TrainTarget& target : train_targets(cfg, split, vocabulary)) {
    if (target.pairs.empty())
      fail(ErrorCode::empty_training_set,
           "no training pairs for head '" + target.tag + "'");
    uint64_t seed = fnv1a64_mix(cfg.get_u64("seed"), "train|" + target.tag);
    DiffNetConfig dc =
        diffnet_config_from(cfg, 2 * table.dim(), target.nodes.size(), seed);

    DiffNetModel model;
    TrainingLog previous;
    size_t start_epoch = 0;
    fs::path model_path = out / ("model_" + target.tag + ".vtadm");
    fs::path log_path = out / ("train_" + target.tag + ".log");
    if (cfg.is_set("train.resume")) {
      fs::path resume_path = fs::path(cfg.get("train.resume")) /
                             ("model_" + target.tag + ".vtadm");
      model = DiffNetModel::load(resume_path);
      check_digest(cfg, resume_path,
                   model.config_digest().empty()
                       ? std::nullopt
                       : std::optional<std::string>(model.config_digest()));
      fs::path resume_log = fs::path(cfg.get("train.resume")) /
                            ("train_" + target.tag + ".log");
      if (fs::exists(resume_log)) {
        std::istringstream in(read_text_file(resume_log));
        previous = TrainingLog::parse(in);
        if (!previous.entries.empty())
          start_epoch = previous.entries.back().epoch + 1;
      }
    } else {
      model = DiffNetModel::init(dc, target.nodes, table.encoder_id());
    }
    model.set_config_digest(cfg.digest());

    auto sampler = [&](size_t epoch) {
      return sample_training_examples(target.pairs, split.train_utterances, table,
                                      target.nodes, dc.pairs_per_annotation, seed,
                                      epoch);
    };
    TrainingLog log = train_model(model, sampler, dc.epochs, start_epoch,
                                  previous.entries.empty() ? nullptr : &previous);
    log.config_digest = cfg.digest();

    model.save(model_path);
    write_text_file(log_path, log.serialize());
    summary << "trained " << target.tag << ": " << target.pairs.size()
            << " pairs, final loss "
            << format_double(log.entries.back().mean_loss, 6) << " (epoch "
            << log.entries.back().epoch << ")\n";
  }

  if (table.content_checksum() != frozen_before)
    fail(ErrorCode::internal, "frozen-encoder contract violated: embeddings changed");

  RunResult result{summary.str()};
  write_run_log(cfg, "train", result.summary);
  return result;
}

RunResult run_infer(const RunConfig& cfg) {
  const fs::path out = out_dir(cfg);
  fs::path trials_path = cfg.is_set("infer.trials")
                             ? fs::path(cfg.get("infer.trials"))
                             : out / "trials_participant.tsv";
  if (!fs::exists(trials_path))
    fail(ErrorCode::io, "trial file not found: " + trials_path.string());
  check_digest(cfg, trials_path, digest_header_of(trials_path));
  std::istringstream trials_in(read_text_file(trials_path));
  TrialList trials = parse_trials(trials_in);

  SpeakerInventory inventory;
  fs::path inv_path = out / "inventory.norm.tsv";
  if (!fs::exists(inv_path)) inv_path = out / "inventory.tsv";
  if (fs::exists(inv_path)) {
    std::istringstream inv_in(read_text_file(inv_path));
    inventory = SpeakerInventory::parse(inv_in);
  }

  std::vector<std::string> needed;
  for (const TrialItem& item : trials.items) {
    needed.push_back(item.utterance_first);
    needed.push_back(item.utterance_second);
  }
  std::sort(needed.begin(), needed.end());
  needed.erase(std::unique(needed.begin(), needed.end()), needed.end());
  EmbeddingTable table = resolve_embeddings(cfg, needed);

  fs::path model_dir = cfg.is_set("infer.model_dir")
                           ? fs::path(cfg.get("infer.model_dir"))
                           : out;
  std::string head = cfg.get("diffnet.head");
  std::vector<PredictionRecord> records(trials.items.size());
  if (head == "joint") {
    DiffNetModel model = DiffNetModel::load(model_dir / "model_joint.vtadm");
    check_digest(cfg, model_dir / "model_joint.vtadm",
                 model.config_digest().empty()
                     ? std::nullopt
                     : std::optional<std::string>(model.config_digest()));
    records = predict_trials(model, trials, table);
  } else {
    // Route per gender, then merge back in trial order.
    std::map<std::string, std::vector<size_t>> by_gender;
    for (size_t i = 0; i < trials.items.size(); ++i)
      by_gender[gender_name(gender_of_trial(trials.items[i], inventory))].push_back(i);
    for (const auto& [tag, indices] : by_gender) {
      fs::path model_path = model_dir / ("model_" + tag + ".vtadm");
      DiffNetModel model = DiffNetModel::load(model_path);
      check_digest(cfg, model_path,
                   model.config_digest().empty()
                       ? std::nullopt
                       : std::optional<std::string>(model.config_digest()));
      TrialList subset;
      subset.has_labels = trials.has_labels;
      for (size_t i : indices) subset.items.push_back(trials.items[i]);
      std::vector<PredictionRecord> preds = predict_trials(model, subset, table);
      for (size_t k = 0; k < indices.size(); ++k) records[indices[k]] = preds[k];
    }
  }

  SubmissionFile submission;
  submission.team = cfg.get("submission.team");
  submission.track = cfg.get("track");
  submission.system = cfg.get("submission.system");
  submission.config_digest = cfg.digest();
  for (const PredictionRecord& rec : records)
    submission.entries.push_back({rec.trial_id, rec.score, rec.decision});

  // The produced file must cover exactly the participant trial ids.
  ValidationReport check = validate_submission(submission, trials);
  if (!check.passed())
    fail(ErrorCode::internal,
         "inference produced an invalid submission:\n" + check.to_text());

  write_text_file(out / "submission.tsv", submission.serialize());
  std::ostringstream summary;
  summary << "scored " << records.size() << " trials into "
          << (out / "submission.tsv").string() << "\n";
  RunResult result{summary.str()};
  write_run_log(cfg, "infer", result.summary);
  return result;
}

namespace {

std::pair<SubmissionFile, TrialList> load_submission_and_key(
    const RunConfig& cfg, const std::string& submission_key,
    const std::string& key_key) {
  const fs::path out = out_dir(cfg);
  fs::path sub_path = cfg.is_set(submission_key)
                          ? fs::path(cfg.get(submission_key))
                          : out / "submission.tsv";
  fs::path key_path =
      cfg.is_set(key_key) ? fs::path(cfg.get(key_key)) : out / "trials_key.tsv";
  if (!fs::exists(sub_path))
    fail(ErrorCode::io, "submission file not found: " + sub_path.string());
  if (!fs::exists(key_path))
    fail(ErrorCode::io, "key file not found: " + key_path.string());
  check_digest(cfg, key_path, digest_header_of(key_path));
  std::istringstream sub_in(read_text_file(sub_path));
  SubmissionFile submission = SubmissionFile::parse(sub_in);
  std::istringstream key_in(read_text_file(key_path));
  TrialList key = parse_trials(key_in);
  if (!key.has_labels)
    fail(ErrorCode::parse, key_path.string() + " carries no labels; need the key file");
  return {std::move(submission), std::move(key)};
}

}  // namespace

RunResult run_score(const RunConfig& cfg) {
  auto [submission, key] = load_submission_and_key(cfg, "score.submission", "score.key");
  MetricsReport report =
      score_against_key(submission, key, cfg.get_bool("score.pooled_eer"));

  const fs::path out = out_dir(cfg);
  write_text_file(out / "report.txt", report.to_text());
  write_text_file(out / "report.kv",
                  "config_digest = " + cfg.digest() + "\n" + report.to_kv());

  RunResult result{report.to_text()};
  write_run_log(cfg, "score", result.summary);
  return result;
}

RunResult run_validate(const RunConfig& cfg) {
  auto [submission, key] =
      load_submission_and_key(cfg, "validate.submission", "validate.key");
  ValidationReport report = validate_submission(submission, key);
  write_text_file(out_dir(cfg) / "validation_report.txt", report.to_text());
  RunResult result{report.to_text()};
  write_run_log(cfg, "validate", result.summary);
  if (!report.passed())
    fail(ErrorCode::validation_failed,
         "submission failed validation:\n" + report.to_text());
  return result;
}

}  // namespace vtad
