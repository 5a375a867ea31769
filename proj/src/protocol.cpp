// src/protocol.cpp

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

#include "vtad/protocol.hpp"

#include <algorithm>
#include <istream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vtad/rng.hpp"

namespace vtad {

using json = nlohmann::json;

SplitConfig SplitConfig::challenge_defaults(Track track) {
  SplitConfig cfg;
  cfg.track = track;
  cfg.eval_descriptors[Gender::male] = {"bright", "thin", "low", "magnetic", "pure"};
  cfg.eval_descriptors[Gender::female] = {"bright", "thin", "low", "coarse", "slim"};
  cfg.train_speaker_count[Gender::male] = 29;
  cfg.train_speaker_count[Gender::female] = 49;
  cfg.eval_speaker_count[Gender::male] = 0;
  cfg.eval_speaker_count[Gender::female] = 0;
  return cfg;
}

std::string SplitConfig::canonical_text() const {
  std::ostringstream out;
  out << "track=" << track_name(track) << "\n";
  for (Gender g : {Gender::male, Gender::female}) {
    auto it = eval_descriptors.find(g);
    out << "eval_descriptors." << gender_name(g) << "="
        << (it == eval_descriptors.end() ? "" : join(it->second, ",")) << "\n";
    auto tc = train_speaker_count.find(g);
    out << "train_speakers." << gender_name(g) << "="
        << (tc == train_speaker_count.end() ? 0 : tc->second) << "\n";
    auto ec = eval_speaker_count.find(g);
    out << "eval_speakers." << gender_name(g) << "="
        << (ec == eval_speaker_count.end() ? 0 : ec->second) << "\n";
  }
  out << "eval_utterances=" << utterances_per_eval_speaker << "\n"
      << "eval_pairs_per_descriptor=" << eval_pairs_per_descriptor << "\n"
      << "positives_per_cell=" << positives_per_cell << "\n"
      << "negatives_per_cell=" << negatives_per_cell << "\n"
      << "seed=" << seed << "\n";
  return out.str();
}

namespace {

json pairs_to_json(const std::vector<OrderedPairAnnotation>& pairs) {
  json arr = json::array();
  for (const auto& p : pairs)
    arr.push_back({{"weaker", p.weaker_speaker},
                   {"stronger", p.stronger_speaker},
                   {"descriptors", p.descriptors}});
  return arr;
}

std::vector<OrderedPairAnnotation> pairs_from_json(const json& arr) {
  std::vector<OrderedPairAnnotation> out;
  for (const auto& item : arr) {
    OrderedPairAnnotation p;
    p.weaker_speaker = item.at("weaker").get<std::string>();
    p.stronger_speaker = item.at("stronger").get<std::string>();
    p.descriptors = item.at("descriptors").get<std::vector<std::string>>();
    out.push_back(std::move(p));
  }
  return out;
}

json utterance_map_to_json(const std::map<std::string, std::vector<std::string>>& m) {
  json obj = json::object();
  for (const auto& [speaker, utts] : m) obj[speaker] = utts;
  return obj;
}

std::map<std::string, std::vector<std::string>> utterance_map_from_json(const json& obj) {
  std::map<std::string, std::vector<std::string>> out;
  for (auto it = obj.begin(); it != obj.end(); ++it)
    out[it.key()] = it.value().get<std::vector<std::string>>();
  return out;
}

Gender pair_gender(const SplitPlan& split, const OrderedPairAnnotation& pair) {
  auto it = split.speaker_genders.find(pair.weaker_speaker);
  if (it == split.speaker_genders.end())
    fail(ErrorCode::internal, "split plan lacks gender for " + pair.weaker_speaker);
  return it->second;
}

}  // namespace

std::string SplitPlan::id() const {
  SplitPlan copy = *this;
  copy.config_digest.clear();  // identity covers content, not provenance
  return to_hex(fnv1a64(copy.serialize()));
}

std::string SplitPlan::serialize() const {
  json j;
  j["track"] = track_name(track);
  j["seed"] = seed;
  j["config"] = config.canonical_text();
  j["config_digest"] = config_digest;
  j["train_pairs"] = pairs_to_json(train_pairs);
  j["eval_pairs"] = pairs_to_json(eval_pairs);
  j["train_utterances"] = utterance_map_to_json(train_utterances);
  j["eval_utterances"] = utterance_map_to_json(eval_utterances);
  json eval_desc = json::object();
  for (const auto& [g, names] : eval_descriptors) eval_desc[gender_name(g)] = names;
  j["eval_descriptors"] = eval_desc;
  json genders = json::object();
  for (const auto& [speaker, g] : speaker_genders) genders[speaker] = gender_name(g);
  j["speaker_genders"] = genders;
  return j.dump(2) + "\n";
}

SplitPlan SplitPlan::deserialize(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::parse, std::string("bad split plan: ") + e.what());
  }
  try {
    SplitPlan plan;
    auto track = parse_track(j.at("track").get<std::string>());
    if (!track) fail(ErrorCode::parse, "bad split plan track");
    plan.track = *track;
    plan.seed = j.at("seed").get<uint64_t>();
    plan.config_digest = j.value("config_digest", "");
    plan.train_pairs = pairs_from_json(j.at("train_pairs"));
    plan.eval_pairs = pairs_from_json(j.at("eval_pairs"));
    plan.train_utterances = utterance_map_from_json(j.at("train_utterances"));
    plan.eval_utterances = utterance_map_from_json(j.at("eval_utterances"));
    for (auto it = j.at("eval_descriptors").begin(); it != j.at("eval_descriptors").end(); ++it) {
      auto g = parse_gender(it.key());
      if (!g) fail(ErrorCode::parse, "bad gender key in split plan");
      plan.eval_descriptors[*g] = it.value().get<std::vector<std::string>>();
    }
    for (auto it = j.at("speaker_genders").begin(); it != j.at("speaker_genders").end(); ++it) {
      auto g = parse_gender(it.value().get<std::string>());
      if (!g) fail(ErrorCode::parse, "bad gender value in split plan");
      plan.speaker_genders[it.key()] = *g;
    }
    // The config block is re-parsed leniently: canonical_text is written for
    // humans and digesting; the structured fields above are authoritative.
    std::istringstream cfg(j.at("config").get<std::string>());
    std::string line;
    while (std::getline(cfg, line)) {
      auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      std::string key = line.substr(0, eq);
      std::string value = line.substr(eq + 1);
      uint64_t n = 0;
      if (key == "eval_utterances" && parse_u64(value, n))
        plan.config.utterances_per_eval_speaker = n;
      else if (key == "eval_pairs_per_descriptor" && parse_u64(value, n))
        plan.config.eval_pairs_per_descriptor = n;
      else if (key == "positives_per_cell" && parse_u64(value, n))
        plan.config.positives_per_cell = n;
      else if (key == "negatives_per_cell" && parse_u64(value, n))
        plan.config.negatives_per_cell = n;
      else if (key == "seed" && parse_u64(value, n))
        plan.config.seed = n;
      else if (key == "track")
        plan.config.track = plan.track;
      else if (starts_with(key, "eval_descriptors.")) {
        auto g = parse_gender(key.substr(std::string("eval_descriptors.").size()));
        if (g && !value.empty()) plan.config.eval_descriptors[*g] = split(value, ',');
      } else if (starts_with(key, "train_speakers.")) {
        auto g = parse_gender(key.substr(std::string("train_speakers.").size()));
        if (g && parse_u64(value, n)) plan.config.train_speaker_count[*g] = n;
      } else if (starts_with(key, "eval_speakers.")) {
        auto g = parse_gender(key.substr(std::string("eval_speakers.").size()));
        if (g && parse_u64(value, n)) plan.config.eval_speaker_count[*g] = n;
      }
    }
    return plan;
  } catch (const json::exception& e) {
    fail(ErrorCode::parse, std::string("bad split plan: ") + e.what());
  }
}

std::set<std::string> SplitPlan::train_speakers() const {
  std::set<std::string> out;
  for (const auto& p : train_pairs) {
    out.insert(p.weaker_speaker);
    out.insert(p.stronger_speaker);
  }
  for (const auto& [s, utts] : train_utterances) out.insert(s);
  return out;
}

std::set<std::string> SplitPlan::eval_speakers() const {
  std::set<std::string> out;
  for (const auto& p : eval_pairs) {
    out.insert(p.weaker_speaker);
    out.insert(p.stronger_speaker);
  }
  return out;
}

std::string EvalCell::key() const {
  return std::string(gender_name(gender)) + "|" + descriptor + "|" +
         weaker_speaker + "|" + stronger_speaker;
}

std::string EvalCell::id_prefix(Track track) const {
  return std::string(track_name(track)) + "-" + gender_name(gender) + "-" +
         descriptor + "-" + std::to_string(pair_index);
}

std::vector<EvalCell> enumerate_cells(const SplitPlan& split) {
  // Group eval pairs by (gender, descriptor); pair_index is the pair's rank
  // within its group sorted by (weaker, stronger).
  std::map<std::pair<std::string, std::string>,
           std::vector<const OrderedPairAnnotation*>>
      groups;
  for (const auto& pair : split.eval_pairs) {
    Gender g = pair_gender(split, pair);
    auto it = split.eval_descriptors.find(g);
    if (it == split.eval_descriptors.end()) continue;
    for (const std::string& v : pair.descriptors) {
      if (std::find(it->second.begin(), it->second.end(), v) != it->second.end())
        groups[{gender_name(g), v}].push_back(&pair);
    }
  }
  std::vector<EvalCell> cells;
  for (auto& [key, pairs] : groups) {
    std::sort(pairs.begin(), pairs.end(),
              [](const OrderedPairAnnotation* a, const OrderedPairAnnotation* b) {
                return std::tie(a->weaker_speaker, a->stronger_speaker) <
                       std::tie(b->weaker_speaker, b->stronger_speaker);
              });
    for (size_t i = 0; i < pairs.size(); ++i) {
      EvalCell cell;
      cell.gender = *parse_gender(key.first);
      cell.descriptor = key.second;
      cell.weaker_speaker = pairs[i]->weaker_speaker;
      cell.stronger_speaker = pairs[i]->stronger_speaker;
      cell.pair_index = i;
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

namespace {

// Seeded shuffle, then first `count` ids, returned sorted.
std::vector<std::string> pick_speakers(std::vector<std::string> pool,
                                       size_t count, Rng& rng) {
  rng.shuffle(pool);
  pool.resize(count);
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace

SplitPlan build_split(const AnnotationSet& annotations, const SplitConfig& config) {
  SplitPlan plan;
  plan.track = config.track;
  plan.eval_descriptors = config.eval_descriptors;
  plan.seed = config.seed;
  plan.config = config;

  const SpeakerInventory& inventory = annotations.speakers;
  std::map<Gender, std::set<std::string>> train_set, eval_set;

  for (Gender g : {Gender::male, Gender::female}) {
    std::vector<std::string> pool = inventory.speaker_ids(g);
    auto want_it = config.train_speaker_count.find(g);
    size_t want = want_it == config.train_speaker_count.end() ? 0 : want_it->second;
    if (pool.size() < want)
      fail(ErrorCode::insufficient_speakers,
           std::string("requested ") + std::to_string(want) + " " + gender_name(g) +
               " training speakers but the corpus has " + std::to_string(pool.size()));
    Rng rng = Rng::keyed(config.seed, std::string("split|speakers|") + gender_name(g));
    std::vector<std::string> train = pick_speakers(pool, want, rng);
    train_set[g] = {train.begin(), train.end()};

    if (config.track == Track::unseen) {
      std::vector<std::string> rest;
      for (const std::string& s : pool)
        if (!train_set[g].count(s)) rest.push_back(s);
      auto eval_want_it = config.eval_speaker_count.find(g);
      size_t eval_want = eval_want_it == config.eval_speaker_count.end() ? 0 : eval_want_it->second;
      if (eval_want == 0) eval_want = rest.size();
      if (rest.size() < eval_want)
        fail(ErrorCode::insufficient_speakers,
             std::string("requested ") + std::to_string(eval_want) + " " + gender_name(g) +
                 " eval speakers but only " + std::to_string(rest.size()) + " remain");
      Rng erng = Rng::keyed(config.seed, std::string("split|evalspeakers|") + gender_name(g));
      std::vector<std::string> eval = pick_speakers(rest, eval_want, erng);
      eval_set[g] = {eval.begin(), eval.end()};
    } else {
      eval_set[g] = train_set[g];  // seen: eval pairs live inside the train speakers
    }
  }

  // Candidate eval pairs: both speakers in the eval pool, descriptor overlap
  // with the gender's configured eval set.
  std::map<std::pair<Gender, std::string>, std::vector<const OrderedPairAnnotation*>>
      candidates;
  for (const auto& pair : annotations.pairs) {
    const SpeakerRecord* rec = inventory.find(pair.weaker_speaker);
    if (!rec) continue;
    Gender g = rec->gender;
    if (!eval_set[g].count(pair.weaker_speaker) ||
        !eval_set[g].count(pair.stronger_speaker))
      continue;
    auto it = config.eval_descriptors.find(g);
    if (it == config.eval_descriptors.end()) continue;
    for (const std::string& v : pair.descriptors)
      if (std::find(it->second.begin(), it->second.end(), v) != it->second.end())
        candidates[{g, v}].push_back(&pair);
  }

  std::set<std::pair<std::string, std::string>> chosen_pairs;
  std::vector<const OrderedPairAnnotation*> eval_pairs;
  for (const auto& [g, names] : config.eval_descriptors) {
    for (const std::string& v : names) {
      auto it = candidates.find({g, v});
      if (it == candidates.end() || it->second.empty())
        fail(ErrorCode::descriptor_uncovered,
             std::string("eval descriptor '") + v + "' (" + gender_name(g) +
                 ") has no eligible evaluation pair");
      std::vector<const OrderedPairAnnotation*> pool = it->second;
      std::sort(pool.begin(), pool.end(),
                [](const OrderedPairAnnotation* a, const OrderedPairAnnotation* b) {
                  return std::tie(a->weaker_speaker, a->stronger_speaker) <
                         std::tie(b->weaker_speaker, b->stronger_speaker);
                });
      if (config.eval_pairs_per_descriptor > 0 &&
          pool.size() > config.eval_pairs_per_descriptor) {
        Rng rng = Rng::keyed(config.seed, std::string("split|pairs|") +
                                              gender_name(g) + "|" + v);
        rng.shuffle(pool);
        pool.resize(config.eval_pairs_per_descriptor);
      }
      for (const OrderedPairAnnotation* p : pool) {
        if (chosen_pairs.insert({p->weaker_speaker, p->stronger_speaker}).second)
          eval_pairs.push_back(p);
      }
    }
  }
  std::sort(eval_pairs.begin(), eval_pairs.end(),
            [](const OrderedPairAnnotation* a, const OrderedPairAnnotation* b) {
              return std::tie(a->weaker_speaker, a->stronger_speaker) <
                     std::tie(b->weaker_speaker, b->stronger_speaker);
            });
  for (const OrderedPairAnnotation* p : eval_pairs) plan.eval_pairs.push_back(*p);

  // Training pairs: both speakers in the train pool; for the seen track the
  // evaluated ordered pairs are excluded entirely.
  for (const auto& pair : annotations.pairs) {
    const SpeakerRecord* rec = inventory.find(pair.weaker_speaker);
    if (!rec) continue;
    Gender g = rec->gender;
    if (!train_set[g].count(pair.weaker_speaker) ||
        !train_set[g].count(pair.stronger_speaker))
      continue;
    if (config.track == Track::seen &&
        chosen_pairs.count({pair.weaker_speaker, pair.stronger_speaker}))
      continue;
    plan.train_pairs.push_back(pair);
  }

  // Eval-phase utterances: in the seen track only speakers that actually
  // evaluate give up utterances; in the unseen track every eval speaker is
  // eval-phase (eligible as a distractor source).
  std::set<std::string> eval_speaker_ids;
  if (config.track == Track::seen) {
    for (const auto& p : plan.eval_pairs) {
      eval_speaker_ids.insert(p.weaker_speaker);
      eval_speaker_ids.insert(p.stronger_speaker);
    }
  } else {
    for (Gender g : {Gender::male, Gender::female})
      eval_speaker_ids.insert(eval_set[g].begin(), eval_set[g].end());
  }

  for (const std::string& s : eval_speaker_ids) {
    const SpeakerRecord* rec = inventory.find(s);
    std::vector<std::string> utts = rec->utterance_ids;
    if (utts.size() < config.utterances_per_eval_speaker)
      fail(ErrorCode::insufficient_utterances,
           "speaker " + s + " has " + std::to_string(utts.size()) +
               " utterances, needs " + std::to_string(config.utterances_per_eval_speaker) +
               " for the evaluation phase");
    std::sort(utts.begin(), utts.end());
    Rng rng = Rng::keyed(config.seed, "split|utts|" + s);
    std::vector<size_t> picked =
        rng.sample_indices(utts.size(), config.utterances_per_eval_speaker);
    std::sort(picked.begin(), picked.end());
    std::vector<std::string> chosen;
    for (size_t i : picked) chosen.push_back(utts[i]);
    plan.eval_utterances[s] = std::move(chosen);
  }

  // Train-phase utterances: everything not held out for evaluation.
  std::set<std::string> train_speaker_ids;
  for (Gender g : {Gender::male, Gender::female})
    train_speaker_ids.insert(train_set[g].begin(), train_set[g].end());
  for (const std::string& s : train_speaker_ids) {
    const SpeakerRecord* rec = inventory.find(s);
    std::vector<std::string> utts = rec->utterance_ids;
    std::sort(utts.begin(), utts.end());
    if (config.track == Track::seen && plan.eval_utterances.count(s)) {
      const auto& held = plan.eval_utterances.at(s);
      std::set<std::string> held_set(held.begin(), held.end());
      std::vector<std::string> rest;
      for (const std::string& u : utts)
        if (!held_set.count(u)) rest.push_back(u);
      utts = std::move(rest);
    }
    plan.train_utterances[s] = std::move(utts);
  }
  for (const auto& pair : plan.train_pairs) {
    for (const std::string& s : {pair.weaker_speaker, pair.stronger_speaker}) {
      auto it = plan.train_utterances.find(s);
      if (it == plan.train_utterances.end() || it->second.empty())
        fail(ErrorCode::insufficient_utterances,
             "training speaker " + s + " has no utterances left for the training phase");
    }
  }

  for (const auto& [id, rec] : inventory.speakers()) {
    if (train_speaker_ids.count(id) || eval_speaker_ids.count(id))
      plan.speaker_genders[id] = rec.gender;
  }
  return plan;
}

namespace {

struct CellTrialSink {
  std::vector<TrialItem> items;
};

void generate_cell(const SplitPlan& split, const EvalCell& cell,
                   uint64_t master_seed, CellTrialSink& sink) {
  const SplitConfig& cfg = split.config;
  Rng rng = Rng::keyed(master_seed, "trials|" + std::string(track_name(split.track)) +
                                        "|" + cell.key());
  const auto& utts_weaker = split.eval_utterances.at(cell.weaker_speaker);
  const auto& utts_stronger = split.eval_utterances.at(cell.stronger_speaker);
  const size_t n_w = utts_weaker.size();
  const size_t n_s = utts_stronger.size();
  const size_t pool = n_w * n_s;

  if (cfg.positives_per_cell > pool)
    fail(ErrorCode::insufficient_utterances,
         "cell " + cell.key() + ": positive pool of " + std::to_string(pool) +
             " cannot supply " + std::to_string(cfg.positives_per_cell) + " trials");

  std::vector<TrialItem> items;
  items.reserve(cfg.positives_per_cell + cfg.negatives_per_cell);

  // Positives <a in weaker, b in stronger>, hypothesis "second stronger" true.
  for (size_t idx : rng.sample_indices(pool, cfg.positives_per_cell)) {
    TrialItem item;
    item.utterance_first = utts_weaker[idx / n_s];
    item.utterance_second = utts_stronger[idx % n_s];
    item.descriptor = cell.descriptor;
    item.label = 1;
    items.push_back(std::move(item));
  }

  // Negatives: reversed pairs first.
  size_t reversal_take = std::min(cfg.negatives_per_cell, pool);
  for (size_t idx : rng.sample_indices(pool, reversal_take)) {
    TrialItem item;
    item.utterance_first = utts_stronger[idx / n_w];
    item.utterance_second = utts_weaker[idx % n_w];
    item.descriptor = cell.descriptor;
    item.label = 0;
    items.push_back(std::move(item));
  }

  if (reversal_take < cfg.negatives_per_cell) {
    // Top-up with distractors: same-gender eval-phase speakers D with no
    // (weaker, D, descriptor) annotation. Presumed-false hypothesis.
    size_t needed = cfg.negatives_per_cell - reversal_take;
    std::set<std::string> annotated_against;
    for (const auto& p : split.train_pairs)
      if (p.weaker_speaker == cell.weaker_speaker)
        for (const auto& v : p.descriptors)
          if (v == cell.descriptor) annotated_against.insert(p.stronger_speaker);
    for (const auto& p : split.eval_pairs)
      if (p.weaker_speaker == cell.weaker_speaker)
        for (const auto& v : p.descriptors)
          if (v == cell.descriptor) annotated_against.insert(p.stronger_speaker);

    std::vector<std::string> distractors;
    for (const auto& [speaker, utts] : split.eval_utterances) {
      if (speaker == cell.weaker_speaker || speaker == cell.stronger_speaker) continue;
      auto git = split.speaker_genders.find(speaker);
      if (git == split.speaker_genders.end() || git->second != cell.gender) continue;
      if (annotated_against.count(speaker)) continue;
      distractors.push_back(speaker);
    }

    size_t distractor_pool = 0;
    for (const auto& d : distractors)
      distractor_pool += n_w * split.eval_utterances.at(d).size();
    if (distractor_pool < needed)
      fail(ErrorCode::negative_pool_exhausted,
           "cell " + cell.key() + ": needs " + std::to_string(needed) +
               " distractor negatives but the pool holds " +
               std::to_string(distractor_pool));

    for (size_t flat : rng.sample_indices(distractor_pool, needed)) {
      size_t offset = flat;
      for (const auto& d : distractors) {
        const auto& utts_d = split.eval_utterances.at(d);
        size_t block = n_w * utts_d.size();
        if (offset < block) {
          TrialItem item;
          item.utterance_first = utts_weaker[offset / utts_d.size()];
          item.utterance_second = utts_d[offset % utts_d.size()];
          item.descriptor = cell.descriptor;
          item.label = 0;
          items.push_back(std::move(item));
          break;
        }
        offset -= block;
      }
    }
  }

  // Shuffle so the serial number does not leak the label, then assign ids.
  rng.shuffle(items);
  const std::string prefix = cell.id_prefix(split.track);
  for (size_t i = 0; i < items.size(); ++i) {
    char serial[24];
    std::snprintf(serial, sizeof(serial), "%04zu", i);
    items[i].trial_id = prefix + "-" + serial;
    sink.items.push_back(std::move(items[i]));
  }
}

}  // namespace

TrialList generate_trials(const SplitPlan& split, uint64_t seed) {
  for (const auto& [speaker, utts] : split.eval_utterances) {
    if (utts.size() < split.config.utterances_per_eval_speaker)
      fail(ErrorCode::insufficient_utterances,
           "eval speaker " + speaker + " provides only " +
               std::to_string(utts.size()) + " utterances");
  }
  TrialList list;
  list.split_ref = split.id();
  list.generation_seed = seed;
  list.config_digest = split.config_digest;
  CellTrialSink sink;
  for (const EvalCell& cell : enumerate_cells(split))
    generate_cell(split, cell, seed, sink);
  list.items = std::move(sink.items);
  return list;
}

ValidationReport audit_trials(const TrialList& trials, const SplitPlan& split) {
  ValidationReport report;

  std::map<std::string, const EvalCell*> cells_by_prefix;
  std::vector<EvalCell> cells = enumerate_cells(split);
  for (const EvalCell& cell : cells) cells_by_prefix[cell.id_prefix(split.track)] = &cell;

  std::map<std::string, std::pair<size_t, size_t>> counts;  // prefix -> (pos, neg)
  std::set<std::string> seen_ids;

  std::map<std::string, std::string> utterance_speaker;
  for (const auto& [speaker, utts] : split.eval_utterances)
    for (const auto& u : utts) utterance_speaker[u] = speaker;

  for (const TrialItem& item : trials.items) {
    if (!seen_ids.insert(item.trial_id).second)
      report.add_error("trial_id", "duplicate trial id " + item.trial_id);

    auto parts = parse_trial_id(item.trial_id);
    if (!parts) {
      report.add_error("trial_id", "trial id " + item.trial_id +
                                       " does not follow the id scheme");
      continue;
    }
    std::string prefix = parts->track + "-" + parts->gender + "-" +
                         parts->descriptor + "-" + std::to_string(parts->pair_index);
    auto cell_it = cells_by_prefix.find(prefix);
    if (cell_it == cells_by_prefix.end()) {
      report.add_error("cell", "trial " + item.trial_id +
                                   " references no evaluation cell of this split");
      continue;
    }
    const EvalCell& cell = *cell_it->second;

    auto first_it = utterance_speaker.find(item.utterance_first);
    auto second_it = utterance_speaker.find(item.utterance_second);
    if (first_it == utterance_speaker.end())
      report.add_error("membership", "trial " + item.trial_id + ": utterance " +
                                         item.utterance_first +
                                         " is not an eval-phase utterance");
    if (second_it == utterance_speaker.end())
      report.add_error("membership", "trial " + item.trial_id + ": utterance " +
                                         item.utterance_second +
                                         " is not an eval-phase utterance");
    if (first_it == utterance_speaker.end() || second_it == utterance_speaker.end())
      continue;
    if (first_it->second == second_it->second)
      report.add_error("cross_speaker", "trial " + item.trial_id +
                                            ": both utterances belong to " +
                                            first_it->second);
    if (item.descriptor != cell.descriptor)
      report.add_error("cell", "trial " + item.trial_id + ": descriptor " +
                                   item.descriptor + " does not match its cell");

    if (trials.has_labels) {
      bool ok = false;
      if (item.label == 1) {
        ok = first_it->second == cell.weaker_speaker &&
             second_it->second == cell.stronger_speaker;
      } else {
        bool reversal = first_it->second == cell.stronger_speaker &&
                        second_it->second == cell.weaker_speaker;
        bool distractor = first_it->second == cell.weaker_speaker &&
                          second_it->second != cell.stronger_speaker;
        ok = reversal || distractor;
      }
      if (!ok)
        report.add_error("membership",
                         "trial " + item.trial_id +
                             ": speaker roles do not match its label and cell");
      auto& c = counts[prefix];
      if (item.label == 1)
        ++c.first;
      else
        ++c.second;
    }
  }

  if (trials.has_labels) {
    for (const auto& [prefix, cell] : cells_by_prefix) {
      auto it = counts.find(prefix);
      size_t pos = it == counts.end() ? 0 : it->second.first;
      size_t neg = it == counts.end() ? 0 : it->second.second;
      if (pos != split.config.positives_per_cell || neg != split.config.negatives_per_cell)
        report.add_error("counts",
                         "cell " + prefix + " has " + std::to_string(pos) + "/" +
                             std::to_string(neg) + " positive/negative trials, expected " +
                             std::to_string(split.config.positives_per_cell) + "/" +
                             std::to_string(split.config.negatives_per_cell));
    }
  }
  return report;
}

std::string serialize_trials(const TrialList& trials, bool with_labels) {
  std::ostringstream out;
  if (!trials.config_digest.empty())
    out << "#config_digest=" << trials.config_digest << "\n";
  out << "#split_ref=" << trials.split_ref << "\n";
  out << "#seed=" << trials.generation_seed << "\n";
  for (const TrialItem& item : trials.items) {
    out << item.trial_id << '\t' << item.utterance_first << '\t'
        << item.utterance_second << '\t' << item.descriptor;
    if (with_labels) out << '\t' << item.label;
    out << '\n';
  }
  return out.str();
}

TrialList parse_trials(std::istream& in) {
  TrialList list;
  std::optional<bool> with_labels;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      if (starts_with(t, "#split_ref=")) list.split_ref = t.substr(11);
      else if (starts_with(t, "#seed=")) parse_u64(t.substr(6), list.generation_seed);
      else if (starts_with(t, "#config_digest=")) list.config_digest = t.substr(15);
      continue;
    }
    std::vector<std::string> cols = split(t, '\t');
    if (cols.size() != 4 && cols.size() != 5)
      fail(ErrorCode::parse, "trials:" + std::to_string(lineno) +
                                 ": expected 4 or 5 columns, got " +
                                 std::to_string(cols.size()));
    bool labeled = cols.size() == 5;
    if (!with_labels)
      with_labels = labeled;
    else if (*with_labels != labeled)
      fail(ErrorCode::parse, "trials:" + std::to_string(lineno) +
                                 ": mixed labeled and unlabeled rows");
    TrialItem item;
    item.trial_id = cols[0];
    item.utterance_first = cols[1];
    item.utterance_second = cols[2];
    item.descriptor = lower(trim(cols[3]));
    if (labeled) {
      int64_t label = 0;
      if (!parse_i64(trim(cols[4]), label) || (label != 0 && label != 1))
        fail(ErrorCode::parse, "trials:" + std::to_string(lineno) +
                                   ": label must be 0 or 1, got '" + cols[4] + "'");
      item.label = static_cast<int>(label);
    }
    list.items.push_back(std::move(item));
  }
  list.has_labels = with_labels.value_or(true);
  return list;
}

std::optional<TrialIdParts> parse_trial_id(std::string_view trial_id) {
  std::vector<std::string> tokens = split(trial_id, '-');
  if (tokens.size() < 5) return std::nullopt;
  TrialIdParts parts;
  parts.track = tokens[0];
  parts.gender = tokens[1];
  uint64_t pair_index = 0, serial = 0;
  if (!parse_u64(tokens[tokens.size() - 2], pair_index)) return std::nullopt;
  if (!parse_u64(tokens[tokens.size() - 1], serial)) return std::nullopt;
  parts.pair_index = pair_index;
  parts.serial = serial;
  std::vector<std::string> desc(tokens.begin() + 2, tokens.end() - 2);
  parts.descriptor = join(desc, "-");
  if (parts.descriptor.empty()) return std::nullopt;
  if (!parse_track(parts.track) || !parse_gender(parts.gender)) return std::nullopt;
  return parts;
}

}  // namespace vtad
