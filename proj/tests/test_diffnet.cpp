// tests/test_diffnet.cpp

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
#include <filesystem>
#include <sstream>

#include "vtad/diffnet.hpp"
#include "vtad/rng.hpp"
#include "vtad/synthetic.hpp"

using namespace vtad;
using Eigen::MatrixXd;

namespace {

namespace fs = std::filesystem;

DiffNetConfig tiny_config(bool batch_norm, Activation act = Activation::tanh_fn) {
  DiffNetConfig cfg;
  cfg.input_dim = 8;  // d = 4
  cfg.hidden = {8};
  cfg.output_dim = 3;
  cfg.use_batch_norm = batch_norm;
  cfg.activation = act;
  cfg.seed = 100;
  return cfg;
}

std::vector<std::string> tiny_nodes() { return {"bright", "thin", "low"}; }

void zero_parameters(DiffNetModel& model) {
  for (auto span : model.parameter_spans())
    for (double& p : span) p = 0.0;
}

// Central finite differences against analytic gradients, training mode.
// Differences below 1e-9 absolute sit under the finite-difference noise
// floor (machine epsilon times the loss over the step) and count as a match.
double max_relative_gradient_error(DiffNetModel& model, const MatrixXd& X,
                                   const MatrixXd& Y, const MatrixXd& M) {
  model.loss_and_gradients(X, Y, M);
  std::vector<std::vector<double>> analytic;
  for (auto span : model.gradient_spans())
    analytic.emplace_back(span.begin(), span.end());

  const double eps = 1e-5;
  double worst = 0.0;
  auto params = model.parameter_spans();
  for (size_t t = 0; t < params.size(); ++t) {
    for (size_t i = 0; i < params[t].size(); ++i) {
      double saved = params[t][i];
      params[t][i] = saved + eps;
      double up = model.loss_and_gradients(X, Y, M);
      params[t][i] = saved - eps;
      double down = model.loss_and_gradients(X, Y, M);
      params[t][i] = saved;
      double numeric = (up - down) / (2.0 * eps);
      double diff = std::abs(numeric - analytic[t][i]);
      if (diff <= 1e-9) continue;
      double denom = std::max(std::abs(numeric), std::abs(analytic[t][i]));
      worst = std::max(worst, diff / denom);
    }
  }
  return worst;
}

struct RandomBatch {
  MatrixXd X, Y, M;
};

RandomBatch random_batch(size_t rows, size_t input_dim, size_t output_dim,
                         uint64_t seed) {
  Rng rng(seed);
  RandomBatch batch;
  batch.X = MatrixXd::Zero(rows, input_dim);
  batch.Y = MatrixXd::Zero(rows, output_dim);
  batch.M = MatrixXd::Zero(rows, output_dim);
  for (Eigen::Index r = 0; r < batch.X.rows(); ++r)
    for (Eigen::Index c = 0; c < batch.X.cols(); ++c) batch.X(r, c) = rng.normal();
  for (Eigen::Index r = 0; r < batch.Y.rows(); ++r) {
    size_t supervised = 1 + rng.below(output_dim);
    for (size_t k = 0; k < supervised; ++k) {
      Eigen::Index node = static_cast<Eigen::Index>(rng.below(output_dim));
      batch.M(r, node) = 1.0;
      batch.Y(r, node) = static_cast<double>(rng.below(2));
    }
  }
  return batch;
}

}  // namespace

TEST_CASE("an all-zero model scores exactly one half everywhere") {
  for (bool bn : {false, true}) {
    DiffNetModel model = DiffNetModel::init(tiny_config(bn), tiny_nodes(), "enc");
    zero_parameters(model);
    Rng rng(4);
    MatrixXd X(5, 8);
    for (Eigen::Index r = 0; r < 5; ++r)
      for (Eigen::Index c = 0; c < 8; ++c) X(r, c) = rng.normal();
    MatrixXd probs = model.forward(X);
    for (Eigen::Index r = 0; r < probs.rows(); ++r)
      for (Eigen::Index c = 0; c < probs.cols(); ++c)
        CHECK(probs(r, c) == 0.5);  // sigmoid(0) exactly
  }
}

TEST_CASE("hand-computed forward pass on a 2-dim toy config") {
  // d = 1, one hidden layer of width 2 with identity-like weights, no batch
  // norm, tanh. The expected value is recomputed here by evaluating the
  // affine+tanh+affine+sigmoid chain by hand.
  DiffNetConfig cfg;
  cfg.input_dim = 2;
  cfg.hidden = {2};
  cfg.output_dim = 1;
  cfg.use_batch_norm = false;
  cfg.activation = Activation::tanh_fn;
  DiffNetModel model = DiffNetModel::init(cfg, {"bright"}, "enc");

  auto params = model.parameter_spans();
  // layer 0: W (2x2) column-major = identity, b = 0
  params[0][0] = 1.0; params[0][1] = 0.0; params[0][2] = 0.0; params[0][3] = 1.0;
  params[1][0] = 0.0; params[1][1] = 0.0;
  // out: W (1x2) = [0.5, -1.0], b = 0.1
  params[2][0] = 0.5; params[2][1] = -1.0;
  params[3][0] = 0.1;

  std::vector<float> first = {0.3f};
  std::vector<float> second = {-0.2f};
  std::vector<double> got = model.forward_pair(first, second);

  double h1 = std::tanh(static_cast<double>(0.3f));
  double h2 = std::tanh(static_cast<double>(-0.2f));
  double z = 0.5 * h1 - 1.0 * h2 + 0.1;
  double expected = 1.0 / (1.0 + std::exp(-z));  // ~0.6195
  REQUIRE(got.size() == 1);
  CHECK(got[0] == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("concatenation order matters: swapped inputs differ") {
  DiffNetModel model = DiffNetModel::init(tiny_config(false), tiny_nodes(), "enc");
  std::vector<float> a = {0.1f, -0.4f, 0.9f, 0.2f};
  std::vector<float> b = {-0.7f, 0.3f, 0.05f, -0.1f};
  CHECK(model.forward_pair(a, b) != model.forward_pair(b, a));
}

TEST_CASE("analytic gradients match central finite differences") {
  // tiny config: d = 4, one hidden layer of 8, N = 3; batch norm on.
  for (Activation act : {Activation::tanh_fn, Activation::silu}) {
    DiffNetModel model = DiffNetModel::init(tiny_config(true, act), tiny_nodes(), "enc");
    for (uint64_t point = 0; point < 5; ++point) {
      // re-randomize parameters per point
      Rng rng(500 + point);
      for (auto span : model.parameter_spans())
        for (double& p : span) p = 0.4 * rng.normal();
      RandomBatch batch = random_batch(5, 8, 3, 900 + point);
      CHECK(max_relative_gradient_error(model, batch.X, batch.Y, batch.M) < 1e-4);
    }
  }
}

TEST_CASE("gradient check also passes without batch norm") {
  DiffNetModel model = DiffNetModel::init(tiny_config(false), tiny_nodes(), "enc");
  RandomBatch batch = random_batch(6, 8, 3, 77);
  CHECK(max_relative_gradient_error(model, batch.X, batch.Y, batch.M) < 1e-4);
}

TEST_CASE("masked nodes contribute nothing to loss or gradients") {
  DiffNetModel model = DiffNetModel::init(tiny_config(true), tiny_nodes(), "enc");
  RandomBatch batch = random_batch(6, 8, 3, 11);
  // force one unsupervised entry
  batch.M(2, 1) = 0.0;
  double loss = model.loss_and_gradients(batch.X, batch.Y, batch.M);
  std::vector<std::vector<double>> grads;
  for (auto span : model.gradient_spans()) grads.emplace_back(span.begin(), span.end());

  MatrixXd Y2 = batch.Y;
  Y2(2, 1) = 1.0 - Y2(2, 1);  // perturb the masked label
  double loss2 = model.loss_and_gradients(batch.X, Y2, batch.M);
  CHECK(loss2 == loss);
  auto spans = model.gradient_spans();
  for (size_t t = 0; t < spans.size(); ++t)
    for (size_t i = 0; i < spans[t].size(); ++i) CHECK(spans[t][i] == grads[t][i]);
}

TEST_CASE("an all-masked batch is an error") {
  DiffNetModel model = DiffNetModel::init(tiny_config(true), tiny_nodes(), "enc");
  RandomBatch batch = random_batch(4, 8, 3, 13);
  batch.M.setZero();
  try {
    model.loss_and_gradients(batch.X, batch.Y, batch.M);
    FAIL("expected AllMasked");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::all_masked);
  }
}

TEST_CASE("training a single example pushes its node monotonically toward 1") {
  DiffNetConfig cfg;
  cfg.input_dim = 4;
  cfg.hidden = {6};
  cfg.output_dim = 2;
  cfg.use_batch_norm = false;  // batch statistics degenerate at batch size 1
  cfg.activation = Activation::tanh_fn;
  cfg.optimizer = OptimizerKind::sgd;
  cfg.momentum = 0.0;
  cfg.learning_rate = 0.05;
  cfg.seed = 3;
  DiffNetModel model = DiffNetModel::init(cfg, {"bright", "low"}, "enc");

  std::vector<float> a = {0.4f, -0.2f};
  std::vector<float> b = {0.1f, 0.7f};
  MatrixXd X(1, 4);
  X << a[0], a[1], b[0], b[1];
  MatrixXd Y = MatrixXd::Zero(1, 2);
  MatrixXd M = MatrixXd::Zero(1, 2);
  Y(0, 0) = 1.0;
  M(0, 0) = 1.0;

  double previous = model.forward_pair(a, b)[0];
  for (int step = 0; step < 200; ++step) {
    model.loss_and_gradients(X, Y, M);
    model.optimizer_step();
    double current = model.forward_pair(a, b)[0];
    CHECK(current >= previous);
    previous = current;
  }
  CHECK(previous > 0.9);
}

TEST_CASE("training errors: empty set and non-finite loss") {
  DiffNetModel model = DiffNetModel::init(tiny_config(false), tiny_nodes(), "enc");
  auto empty_sampler = [](size_t) { return std::vector<TrainingExample>{}; };
  try {
    train_model(model, empty_sampler, 1);
    FAIL("expected EmptyTrainingSet");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::empty_training_set);
  }

  // a NaN parameter poisons the forward pass
  auto params = model.parameter_spans();
  params[0][0] = std::nan("");
  std::vector<float> a = {0.1f, 0.2f, 0.3f, 0.4f};
  std::vector<float> b = {0.5f, 0.6f, 0.7f, 0.8f};
  TrainingExample ex;
  ex.first = nullptr;
  std::vector<float> af = a, bf = b;
  ex.first = &af;
  ex.second = &bf;
  ex.targets = {{0, 1.0f}};
  auto sampler = [&](size_t) { return std::vector<TrainingExample>{ex}; };
  try {
    train_model(model, sampler, 1);
    FAIL("expected NonFiniteLoss");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::nonfinite_loss);
    CHECK(std::string(e.what()).find("epoch 0") != std::string::npos);
  }
}

TEST_CASE("forward outputs stay strictly inside (0,1) and are deterministic") {
  DiffNetModel model = DiffNetModel::init(tiny_config(true), tiny_nodes(), "enc");
  Rng rng(2);
  MatrixXd X(64, 8);
  for (Eigen::Index r = 0; r < X.rows(); ++r)
    for (Eigen::Index c = 0; c < X.cols(); ++c) X(r, c) = 3.0 * rng.normal();
  MatrixXd p1 = model.forward(X);
  MatrixXd p2 = model.forward(X);
  CHECK((p1.array() == p2.array()).all());  // bit-identical inference
  for (Eigen::Index r = 0; r < p1.rows(); ++r)
    for (Eigen::Index c = 0; c < p1.cols(); ++c) {
      CHECK(p1(r, c) > 0.0);
      CHECK(p1(r, c) < 1.0);
    }
}

TEST_CASE("inference ignores batch composition (running statistics)") {
  DiffNetModel model = DiffNetModel::init(tiny_config(true), tiny_nodes(), "enc");
  // train a little so running stats move away from init
  RandomBatch batch = random_batch(16, 8, 3, 5);
  for (int i = 0; i < 10; ++i) {
    model.loss_and_gradients(batch.X, batch.Y, batch.M);
    model.optimizer_step();
  }
  std::vector<float> a = {0.1f, 0.2f, -0.3f, 0.4f};
  std::vector<float> b = {0.0f, -0.1f, 0.2f, 0.3f};
  std::vector<double> alone = model.forward_pair(a, b);

  MatrixXd X = MatrixXd::Zero(3, 8);
  for (size_t i = 0; i < 4; ++i) {
    X(0, static_cast<Eigen::Index>(i)) = a[i];
    X(0, static_cast<Eigen::Index>(4 + i)) = b[i];
  }
  X.row(1).setConstant(1.0);
  X.row(2) << -2.0, 0.5, 0.1, 0.9, 0.2, 0.2, 0.2, 0.2;
  MatrixXd together = model.forward(X);
  for (size_t n = 0; n < 3; ++n)
    CHECK(together(0, static_cast<Eigen::Index>(n)) == alone[n]);
}

TEST_CASE("model save/load round-trips bit-exactly") {
  DiffNetModel model = DiffNetModel::init(tiny_config(true), tiny_nodes(), "enc-x");
  // move parameters and running stats off their init values
  RandomBatch batch = random_batch(12, 8, 3, 21);
  for (int i = 0; i < 5; ++i) {
    model.loss_and_gradients(batch.X, batch.Y, batch.M);
    model.optimizer_step();
  }
  model.set_config_digest("cafe000000000000");
  fs::path path = fs::temp_directory_path() / "vtad_model_test.vtadm";
  model.save(path);
  DiffNetModel loaded = DiffNetModel::load(path);
  CHECK(loaded == model);
  CHECK(loaded.config_digest() == "cafe000000000000");
  CHECK(loaded.encoder_id() == "enc-x");

  Rng rng(9);
  for (int i = 0; i < 100; ++i) {
    std::vector<float> a(4), b(4);
    for (float& x : a) x = static_cast<float>(rng.normal());
    for (float& x : b) x = static_cast<float>(rng.normal());
    std::vector<double> p = model.forward_pair(a, b);
    std::vector<double> q = loaded.forward_pair(a, b);
    for (size_t n = 0; n < p.size(); ++n) CHECK(p[n] == q[n]);
  }
  fs::remove(path);
}

TEST_CASE("model container detects truncation, corruption and bad versions") {
  DiffNetModel model = DiffNetModel::init(tiny_config(false), tiny_nodes(), "enc");
  fs::path path = fs::temp_directory_path() / "vtad_model_bad.vtadm";
  model.save(path);
  std::string bytes = read_binary_file(path);

  SUBCASE("truncated file") {
    write_binary_file(path, bytes.substr(0, bytes.size() / 2));
    try {
      DiffNetModel::load(path);
      FAIL("expected CorruptModelFile");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::corrupt_model);
    }
  }
  SUBCASE("flipped payload byte") {
    std::string bad = bytes;
    bad[bytes.size() / 2] ^= 0x40;
    write_binary_file(path, bad);
    try {
      DiffNetModel::load(path);
      FAIL("expected CorruptModelFile");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::corrupt_model);
    }
  }
  SUBCASE("foreign magic") {
    std::string bad = bytes;
    bad[0] = 'X';
    write_binary_file(path, bad);
    try {
      DiffNetModel::load(path);
      FAIL("expected VersionMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::version_mismatch);
    }
  }
  fs::remove(path);
}

TEST_CASE("prediction applies the threshold with ties resolving to 1") {
  DiffNetConfig cfg = tiny_config(false);
  DiffNetModel model = DiffNetModel::init(cfg, tiny_nodes(), "enc");
  zero_parameters(model);

  EmbeddingTable table("enc", 4);
  table.insert("u1", {0.1f, 0.2f, 0.3f, 0.4f});
  table.insert("u2", {0.5f, 0.6f, 0.7f, 0.8f});

  TrialList trials;
  trials.items.push_back({"t-1", "u1", "u2", "bright", 1});
  trials.items.push_back({"t-2", "u2", "u1", "low", 0});

  // zero model: every score is exactly 0.5 == threshold -> decision 1
  std::vector<PredictionRecord> records = predict_trials(model, trials, table);
  REQUIRE(records.size() == 2);
  CHECK(records[0].trial_id == "t-1");
  for (const PredictionRecord& rec : records) {
    CHECK(rec.score == 0.5);
    CHECK(rec.decision == 1);
  }
}

TEST_CASE("prediction error paths") {
  DiffNetModel model = DiffNetModel::init(tiny_config(false), tiny_nodes(), "enc");
  EmbeddingTable table("enc", 4);
  table.insert("u1", {0.1f, 0.2f, 0.3f, 0.4f});
  table.insert("u2", {0.5f, 0.6f, 0.7f, 0.8f});

  SUBCASE("missing embedding names the utterance") {
    TrialList trials;
    trials.items.push_back({"t-1", "u1", "u9", "bright", 1});
    try {
      predict_trials(model, trials, table);
      FAIL("expected MissingEmbedding");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::missing_embedding);
      CHECK(std::string(e.what()).find("u9") != std::string::npos);
    }
  }
  SUBCASE("descriptor outside the model's nodes") {
    TrialList trials;
    trials.items.push_back({"t-1", "u1", "u2", "shrill", 1});
    try {
      predict_trials(model, trials, table);
      FAIL("expected UnknownDescriptorNode");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::unknown_descriptor_node);
    }
  }
  SUBCASE("encoder binding mismatch") {
    EmbeddingTable other("other-enc", 4);
    other.insert("u1", {0.1f, 0.2f, 0.3f, 0.4f});
    other.insert("u2", {0.5f, 0.6f, 0.7f, 0.8f});
    TrialList trials;
    trials.items.push_back({"t-1", "u1", "u2", "bright", 1});
    try {
      predict_trials(model, trials, other);
      FAIL("expected EncoderMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::encoder_mismatch);
    }
  }
}

TEST_CASE("separable synthetic data trains below 0.1 loss") {
  DescriptorVocabulary vocab = DescriptorVocabulary::default_vocabulary();
  SyntheticCorpusConfig scc;
  scc.speakers_per_gender = 8;
  scc.utterances_per_speaker = 4;
  scc.dim = 20;
  scc.noise_scale = 0.0;
  scc.margin = 0.3;
  scc.seed = 12;
  SyntheticCorpus corpus = build_synthetic_corpus(vocab, scc);

  std::vector<std::string> nodes = vocab.names_for(Gender::male);
  std::vector<OrderedPairAnnotation> male_pairs;
  for (const auto& p : corpus.annotations.pairs)
    if (corpus.annotations.speakers.find(p.weaker_speaker)->gender == Gender::male)
      male_pairs.push_back(p);
  REQUIRE_FALSE(male_pairs.empty());

  std::map<std::string, std::vector<std::string>> train_utts;
  for (const auto& [id, rec] : corpus.annotations.speakers.speakers())
    train_utts[id] = rec.utterance_ids;

  DiffNetConfig cfg;
  cfg.input_dim = 2 * scc.dim;
  cfg.hidden = {32, 32};
  cfg.output_dim = nodes.size();
  cfg.seed = 19;
  cfg.epochs = 25;
  cfg.batch_size = 32;
  cfg.learning_rate = 3e-3;
  cfg.pairs_per_annotation = 4;
  DiffNetModel model = DiffNetModel::init(cfg, nodes, corpus.embeddings.encoder_id());

  uint64_t frozen_before = corpus.embeddings.content_checksum();
  auto sampler = [&](size_t epoch) {
    return sample_training_examples(male_pairs, train_utts, corpus.embeddings, nodes,
                                    cfg.pairs_per_annotation, cfg.seed, epoch);
  };
  TrainingLog log = train_model(model, sampler, cfg.epochs);
  REQUIRE_FALSE(log.entries.empty());
  CHECK(log.entries.back().mean_loss < 0.1);
  // smoothed loss is monotone non-increasing on separable data
  for (size_t i = 1; i < log.entries.size(); ++i)
    CHECK(log.entries[i].smoothed_loss <= log.entries[i - 1].smoothed_loss + 1e-9);
  // frozen contract: inputs untouched
  CHECK(corpus.embeddings.content_checksum() == frozen_before);

  std::istringstream in(log.serialize());
  TrainingLog reparsed = TrainingLog::parse(in);
  CHECK(reparsed.entries.size() == log.entries.size());
  CHECK(reparsed.entries.back().mean_loss ==
        doctest::Approx(log.entries.back().mean_loss));
}

TEST_CASE("symmetric augmentation builds forward and reversed examples") {
  EmbeddingTable table("enc", 2);
  table.insert("a_0", {1.0f, 0.0f});
  table.insert("b_0", {0.0f, 1.0f});
  std::vector<OrderedPairAnnotation> pairs = {{"a", "b", {"bright", "low"}}};
  std::map<std::string, std::vector<std::string>> utts = {{"a", {"a_0"}},
                                                          {"b", {"b_0"}}};
  std::vector<std::string> nodes = {"bright", "low", "thin"};
  auto examples = sample_training_examples(pairs, utts, table, nodes, 2, 1, 0);
  REQUIRE(examples.size() == 4);  // 2 draws x (forward + reversed)
  size_t forward = 0, reversed = 0;
  for (const TrainingExample& ex : examples) {
    REQUIRE(ex.targets.size() == 2);
    if (ex.targets[0].second == 1.0f) {
      ++forward;
      CHECK((*ex.first)[0] == 1.0f);  // weaker first
    } else {
      ++reversed;
      CHECK((*ex.first)[0] == 0.0f);
    }
    CHECK(ex.targets[0].first == 0);
    CHECK(ex.targets[1].first == 1);
  }
  CHECK(forward == 2);
  CHECK(reversed == 2);

  // descriptors outside the node list are skipped entirely
  auto none = sample_training_examples({{"a", "b", {"shrill"}}}, utts, table, nodes,
                                       2, 1, 0);
  CHECK(none.empty());
}
