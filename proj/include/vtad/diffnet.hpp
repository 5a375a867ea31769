// include/vtad/diffnet.hpp

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

// The baseline comparator: a pair of frozen speaker embeddings is
// concatenated and pushed through fully-connected layers (optionally with
// batch normalization) into one sigmoid node per descriptor. Node n predicts
// the probability that the second utterance is stronger than the first in
// descriptor n.
//
// Training minimizes masked per-node binary cross-entropy: each annotated
// ordered pair supervises only its own descriptor nodes, once in annotation
// order (label 1) and once reversed (label 0). Batch normalization uses
// batch statistics during training and stored running statistics at
// inference, so inference is deterministic.

#ifndef VTAD_DIFFNET_HPP_
#define VTAD_DIFFNET_HPP_

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vtad/common.hpp"
#include "vtad/encoders.hpp"
#include "vtad/protocol.hpp"

namespace vtad {

enum class Activation { tanh_fn, relu, silu };
enum class OptimizerKind { sgd, adam };

const char* activation_name(Activation a);
std::optional<Activation> parse_activation(std::string_view token);
const char* optimizer_name(OptimizerKind o);
std::optional<OptimizerKind> parse_optimizer(std::string_view token);

struct DiffNetConfig {
  size_t input_dim = 0;   // 2 * embedding dimension
  std::vector<size_t> hidden = {256, 256};
  size_t output_dim = 0;  // number of descriptor nodes
  bool use_batch_norm = true;
  Activation activation = Activation::tanh_fn;
  double threshold = 0.5;  // decision = 1 iff score >= threshold

  double learning_rate = 1e-3;
  size_t batch_size = 64;
  size_t epochs = 15;
  OptimizerKind optimizer = OptimizerKind::adam;
  double momentum = 0.9;  // sgd only
  size_t pairs_per_annotation = 8;
  uint64_t seed = 1;

  bool operator==(const DiffNetConfig&) const = default;
};

struct PredictionRecord {
  std::string trial_id;
  double score = 0.0;
  int decision = 0;

  bool operator==(const PredictionRecord&) const = default;
};

// One supervised utterance-level pair. Embeddings are borrowed; targets list
// the supervised (node, label) entries, all other nodes are masked out.
struct TrainingExample {
  const std::vector<float>* first = nullptr;
  const std::vector<float>* second = nullptr;
  std::vector<std::pair<size_t, float>> targets;
};

struct TrainingLog {
  struct Entry {
    size_t epoch = 0;
    double mean_loss = 0.0;
    double smoothed_loss = 0.0;  // exponential moving average over epochs
  };
  std::vector<Entry> entries;
  uint64_t seed = 0;
  std::string config_digest;

  std::string serialize() const;
  static TrainingLog parse(std::istream& in);
};

class DiffNetModel {
 public:
  DiffNetModel() = default;

  // Seeded Xavier-uniform weights; batch-norm gamma 1, beta 0, running mean
  // 0 and variance 1.
  static DiffNetModel init(const DiffNetConfig& config,
                           std::vector<std::string> node_names,
                           std::string encoder_id);

  const DiffNetConfig& config() const { return config_; }
  const std::vector<std::string>& node_names() const { return node_names_; }
  const std::string& encoder_id() const { return encoder_id_; }
  const std::string& config_digest() const { return config_digest_; }
  void set_config_digest(std::string digest) { config_digest_ = std::move(digest); }
  std::optional<size_t> node_index(std::string_view descriptor) const;

  // Inference forward: rows of X are concatenated embedding pairs; returns
  // per-node probabilities strictly inside (0, 1).
  Eigen::MatrixXd forward(const Eigen::MatrixXd& X) const;
  // Single-pair convenience; validates dimensions.
  std::vector<double> forward_pair(std::span<const float> first,
                                   std::span<const float> second) const;

  // Training-mode forward/backward over one batch. Y holds labels, M the
  // 0/1 supervision mask. Returns the masked mean BCE and leaves gradients
  // in the layer buffers; updates batch-norm running statistics.
  double loss_and_gradients(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                            const Eigen::MatrixXd& M);
  void optimizer_step();

  // Flat views over every trainable parameter and its gradient, in a fixed
  // order (used by the finite-difference gradient check).
  std::vector<std::span<double>> parameter_spans();
  std::vector<std::span<double>> gradient_spans();

  void save(const std::filesystem::path& path) const;
  static DiffNetModel load(const std::filesystem::path& path);

  bool operator==(const DiffNetModel& other) const;

 private:
  struct Linear {
    Eigen::MatrixXd W;  // out x in
    Eigen::VectorXd b;
    Eigen::MatrixXd gW;
    Eigen::VectorXd gb;
    Eigen::MatrixXd mW, vW;  // optimizer state (adam moments / sgd velocity)
    Eigen::VectorXd mb, vb;
  };
  struct BatchNorm {
    Eigen::VectorXd gamma, beta;
    Eigen::VectorXd running_mean, running_var;
    Eigen::VectorXd ggamma, gbeta;
    Eigen::VectorXd mgamma, vgamma, mbeta, vbeta;
    double eps = 1e-5;
    double momentum = 0.1;
  };

  Eigen::MatrixXd hidden_forward_inference(const Eigen::MatrixXd& X) const;
  void zero_gradients();

  DiffNetConfig config_;
  std::vector<std::string> node_names_;
  std::string encoder_id_;
  std::string config_digest_;
  std::vector<Linear> hidden_;
  std::vector<BatchNorm> norms_;
  Linear out_;
  uint64_t adam_step_ = 0;

  // backward caches (valid between loss_and_gradients and optimizer_step)
  struct Cache {
    std::vector<Eigen::MatrixXd> inputs;      // layer inputs A_{l-1}
    std::vector<Eigen::MatrixXd> normalized;  // Zn
    std::vector<Eigen::VectorXd> inv_std;
    std::vector<Eigen::MatrixXd> pre_act;     // H (post-norm, pre-activation)
    std::vector<Eigen::MatrixXd> activated;   // A_l
  };
  Cache cache_;
};

// Builds one epoch of training examples: every annotated pair contributes
// pairs_per_annotation utterance pairs drawn from the train-phase
// utterances, each emitted forward (label 1) and reversed (label 0) over the
// pair's descriptor nodes. Descriptors outside `nodes` are skipped.
std::vector<TrainingExample> sample_training_examples(
    const std::vector<OrderedPairAnnotation>& train_pairs,
    const std::map<std::string, std::vector<std::string>>& train_utterances,
    const EmbeddingTable& embeddings, const std::vector<std::string>& nodes,
    size_t pairs_per_annotation, uint64_t seed, size_t epoch);

// Mini-batch training; sampler is invoked once per epoch. start_epoch offsets
// epoch numbering (and sampling streams) when resuming. Throws
// EmptyTrainingSet, AllMasked or NonFiniteLoss with epoch/batch context.
TrainingLog train_model(
    DiffNetModel& model,
    const std::function<std::vector<TrainingExample>(size_t epoch)>& sampler,
    size_t epochs, size_t start_epoch = 0,
    const TrainingLog* previous_log = nullptr);

// Scores every trial with the model's node for the trial's descriptor.
// Record order matches trial order. Throws MissingEmbedding,
// UnknownDescriptorNode or EncoderMismatch.
std::vector<PredictionRecord> predict_trials(const DiffNetModel& model,
                                             const TrialList& trials,
                                             const EmbeddingTable& embeddings);

}  // namespace vtad

#endif  // VTAD_DIFFNET_HPP_
