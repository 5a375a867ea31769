// src/diffnet.cpp

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

#include "vtad/diffnet.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vtad/bytes.hpp"
#include "vtad/rng.hpp"

namespace vtad {

using json = nlohmann::json;
using Eigen::MatrixXd;
using Eigen::VectorXd;

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::tanh_fn: return "tanh";
    case Activation::relu: return "relu";
    case Activation::silu: return "silu";
  }
  return "tanh";
}

std::optional<Activation> parse_activation(std::string_view token) {
  std::string t = lower(trim(token));
  if (t == "tanh") return Activation::tanh_fn;
  if (t == "relu") return Activation::relu;
  if (t == "silu") return Activation::silu;
  return std::nullopt;
}

const char* optimizer_name(OptimizerKind o) {
  return o == OptimizerKind::adam ? "adam" : "sgd";
}

std::optional<OptimizerKind> parse_optimizer(std::string_view token) {
  std::string t = lower(trim(token));
  if (t == "adam") return OptimizerKind::adam;
  if (t == "sgd") return OptimizerKind::sgd;
  return std::nullopt;
}

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

double softplus(double z) {
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

// Keep probabilities strictly inside (0, 1): extreme logits would otherwise
// round to exact 0.0 / 1.0 in double precision.
double clamp_open_unit(double p) {
  constexpr double lo = std::numeric_limits<double>::denorm_min();
  const double hi = std::nextafter(1.0, 0.0);
  return std::min(std::max(p, lo), hi);
}

MatrixXd apply_activation(const MatrixXd& H, Activation act) {
  switch (act) {
    case Activation::tanh_fn:
      return H.array().tanh().matrix();
    case Activation::relu:
      return H.cwiseMax(0.0);
    case Activation::silu:
      return (H.array() * H.array().unaryExpr([](double z) { return sigmoid(z); }))
          .matrix();
  }
  return H;
}

// Derivative of the activation given pre-activation H and output A.
MatrixXd activation_grad(const MatrixXd& H, const MatrixXd& A, Activation act) {
  switch (act) {
    case Activation::tanh_fn:
      return (1.0 - A.array().square()).matrix();
    case Activation::relu:
      return (H.array() > 0.0).cast<double>().matrix();
    case Activation::silu:
      return H.array()
          .unaryExpr([](double z) {
            double s = sigmoid(z);
            return s * (1.0 + z * (1.0 - s));
          })
          .matrix();
  }
  return MatrixXd::Ones(H.rows(), H.cols());
}

template <class Mat>
void apply_step(const DiffNetConfig& cfg, uint64_t t, Mat& param, const Mat& grad,
                Mat& m, Mat& v) {
  if (cfg.optimizer == OptimizerKind::adam) {
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    m = beta1 * m + (1.0 - beta1) * grad;
    v = (beta2 * v.array() + (1.0 - beta2) * grad.array().square()).matrix();
    double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    param.array() -= cfg.learning_rate * (m.array() / bc1) /
                     ((v.array() / bc2).sqrt() + eps);
  } else {
    m = cfg.momentum * m + grad;  // m doubles as sgd velocity
    param -= cfg.learning_rate * m;
  }
}

void validate_config(const DiffNetConfig& config) {
  if (config.input_dim == 0 || config.input_dim % 2 != 0)
    fail(ErrorCode::config, "input_dim must be positive and even (two concatenated embeddings)");
  if (config.output_dim == 0)
    fail(ErrorCode::config, "output_dim must be at least 1");
  if (!(config.threshold > 0.0 && config.threshold < 1.0))
    fail(ErrorCode::config, "decision threshold must lie strictly inside (0, 1)");
  if (config.batch_size == 0) fail(ErrorCode::config, "batch_size must be positive");
}

}  // namespace

std::optional<size_t> DiffNetModel::node_index(std::string_view descriptor) const {
  std::string name = lower(trim(descriptor));
  for (size_t i = 0; i < node_names_.size(); ++i)
    if (node_names_[i] == name) return i;
  return std::nullopt;
}

DiffNetModel DiffNetModel::init(const DiffNetConfig& config,
                                std::vector<std::string> node_names,
                                std::string encoder_id) {
  validate_config(config);
  if (node_names.size() != config.output_dim)
    fail(ErrorCode::config, "output_dim " + std::to_string(config.output_dim) +
                                " does not match " + std::to_string(node_names.size()) +
                                " descriptor nodes");
  DiffNetModel model;
  model.config_ = config;
  model.node_names_ = std::move(node_names);
  model.encoder_id_ = std::move(encoder_id);

  auto make_linear = [&](size_t in, size_t out, const std::string& key) {
    Linear layer;
    Rng rng = Rng::keyed(config.seed, "init|" + key);
    double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    layer.W = MatrixXd::Zero(out, in);
    for (Eigen::Index r = 0; r < layer.W.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.W.cols(); ++c)
        layer.W(r, c) = (2.0 * rng.uniform() - 1.0) * limit;
    layer.b = VectorXd::Zero(out);
    layer.gW = MatrixXd::Zero(out, in);
    layer.gb = VectorXd::Zero(out);
    layer.mW = MatrixXd::Zero(out, in);
    layer.vW = MatrixXd::Zero(out, in);
    layer.mb = VectorXd::Zero(out);
    layer.vb = VectorXd::Zero(out);
    return layer;
  };

  size_t in = config.input_dim;
  for (size_t l = 0; l < config.hidden.size(); ++l) {
    size_t width = config.hidden[l];
    model.hidden_.push_back(make_linear(in, width, "hidden" + std::to_string(l)));
    if (config.use_batch_norm) {
      BatchNorm bn;
      bn.gamma = VectorXd::Ones(width);
      bn.beta = VectorXd::Zero(width);
      bn.running_mean = VectorXd::Zero(width);
      bn.running_var = VectorXd::Ones(width);
      bn.ggamma = VectorXd::Zero(width);
      bn.gbeta = VectorXd::Zero(width);
      bn.mgamma = VectorXd::Zero(width);
      bn.vgamma = VectorXd::Zero(width);
      bn.mbeta = VectorXd::Zero(width);
      bn.vbeta = VectorXd::Zero(width);
      model.norms_.push_back(std::move(bn));
    }
    in = width;
  }
  model.out_ = make_linear(in, config.output_dim, "out");
  return model;
}

Eigen::MatrixXd DiffNetModel::hidden_forward_inference(const MatrixXd& X) const {
  MatrixXd A = X;
  for (size_t l = 0; l < hidden_.size(); ++l) {
    MatrixXd Z = (A * hidden_[l].W.transpose()).rowwise() + hidden_[l].b.transpose();
    if (config_.use_batch_norm) {
      const BatchNorm& bn = norms_[l];
      Eigen::ArrayXd inv_std = (bn.running_var.array() + bn.eps).sqrt().inverse();
      MatrixXd Zn = ((Z.rowwise() - bn.running_mean.transpose()).array().rowwise() *
                     inv_std.transpose())
                        .matrix();
      Z = ((Zn.array().rowwise() * bn.gamma.transpose().array()).rowwise() +
           bn.beta.transpose().array())
              .matrix();
    }
    A = apply_activation(Z, config_.activation);
  }
  return A;
}

Eigen::MatrixXd DiffNetModel::forward(const MatrixXd& X) const {
  if (static_cast<size_t>(X.cols()) != config_.input_dim)
    fail(ErrorCode::dimension_mismatch,
         "forward input has " + std::to_string(X.cols()) + " columns, expected " +
             std::to_string(config_.input_dim));
  MatrixXd A = hidden_forward_inference(X);
  MatrixXd logits = (A * out_.W.transpose()).rowwise() + out_.b.transpose();
  return logits.unaryExpr([](double z) { return clamp_open_unit(sigmoid(z)); });
}

std::vector<double> DiffNetModel::forward_pair(std::span<const float> first,
                                               std::span<const float> second) const {
  size_t d = config_.input_dim / 2;
  if (first.size() != d || second.size() != d)
    fail(ErrorCode::dimension_mismatch,
         "embedding pair has dimensions " + std::to_string(first.size()) + "/" +
             std::to_string(second.size()) + ", model expects " + std::to_string(d));
  MatrixXd X(1, config_.input_dim);
  for (size_t i = 0; i < d; ++i) X(0, static_cast<Eigen::Index>(i)) = first[i];
  for (size_t i = 0; i < d; ++i) X(0, static_cast<Eigen::Index>(d + i)) = second[i];
  MatrixXd probs = forward(X);
  std::vector<double> out(config_.output_dim);
  for (size_t n = 0; n < config_.output_dim; ++n)
    out[n] = probs(0, static_cast<Eigen::Index>(n));
  return out;
}

void DiffNetModel::zero_gradients() {
  for (Linear& layer : hidden_) {
    layer.gW.setZero();
    layer.gb.setZero();
  }
  for (BatchNorm& bn : norms_) {
    bn.ggamma.setZero();
    bn.gbeta.setZero();
  }
  out_.gW.setZero();
  out_.gb.setZero();
}

double DiffNetModel::loss_and_gradients(const MatrixXd& X, const MatrixXd& Y,
                                        const MatrixXd& M) {
  if (static_cast<size_t>(X.cols()) != config_.input_dim)
    fail(ErrorCode::dimension_mismatch, "training batch has wrong input width");
  if (Y.rows() != X.rows() || M.rows() != X.rows() ||
      static_cast<size_t>(Y.cols()) != config_.output_dim ||
      static_cast<size_t>(M.cols()) != config_.output_dim)
    fail(ErrorCode::dimension_mismatch, "label/mask shape does not match the batch");

  const double count = M.sum();
  if (count == 0.0)
    fail(ErrorCode::all_masked, "batch supervises zero descriptor nodes");

  zero_gradients();
  const Eigen::Index B = X.rows();
  const double Bd = static_cast<double>(B);

  cache_.inputs.clear();
  cache_.normalized.clear();
  cache_.inv_std.clear();
  cache_.pre_act.clear();
  cache_.activated.clear();

  MatrixXd A = X;
  for (size_t l = 0; l < hidden_.size(); ++l) {
    cache_.inputs.push_back(A);
    MatrixXd Z = (A * hidden_[l].W.transpose()).rowwise() + hidden_[l].b.transpose();
    MatrixXd H;
    if (config_.use_batch_norm) {
      BatchNorm& bn = norms_[l];
      Eigen::RowVectorXd mu = Z.colwise().mean();
      MatrixXd centered = Z.rowwise() - mu;
      Eigen::RowVectorXd var = centered.array().square().colwise().mean();
      Eigen::ArrayXd inv_std = (var.transpose().array() + bn.eps).sqrt().inverse();
      MatrixXd Zn = (centered.array().rowwise() * inv_std.transpose()).matrix();
      H = ((Zn.array().rowwise() * bn.gamma.transpose().array()).rowwise() +
           bn.beta.transpose().array())
              .matrix();
      bn.running_mean = (1.0 - bn.momentum) * bn.running_mean + bn.momentum * mu.transpose();
      bn.running_var = (1.0 - bn.momentum) * bn.running_var + bn.momentum * var.transpose();
      cache_.normalized.push_back(std::move(Zn));
      cache_.inv_std.push_back(inv_std.matrix());
    } else {
      H = Z;
      cache_.normalized.emplace_back();
      cache_.inv_std.emplace_back();
    }
    cache_.pre_act.push_back(H);
    A = apply_activation(H, config_.activation);
    cache_.activated.push_back(A);
  }

  MatrixXd logits = (A * out_.W.transpose()).rowwise() + out_.b.transpose();
  MatrixXd probs = logits.unaryExpr([](double z) { return sigmoid(z); });
  double loss = (M.array() *
                 (logits.unaryExpr([](double z) { return softplus(z); }).array() -
                  logits.array() * Y.array()))
                    .sum() /
                count;

  MatrixXd dZ = ((probs - Y).array() * M.array()).matrix() / count;
  out_.gW = dZ.transpose() * A;
  out_.gb = dZ.colwise().sum().transpose();
  MatrixXd dA = dZ * out_.W;

  for (size_t l = hidden_.size(); l-- > 0;) {
    MatrixXd dH =
        (dA.array() *
         activation_grad(cache_.pre_act[l], cache_.activated[l], config_.activation).array())
            .matrix();
    MatrixXd dZl;
    if (config_.use_batch_norm) {
      BatchNorm& bn = norms_[l];
      const MatrixXd& Zn = cache_.normalized[l];
      const VectorXd& inv_std = cache_.inv_std[l];
      bn.ggamma = (dH.array() * Zn.array()).colwise().sum().transpose();
      bn.gbeta = dH.colwise().sum().transpose();
      MatrixXd dZn = (dH.array().rowwise() * bn.gamma.transpose().array()).matrix();
      Eigen::RowVectorXd sum_dZn = dZn.colwise().sum();
      Eigen::RowVectorXd sum_dZn_Zn = (dZn.array() * Zn.array()).colwise().sum();
      dZl = ((Bd * dZn.array() - sum_dZn.replicate(B, 1).array() -
              Zn.array() * sum_dZn_Zn.replicate(B, 1).array())
                 .rowwise() *
             (inv_std.transpose().array() / Bd))
                .matrix();
    } else {
      dZl = dH;
    }
    hidden_[l].gW = dZl.transpose() * cache_.inputs[l];
    hidden_[l].gb = dZl.colwise().sum().transpose();
    dA = dZl * hidden_[l].W;
  }
  return loss;
}

void DiffNetModel::optimizer_step() {
  ++adam_step_;
  for (Linear& layer : hidden_) {
    apply_step(config_, adam_step_, layer.W, layer.gW, layer.mW, layer.vW);
    apply_step(config_, adam_step_, layer.b, layer.gb, layer.mb, layer.vb);
  }
  for (BatchNorm& bn : norms_) {
    apply_step(config_, adam_step_, bn.gamma, bn.ggamma, bn.mgamma, bn.vgamma);
    apply_step(config_, adam_step_, bn.beta, bn.gbeta, bn.mbeta, bn.vbeta);
  }
  apply_step(config_, adam_step_, out_.W, out_.gW, out_.mW, out_.vW);
  apply_step(config_, adam_step_, out_.b, out_.gb, out_.mb, out_.vb);
}

std::vector<std::span<double>> DiffNetModel::parameter_spans() {
  std::vector<std::span<double>> spans;
  for (Linear& layer : hidden_) {
    spans.push_back({layer.W.data(), static_cast<size_t>(layer.W.size())});
    spans.push_back({layer.b.data(), static_cast<size_t>(layer.b.size())});
  }
  for (BatchNorm& bn : norms_) {
    spans.push_back({bn.gamma.data(), static_cast<size_t>(bn.gamma.size())});
    spans.push_back({bn.beta.data(), static_cast<size_t>(bn.beta.size())});
  }
  spans.push_back({out_.W.data(), static_cast<size_t>(out_.W.size())});
  spans.push_back({out_.b.data(), static_cast<size_t>(out_.b.size())});
  return spans;
}

std::vector<std::span<double>> DiffNetModel::gradient_spans() {
  std::vector<std::span<double>> spans;
  for (Linear& layer : hidden_) {
    spans.push_back({layer.gW.data(), static_cast<size_t>(layer.gW.size())});
    spans.push_back({layer.gb.data(), static_cast<size_t>(layer.gb.size())});
  }
  for (BatchNorm& bn : norms_) {
    spans.push_back({bn.ggamma.data(), static_cast<size_t>(bn.ggamma.size())});
    spans.push_back({bn.gbeta.data(), static_cast<size_t>(bn.gbeta.size())});
  }
  spans.push_back({out_.gW.data(), static_cast<size_t>(out_.gW.size())});
  spans.push_back({out_.gb.data(), static_cast<size_t>(out_.gb.size())});
  return spans;
}

namespace {

constexpr char kModelMagic[4] = {'V', 'T', 'D', 'M'};
constexpr uint32_t kModelVersion = 1;

void put_tensor(std::string& out, const std::string& name, const MatrixXd& t) {
  put_str(out, name);
  put_u64(out, static_cast<uint64_t>(t.rows()));
  put_u64(out, static_cast<uint64_t>(t.cols()));
  for (Eigen::Index r = 0; r < t.rows(); ++r)
    for (Eigen::Index c = 0; c < t.cols(); ++c) put_f64(out, t(r, c));
}

void put_tensor(std::string& out, const std::string& name, const VectorXd& t) {
  put_tensor(out, name, MatrixXd(t));
}

}  // namespace

void DiffNetModel::save(const std::filesystem::path& path) const {
  json header;
  header["config"] = {
      {"input_dim", config_.input_dim},
      {"hidden", config_.hidden},
      {"output_dim", config_.output_dim},
      {"use_batch_norm", config_.use_batch_norm},
      {"activation", activation_name(config_.activation)},
      {"threshold", config_.threshold},
      {"learning_rate", config_.learning_rate},
      {"batch_size", config_.batch_size},
      {"epochs", config_.epochs},
      {"optimizer", optimizer_name(config_.optimizer)},
      {"momentum", config_.momentum},
      {"pairs_per_annotation", config_.pairs_per_annotation},
      {"seed", config_.seed},
  };
  header["nodes"] = node_names_;
  header["encoder_id"] = encoder_id_;
  header["config_digest"] = config_digest_;
  header["adam_step"] = adam_step_;

  std::string out;
  out.append(kModelMagic, 4);
  put_u32(out, kModelVersion);
  put_str(out, header.dump());

  std::vector<std::pair<std::string, const MatrixXd*>> mats;
  std::vector<std::pair<std::string, const VectorXd*>> vecs;
  for (size_t l = 0; l < hidden_.size(); ++l) {
    std::string p = "hidden." + std::to_string(l) + ".";
    mats.push_back({p + "W", &hidden_[l].W});
    vecs.push_back({p + "b", &hidden_[l].b});
    mats.push_back({"opt." + p + "mW", &hidden_[l].mW});
    mats.push_back({"opt." + p + "vW", &hidden_[l].vW});
    vecs.push_back({"opt." + p + "mb", &hidden_[l].mb});
    vecs.push_back({"opt." + p + "vb", &hidden_[l].vb});
  }
  for (size_t l = 0; l < norms_.size(); ++l) {
    std::string p = "norm." + std::to_string(l) + ".";
    vecs.push_back({p + "gamma", &norms_[l].gamma});
    vecs.push_back({p + "beta", &norms_[l].beta});
    vecs.push_back({p + "running_mean", &norms_[l].running_mean});
    vecs.push_back({p + "running_var", &norms_[l].running_var});
    vecs.push_back({"opt." + p + "mgamma", &norms_[l].mgamma});
    vecs.push_back({"opt." + p + "vgamma", &norms_[l].vgamma});
    vecs.push_back({"opt." + p + "mbeta", &norms_[l].mbeta});
    vecs.push_back({"opt." + p + "vbeta", &norms_[l].vbeta});
  }
  mats.push_back({"out.W", &out_.W});
  vecs.push_back({"out.b", &out_.b});
  mats.push_back({"opt.out.mW", &out_.mW});
  mats.push_back({"opt.out.vW", &out_.vW});
  vecs.push_back({"opt.out.mb", &out_.mb});
  vecs.push_back({"opt.out.vb", &out_.vb});

  put_u32(out, static_cast<uint32_t>(mats.size() + vecs.size()));
  for (const auto& [name, t] : mats) put_tensor(out, name, *t);
  for (const auto& [name, t] : vecs) put_tensor(out, name, *t);

  put_u64(out, fnv1a64(out));
  write_binary_file(path, out);
}

DiffNetModel DiffNetModel::load(const std::filesystem::path& path) {
  std::string data = read_binary_file(path);
  if (data.size() < 16)
    fail(ErrorCode::corrupt_model, path.string() + " is too short to be a model file");
  if (data.substr(0, 4) != std::string(kModelMagic, 4))
    fail(ErrorCode::version_mismatch, path.string() + " is not a model container");

  uint64_t stored = 0;
  for (int i = 0; i < 8; ++i)
    stored |= static_cast<uint64_t>(static_cast<unsigned char>(data[data.size() - 8 + i]))
              << (8 * i);
  if (fnv1a64(std::string_view(data).substr(0, data.size() - 8)) != stored)
    fail(ErrorCode::corrupt_model, path.string() + ": integrity checksum mismatch");

  try {
    ByteReader reader(std::string_view(data).substr(4, data.size() - 12),
                      "model " + path.string());
    uint32_t version = reader.u32();
    if (version != kModelVersion)
      fail(ErrorCode::version_mismatch,
           path.string() + ": container version " + std::to_string(version) +
               ", expected " + std::to_string(kModelVersion));
    json header = json::parse(reader.str());
    DiffNetConfig config;
    const json& jc = header.at("config");
    config.input_dim = jc.at("input_dim").get<size_t>();
    config.hidden = jc.at("hidden").get<std::vector<size_t>>();
    config.output_dim = jc.at("output_dim").get<size_t>();
    config.use_batch_norm = jc.at("use_batch_norm").get<bool>();
    config.activation = parse_activation(jc.at("activation").get<std::string>())
                            .value_or(Activation::tanh_fn);
    config.threshold = jc.at("threshold").get<double>();
    config.learning_rate = jc.at("learning_rate").get<double>();
    config.batch_size = jc.at("batch_size").get<size_t>();
    config.epochs = jc.at("epochs").get<size_t>();
    config.optimizer = parse_optimizer(jc.at("optimizer").get<std::string>())
                           .value_or(OptimizerKind::adam);
    config.momentum = jc.at("momentum").get<double>();
    config.pairs_per_annotation = jc.at("pairs_per_annotation").get<size_t>();
    config.seed = jc.at("seed").get<uint64_t>();

    DiffNetModel model = DiffNetModel::init(
        config, header.at("nodes").get<std::vector<std::string>>(),
        header.at("encoder_id").get<std::string>());
    model.config_digest_ = header.value("config_digest", "");
    model.adam_step_ = header.value("adam_step", 0ull);

    std::map<std::string, MatrixXd*> mats;
    std::map<std::string, VectorXd*> vecs;
    for (size_t l = 0; l < model.hidden_.size(); ++l) {
      std::string p = "hidden." + std::to_string(l) + ".";
      mats[p + "W"] = &model.hidden_[l].W;
      vecs[p + "b"] = &model.hidden_[l].b;
      mats["opt." + p + "mW"] = &model.hidden_[l].mW;
      mats["opt." + p + "vW"] = &model.hidden_[l].vW;
      vecs["opt." + p + "mb"] = &model.hidden_[l].mb;
      vecs["opt." + p + "vb"] = &model.hidden_[l].vb;
    }
    for (size_t l = 0; l < model.norms_.size(); ++l) {
      std::string p = "norm." + std::to_string(l) + ".";
      vecs[p + "gamma"] = &model.norms_[l].gamma;
      vecs[p + "beta"] = &model.norms_[l].beta;
      vecs[p + "running_mean"] = &model.norms_[l].running_mean;
      vecs[p + "running_var"] = &model.norms_[l].running_var;
      vecs["opt." + p + "mgamma"] = &model.norms_[l].mgamma;
      vecs["opt." + p + "vgamma"] = &model.norms_[l].vgamma;
      vecs["opt." + p + "mbeta"] = &model.norms_[l].mbeta;
      vecs["opt." + p + "vbeta"] = &model.norms_[l].vbeta;
    }
    mats["out.W"] = &model.out_.W;
    vecs["out.b"] = &model.out_.b;
    mats["opt.out.mW"] = &model.out_.mW;
    mats["opt.out.vW"] = &model.out_.vW;
    vecs["opt.out.mb"] = &model.out_.mb;
    vecs["opt.out.vb"] = &model.out_.vb;

    std::set<std::string> seen;
    uint32_t tensor_count = reader.u32();
    for (uint32_t i = 0; i < tensor_count; ++i) {
      std::string name = reader.str();
      uint64_t rows = reader.u64();
      uint64_t cols = reader.u64();
      MatrixXd t(rows, cols);
      for (uint64_t r = 0; r < rows; ++r)
        for (uint64_t c = 0; c < cols; ++c)
          t(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = reader.f64();
      auto mit = mats.find(name);
      if (mit != mats.end()) {
        if (mit->second->rows() != t.rows() || mit->second->cols() != t.cols())
          fail(ErrorCode::corrupt_model,
               path.string() + ": tensor " + name + " has inconsistent shape");
        *mit->second = std::move(t);
        seen.insert(name);
        continue;
      }
      auto vit = vecs.find(name);
      if (vit != vecs.end()) {
        if (static_cast<uint64_t>(vit->second->size()) != rows || cols != 1)
          fail(ErrorCode::corrupt_model,
               path.string() + ": tensor " + name + " has inconsistent shape");
        *vit->second = t.col(0);
        seen.insert(name);
        continue;
      }
      fail(ErrorCode::corrupt_model, path.string() + ": unknown tensor " + name);
    }
    for (const auto& [name, ptr] : mats)
      if (!seen.count(name) && !starts_with(name, "opt."))
        fail(ErrorCode::corrupt_model, path.string() + ": missing tensor " + name);
    for (const auto& [name, ptr] : vecs)
      if (!seen.count(name) && !starts_with(name, "opt."))
        fail(ErrorCode::corrupt_model, path.string() + ": missing tensor " + name);
    return model;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::parse)
      fail(ErrorCode::corrupt_model, std::string(e.what()));
    throw;
  } catch (const json::exception& e) {
    fail(ErrorCode::corrupt_model, path.string() + ": bad header: " + e.what());
  }
}

bool DiffNetModel::operator==(const DiffNetModel& other) const {
  auto eq = [](const MatrixXd& a, const MatrixXd& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() &&
           (a.array() == b.array()).all();
  };
  auto veq = [](const VectorXd& a, const VectorXd& b) {
    return a.size() == b.size() && (a.array() == b.array()).all();
  };
  if (!(config_ == other.config_ && node_names_ == other.node_names_ &&
        encoder_id_ == other.encoder_id_))
    return false;
  if (hidden_.size() != other.hidden_.size() || norms_.size() != other.norms_.size())
    return false;
  for (size_t l = 0; l < hidden_.size(); ++l)
    if (!eq(hidden_[l].W, other.hidden_[l].W) || !veq(hidden_[l].b, other.hidden_[l].b))
      return false;
  for (size_t l = 0; l < norms_.size(); ++l)
    if (!veq(norms_[l].gamma, other.norms_[l].gamma) ||
        !veq(norms_[l].beta, other.norms_[l].beta) ||
        !veq(norms_[l].running_mean, other.norms_[l].running_mean) ||
        !veq(norms_[l].running_var, other.norms_[l].running_var))
      return false;
  return eq(out_.W, other.out_.W) && veq(out_.b, other.out_.b);
}

std::string TrainingLog::serialize() const {
  std::ostringstream out;
  out << "#seed=" << seed << "\n";
  if (!config_digest.empty()) out << "#config_digest=" << config_digest << "\n";
  out << "#epoch\tmean_loss\tsmoothed_loss\n";
  for (const Entry& e : entries)
    out << e.epoch << '\t' << format_double_shortest(e.mean_loss) << '\t'
        << format_double_shortest(e.smoothed_loss) << '\n';
  return out.str();
}

TrainingLog TrainingLog::parse(std::istream& in) {
  TrainingLog log;
  std::string line;
  while (std::getline(in, line)) {
    std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      if (starts_with(t, "#seed=")) parse_u64(t.substr(6), log.seed);
      else if (starts_with(t, "#config_digest=")) log.config_digest = t.substr(15);
      continue;
    }
    std::vector<std::string> cols = split(t, '\t');
    if (cols.size() != 3) fail(ErrorCode::parse, "bad training log row: " + t);
    Entry e;
    uint64_t epoch = 0;
    if (!parse_u64(cols[0], epoch) || !parse_double(cols[1], e.mean_loss) ||
        !parse_double(cols[2], e.smoothed_loss))
      fail(ErrorCode::parse, "bad training log row: " + t);
    e.epoch = epoch;
    log.entries.push_back(e);
  }
  return log;
}

std::vector<TrainingExample> sample_training_examples(
    const std::vector<OrderedPairAnnotation>& train_pairs,
    const std::map<std::string, std::vector<std::string>>& train_utterances,
    const EmbeddingTable& embeddings, const std::vector<std::string>& nodes,
    size_t pairs_per_annotation, uint64_t seed, size_t epoch) {
  std::map<std::string, size_t> node_index;
  for (size_t i = 0; i < nodes.size(); ++i) node_index[nodes[i]] = i;

  auto embedding_of = [&](const std::string& utt) -> const std::vector<float>* {
    const std::vector<float>* vec = embeddings.find(utt);
    if (!vec)
      fail(ErrorCode::missing_embedding, "no embedding for utterance " + utt);
    return vec;
  };

  Rng rng = Rng::keyed(seed, "trainsample|" + std::to_string(epoch));
  std::vector<TrainingExample> examples;
  for (const OrderedPairAnnotation& pair : train_pairs) {
    std::vector<std::pair<size_t, float>> forward_targets, reverse_targets;
    for (const std::string& d : pair.descriptors) {
      auto it = node_index.find(d);
      if (it == node_index.end()) continue;
      forward_targets.push_back({it->second, 1.0f});
      reverse_targets.push_back({it->second, 0.0f});
    }
    if (forward_targets.empty()) continue;

    auto wit = train_utterances.find(pair.weaker_speaker);
    auto sit = train_utterances.find(pair.stronger_speaker);
    if (wit == train_utterances.end() || wit->second.empty() ||
        sit == train_utterances.end() || sit->second.empty())
      fail(ErrorCode::insufficient_utterances,
           "no train-phase utterances for pair (" + pair.weaker_speaker + ", " +
               pair.stronger_speaker + ")");
    for (size_t k = 0; k < pairs_per_annotation; ++k) {
      const std::string& u_w = wit->second[rng.below(wit->second.size())];
      const std::string& u_s = sit->second[rng.below(sit->second.size())];
      TrainingExample fwd;
      fwd.first = embedding_of(u_w);
      fwd.second = embedding_of(u_s);
      fwd.targets = forward_targets;
      examples.push_back(std::move(fwd));
      TrainingExample rev;
      rev.first = embedding_of(u_s);
      rev.second = embedding_of(u_w);
      rev.targets = reverse_targets;
      examples.push_back(std::move(rev));
    }
  }
  return examples;
}

TrainingLog train_model(
    DiffNetModel& model,
    const std::function<std::vector<TrainingExample>(size_t epoch)>& sampler,
    size_t epochs, size_t start_epoch, const TrainingLog* previous_log) {
  TrainingLog log;
  log.seed = model.config().seed;
  log.config_digest = model.config_digest();
  double smoothed = 0.0;
  bool have_smoothed = false;
  if (previous_log && !previous_log->entries.empty()) {
    log.entries = previous_log->entries;
    smoothed = log.entries.back().smoothed_loss;
    have_smoothed = true;
  }

  const DiffNetConfig& cfg = model.config();
  const size_t d = cfg.input_dim / 2;

  for (size_t epoch = start_epoch; epoch < start_epoch + epochs; ++epoch) {
    std::vector<TrainingExample> examples = sampler(epoch);
    if (examples.empty())
      fail(ErrorCode::empty_training_set,
           "epoch " + std::to_string(epoch) + ": sampler produced no training examples");
    Rng rng = Rng::keyed(cfg.seed, "shuffle|" + std::to_string(epoch));
    rng.shuffle(examples);

    double epoch_loss = 0.0;
    size_t batches = 0;
    for (size_t begin = 0; begin < examples.size(); begin += cfg.batch_size) {
      size_t size = std::min(cfg.batch_size, examples.size() - begin);
      MatrixXd X(size, cfg.input_dim);
      MatrixXd Y = MatrixXd::Zero(size, cfg.output_dim);
      MatrixXd M = MatrixXd::Zero(size, cfg.output_dim);
      for (size_t i = 0; i < size; ++i) {
        const TrainingExample& ex = examples[begin + i];
        if (!ex.first || !ex.second || ex.first->size() != d || ex.second->size() != d)
          fail(ErrorCode::dimension_mismatch,
               "training example " + std::to_string(begin + i) +
                   " does not match the model's embedding dimension");
        for (size_t k = 0; k < d; ++k) {
          X(i, static_cast<Eigen::Index>(k)) = (*ex.first)[k];
          X(i, static_cast<Eigen::Index>(d + k)) = (*ex.second)[k];
        }
        for (const auto& [node, label] : ex.targets) {
          Y(i, static_cast<Eigen::Index>(node)) = label;
          M(i, static_cast<Eigen::Index>(node)) = 1.0;
        }
      }
      double loss = model.loss_and_gradients(X, Y, M);
      if (!std::isfinite(loss))
        fail(ErrorCode::nonfinite_loss,
             "non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                 std::to_string(batches));
      model.optimizer_step();
      epoch_loss += loss;
      ++batches;
    }
    double mean = epoch_loss / static_cast<double>(batches);
    smoothed = have_smoothed ? 0.7 * smoothed + 0.3 * mean : mean;
    have_smoothed = true;
    log.entries.push_back({epoch, mean, smoothed});
  }
  return log;
}

std::vector<PredictionRecord> predict_trials(const DiffNetModel& model,
                                             const TrialList& trials,
                                             const EmbeddingTable& embeddings) {
  if (embeddings.encoder_id() != model.encoder_id())
    fail(ErrorCode::encoder_mismatch,
         "embeddings come from encoder '" + embeddings.encoder_id() +
             "' but the model is bound to '" + model.encoder_id() + "'");
  const size_t d = model.config().input_dim / 2;
  if (embeddings.dim() != d)
    fail(ErrorCode::dimension_mismatch,
         "embedding dimension " + std::to_string(embeddings.dim()) +
             " does not match the model input of 2x" + std::to_string(d));

  std::vector<PredictionRecord> records(trials.items.size());
  constexpr size_t kChunk = 512;
  for (size_t begin = 0; begin < trials.items.size(); begin += kChunk) {
    size_t size = std::min(kChunk, trials.items.size() - begin);
    MatrixXd X(size, model.config().input_dim);
    std::vector<size_t> node_of(size);
    for (size_t i = 0; i < size; ++i) {
      const TrialItem& item = trials.items[begin + i];
      const std::vector<float>* first = embeddings.find(item.utterance_first);
      if (!first)
        fail(ErrorCode::missing_embedding,
             "no embedding for utterance " + item.utterance_first);
      const std::vector<float>* second = embeddings.find(item.utterance_second);
      if (!second)
        fail(ErrorCode::missing_embedding,
             "no embedding for utterance " + item.utterance_second);
      auto node = model.node_index(item.descriptor);
      if (!node)
        fail(ErrorCode::unknown_descriptor_node,
             "descriptor '" + item.descriptor + "' has no output node in this model");
      node_of[i] = *node;
      for (size_t k = 0; k < d; ++k) {
        X(i, static_cast<Eigen::Index>(k)) = (*first)[k];
        X(i, static_cast<Eigen::Index>(d + k)) = (*second)[k];
      }
    }
    MatrixXd probs = model.forward(X);
    for (size_t i = 0; i < size; ++i) {
      PredictionRecord& rec = records[begin + i];
      rec.trial_id = trials.items[begin + i].trial_id;
      rec.score = probs(static_cast<Eigen::Index>(i),
                        static_cast<Eigen::Index>(node_of[i]));
      rec.decision = rec.score >= model.config().threshold ? 1 : 0;
    }
  }
  return records;
}

}  // namespace vtad
