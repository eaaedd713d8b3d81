// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The CRRCD Authors.

#include "crrcd/nn.hpp"

#include <cmath>

#include "crrcd/error.hpp"

namespace crrcd {

namespace {

Tensor uniform_tensor(Index rows, Index cols, double bound, Rng& rng) {
  Tensor t(rows, cols);
  for (Index i = 0; i < t.size(); ++i) t.data()[i] = uniform(rng, -bound, bound);
  return t;
}

}  // namespace

ParameterList with_prefix(const std::string& prefix, ParameterList params) {
  for (auto& p : params) p.name = prefix + "." + p.name;
  return params;
}

void load_parameters(const ParameterList& dst, const std::map<std::string, Tensor>& values) {
  for (const auto& p : dst) {
    auto it = values.find(p.name);
    CRRCD_REQUIRE(it != values.end(), "missing parameter '" + p.name + "'");
    CRRCD_REQUIRE(it->second.rows() == p.var.rows() && it->second.cols() == p.var.cols(),
                  "shape mismatch for parameter '" + p.name + "'");
    ag::Var v = p.var;
    v.mutable_value() = it->second;
  }
}

std::map<std::string, Tensor> snapshot(const ParameterList& params) {
  std::map<std::string, Tensor> out;
  for (const auto& p : params) out.emplace(p.name, p.var.value());
  return out;
}

Linear::Linear(Index in, Index out, bool bias, Rng& rng) {
  CRRCD_REQUIRE(in > 0 && out > 0, "Linear: dimensions must be positive");
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  weight_ = ag::parameter(uniform_tensor(out, in, bound, rng));
  if (bias) bias_ = ag::parameter(uniform_tensor(1, out, bound, rng));
}

ParameterList Linear::parameters() const {
  ParameterList out{{"weight", weight_}};
  if (bias_.defined()) out.push_back({"bias", bias_});
  return out;
}

bool is_known_arch(const std::string& arch) { return arch == "mlp" || arch == "cnn"; }

Backbone::Backbone(BackboneSpec spec, Rng& rng) : spec_(std::move(spec)) {
  CRRCD_REQUIRE(is_known_arch(spec_.arch), "unknown architecture '" + spec_.arch + "'");
  CRRCD_REQUIRE(spec_.embedding_dim > 0 && spec_.classes >= 2, "Backbone: bad dimensions");
  if (spec_.arch == "mlp") {
    fc1_ = Linear(spec_.input_size(), spec_.hidden, true, rng);
    fc2_ = Linear(spec_.hidden, spec_.embedding_dim, true, rng);
  } else {
    CRRCD_REQUIRE(spec_.height % 4 == 0 && spec_.width % 4 == 0,
                  "cnn backbone needs spatial dims divisible by 4");
    const int c1 = spec_.conv_channels, c2 = 2 * spec_.conv_channels;
    const double b1 = 1.0 / std::sqrt(9.0 * spec_.channels);
    const double b2 = 1.0 / std::sqrt(9.0 * c1);
    conv1_w_ = ag::parameter(uniform_tensor(c1, spec_.channels * 9, b1, rng));
    conv1_b_ = ag::parameter(uniform_tensor(1, c1, b1, rng));
    conv2_w_ = ag::parameter(uniform_tensor(c2, c1 * 9, b2, rng));
    conv2_b_ = ag::parameter(uniform_tensor(1, c2, b2, rng));
    const Index flat = static_cast<Index>(c2) * (spec_.height / 4) * (spec_.width / 4);
    fc2_ = Linear(flat, spec_.embedding_dim, true, rng);
  }
  classifier_ = Linear(spec_.embedding_dim, spec_.classes,
                       spec_.classifier == ClassifierKind::linear, rng);
}

BackboneOutput Backbone::forward(const Tensor& images) const {
  CRRCD_REQUIRE(images.cols() == spec_.input_size(), "Backbone: input size mismatch");
  const ag::Var x = ag::constant(images);
  BackboneOutput out;
  if (spec_.arch == "mlp") {
    out.embedding = fc2_.forward(ag::relu(fc1_.forward(x)));
  } else {
    const int h = spec_.height, w = spec_.width, c1 = spec_.conv_channels;
    ag::Var a = ag::relu(ag::conv3x3(x, conv1_w_, conv1_b_, spec_.channels, h, w));
    a = ag::avg_pool2(a, c1, h, w);
    a = ag::relu(ag::conv3x3(a, conv2_w_, conv2_b_, c1, h / 2, w / 2));
    a = ag::avg_pool2(a, 2 * c1, h / 2, w / 2);
    out.embedding = fc2_.forward(a);
  }
  out.logits = classify(out.embedding, out);
  return out;
}

ag::Var Backbone::classify(const ag::Var& embedding, BackboneOutput& out) const {
  if (spec_.classifier == ClassifierKind::linear) return classifier_.forward(embedding);
  constexpr double kEps = 1e-12;
  const ag::Var unit = ag::l2_normalize_rows(embedding, kEps);
  const ag::Var centers = ag::l2_normalize_rows(classifier_.weight(), kEps);
  out.cosines = ag::linear(unit, centers);
  return ag::scale(out.cosines, spec_.cosine_scale);
}

ParameterList Backbone::parameters() const {
  ParameterList out;
  auto append = [&out](const std::string& prefix, ParameterList ps) {
    for (auto& p : with_prefix(prefix, std::move(ps))) out.push_back(std::move(p));
  };
  if (spec_.arch == "mlp") {
    append("fc1", fc1_.parameters());
  } else {
    out.push_back({"conv1.weight", conv1_w_});
    out.push_back({"conv1.bias", conv1_b_});
    out.push_back({"conv2.weight", conv2_w_});
    out.push_back({"conv2.bias", conv2_b_});
  }
  append("fc2", fc2_.parameters());
  append("classifier", classifier_.parameters());
  return out;
}

Sgd::Sgd(ParameterList params, SgdConfig config) : params_(std::move(params)), config_(config) {
  momentum_.reserve(params_.size());
  for (const auto& p : params_) momentum_.push_back(Tensor::Zero(p.var.rows(), p.var.cols()));
}

void Sgd::zero_grad() {
  for (auto& p : params_) p.var.zero_grad();
}

void Sgd::step(double lr) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    ag::Var v = params_[i].var;
    Tensor g = v.grad();
    if (config_.weight_decay != 0.0) g += config_.weight_decay * v.value();
    momentum_[i] = config_.momentum * momentum_[i] + g;
    v.mutable_value() -= lr * momentum_[i];
  }
}

std::map<std::string, Tensor> Sgd::state() const {
  std::map<std::string, Tensor> out;
  for (std::size_t i = 0; i < params_.size(); ++i) out.emplace(params_[i].name, momentum_[i]);
  return out;
}

void Sgd::load_state(const std::map<std::string, Tensor>& state) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto it = state.find(params_[i].name);
    CRRCD_REQUIRE(it != state.end(), "optimizer state missing '" + params_[i].name + "'");
    CRRCD_REQUIRE(it->second.rows() == momentum_[i].rows() && it->second.cols() == momentum_[i].cols(),
                  "optimizer state shape mismatch for '" + params_[i].name + "'");
    momentum_[i] = it->second;
  }
}

double multistep_lr(double base, const std::vector<int>& milestones, double gamma, int epoch) {
  int passed = 0;
  for (int m : milestones) {
    if (epoch >= m) ++passed;
  }
  return base * std::pow(gamma, passed);
}

}  // namespace crrcd
