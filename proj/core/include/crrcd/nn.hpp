// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The CRRCD Authors.

#pragma once

#include <map>
#include <string>
#include <vector>

#include "crrcd/autograd.hpp"
#include "crrcd/rng.hpp"

namespace crrcd {

struct NamedParameter {
  std::string name;
  ag::Var var;
};
using ParameterList = std::vector<NamedParameter>;

/// Prefixes every name with `prefix` + ".".
ParameterList with_prefix(const std::string& prefix, ParameterList params);
/// Copies values by name; throws ContractViolation on missing names or shape mismatch.
void load_parameters(const ParameterList& dst, const std::map<std::string, Tensor>& values);
std::map<std::string, Tensor> snapshot(const ParameterList& params);

class Linear {
 public:
  Linear() = default;
  /// Weights and bias drawn from U(-1/sqrt(in), 1/sqrt(in)).
  Linear(Index in, Index out, bool bias, Rng& rng);

  ag::Var forward(const ag::Var& x) const { return ag::linear(x, weight_, bias_); }
  ParameterList parameters() const;

  Index in_features() const { return weight_.cols(); }
  Index out_features() const { return weight_.rows(); }
  bool has_bias() const { return bias_.defined(); }
  const ag::Var& weight() const { return weight_; }
  const ag::Var& bias() const { return bias_; }

 private:
  ag::Var weight_;
  ag::Var bias_;
};

enum class ClassifierKind { linear, cosine };

struct BackboneSpec {
  std::string arch = "mlp";  // "mlp" or "cnn"
  int channels = 1;
  int height = 32;
  int width = 32;
  int hidden = 128;        // mlp hidden width
  int conv_channels = 8;   // cnn first-stage channels, doubled in the second stage
  int embedding_dim = 512;
  int classes = 10;
  ClassifierKind classifier = ClassifierKind::linear;
  double cosine_scale = 64.0;  // logits = scale * cosine for the cosine classifier

  int input_size() const { return channels * height * width; }
};

/// Registered architecture ids.
bool is_known_arch(const std::string& arch);

struct BackboneOutput {
  ag::Var embedding;  // penultimate features, B x d_e
  ag::Var logits;     // B x classes
  ag::Var cosines;    // B x classes, cosine classifier only
};

/// Feature extractor plus classifier. Images are rows of CHW-flattened pixels.
class Backbone {
 public:
  Backbone(BackboneSpec spec, Rng& rng);

  BackboneOutput forward(const Tensor& images) const;
  ParameterList parameters() const;
  const BackboneSpec& spec() const { return spec_; }

 private:
  ag::Var classify(const ag::Var& embedding, BackboneOutput& out) const;

  BackboneSpec spec_;
  Linear fc1_, fc2_;
  ag::Var conv1_w_, conv1_b_, conv2_w_, conv2_b_;
  Linear classifier_;
};

struct SgdConfig {
  double momentum = 0.9;
  double weight_decay = 5e-4;
};

/// SGD with heavy-ball momentum and L2 weight decay folded into the gradient.
class Sgd {
 public:
  Sgd(ParameterList params, SgdConfig config);

  void zero_grad();
  void step(double lr);

  std::map<std::string, Tensor> state() const;
  void load_state(const std::map<std::string, Tensor>& state);

 private:
  ParameterList params_;
  SgdConfig config_;
  std::vector<Tensor> momentum_;
};

/// base * gamma^(number of milestones <= epoch). Epochs count from 1.
double multistep_lr(double base, const std::vector<int>& milestones, double gamma, int epoch);

}  // namespace crrcd
