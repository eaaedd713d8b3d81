// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The CRRCD Authors.

#pragma once

#include <map>
#include <span>
#include <string>

#include "crrcd/checkpoint.hpp"
#include "crrcd/config.hpp"
#include "crrcd/data.hpp"
#include "crrcd/nn.hpp"

namespace crrcd {

/// A backbone together with the image view it consumes: teachers read the
/// high-resolution image, students the low-resolution one (optionally
/// upsampled back).
class Model {
 public:
  Model(BackboneSpec spec, ModelRole role, StudentInput input, Rng& rng);

  /// Rebuilds the model stored in a checkpoint.
  static Model from_checkpoint(const Checkpoint& checkpoint);

  ModelRole role() const { return role_; }
  StudentInput input_mode() const { return input_; }
  const Backbone& backbone() const { return backbone_; }
  const BackboneSpec& spec() const { return backbone_.spec(); }

  Image view(const PairedSample& sample) const;
  /// Rows of flattened views.
  Tensor inputs(std::span<const PairedSample> samples) const;

  struct Outputs {
    Tensor embeddings;
    Tensor logits;
  };
  Outputs predict(const Tensor& inputs) const;
  Outputs predict(std::span<const PairedSample> samples) const;

  ParameterList parameters() const { return backbone_.parameters(); }
  std::map<std::string, Tensor> state() const { return snapshot(parameters()); }
  void load_state(const std::map<std::string, Tensor>& values) { load_parameters(parameters(), values); }
  std::string parameter_hash() const;

  std::map<std::string, std::string> notes;

 private:
  Backbone backbone_;
  ModelRole role_;
  StudentInput input_;
};

/// Backbone shape for `role` from the config and the dataset geometry.
BackboneSpec backbone_spec(const ExperimentConfig& config, const DatasetManifest& manifest, ModelRole role);

/// Stand-alone checkpoint holding only the model (no optimizer or loop state).
Checkpoint model_checkpoint(const Model& model, const ExperimentConfig& config);

}  // namespace crrcd
