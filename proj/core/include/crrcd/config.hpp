// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The CRRCD Authors.
//
// Experiment configuration. On disk it is a flat `key: value` file using the
// dotted keys listed by config_keys(); unknown keys are rejected. The
// canonical form (every key, fixed order, shortest round-trip numbers) is what
// gets hashed and embedded in manifests and checkpoints.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "crrcd/data.hpp"
#include "crrcd/losses.hpp"
#include "crrcd/negatives.hpp"

namespace crrcd {

struct NetworkConfig {
  std::string arch;
  int hidden = 128;
  int conv_channels = 8;
  int embedding_dim = 512;
};

struct ExperimentConfig {
  std::string name = "crrcd";
  std::uint64_t seed = 5;

  NetworkConfig teacher{"cnn", 128, 8, 512};
  int teacher_epochs = 35;
  NetworkConfig student{"mlp", 128, 8, 512};
  StudentInput student_input = StudentInput::native;
  int student_input_size = 0;  // bilinear_upsample target; 0 means the hi-res size

  LossWeights loss;
  ClsMode cls_mode = ClsMode::cross_entropy;
  ArcFaceParams arcface;
  NegativeWeighting negative_weighting = NegativeWeighting::printed;

  double tau = 0.1;
  int n_negatives = 512;
  std::int64_t dataset_cardinality = 0;  // 0: number of training samples
  int relation_hidden = 128;
  int relation_dim = 128;
  int projection_dim = 128;

  int bank_capacity = 4096;
  SamplingMode sampling = SamplingMode::supervised;

  double lr = 0.05;
  std::vector<int> milestones{21, 28, 32};
  double gamma = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;

  int batch_size = 96;
  int epochs = 35;
  int checkpoint_every = 0;  // steps; 0 disables periodic checkpoints
  int factor = 4;

  std::vector<std::string> eval_protocols{"top1"};
};

/// Every recognized key, in canonical order.
const std::vector<std::string>& config_keys();

std::string get_value(const ExperimentConfig& config, const std::string& key);
/// Throws ConfigError naming the key on a malformed value.
void set_value(ExperimentConfig& config, const std::string& key, const std::string& value);

/// Lists every violated constraint; empty when the config is usable.
std::vector<std::string> validation_problems(const ExperimentConfig& config);
/// Throws ConfigError carrying every problem.
void validate(const ExperimentConfig& config);

std::string format_config(const ExperimentConfig& config);
ExperimentConfig parse_config(const std::string& text, const std::string& source = "config");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Applies `key=value` overrides. A key may be a full dotted key or an
/// unambiguous last component (`alpha` for `loss.alpha`).
void apply_overrides(ExperimentConfig& config, const std::vector<std::string>& overrides);

/// Content hash of the canonical form.
std::string config_hash(const ExperimentConfig& config);

std::string to_string(StudentInput s);
StudentInput parse_student_input(const std::string& s);

}  // namespace crrcd
