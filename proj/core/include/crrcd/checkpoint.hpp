// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The CRRCD Authors.
//
// Checkpoint file layout:
//   "CRRCDCK1" | u64 header bytes | JSON header | u64 payload bytes | payload | sha256 hex (64 bytes)
// The payload holds raw little-endian doubles for every tensor listed in the
// header; the trailing digest covers everything before it.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "crrcd/autograd.hpp"
#include "crrcd/nn.hpp"

namespace crrcd {

enum class ModelRole { teacher, student };

struct Checkpoint {
  ModelRole role = ModelRole::teacher;
  BackboneSpec backbone;
  std::string input_mode = "native";  // student view of the low-resolution image
  std::string config_text;
  std::string config_hash;
  std::string teacher_hash;  // parameter hash of the frozen teacher (student runs)

  std::int64_t step = 0;
  int completed_epochs = 0;
  int step_in_epoch = 0;
  std::vector<std::int64_t> epoch_order;
  std::map<std::string, std::string> rng_states;

  std::map<std::string, Tensor> parameters;
  std::map<std::string, Tensor> optimizer;
  std::map<std::string, std::string> notes;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
/// Throws ChecksumError on a truncated or corrupted file.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// SHA-256 over names, shapes and raw values, in name order.
std::string parameters_hash(const std::map<std::string, Tensor>& parameters);

std::string to_string(ModelRole role);
ModelRole parse_model_role(const std::string& s);

}  // namespace crrcd
