// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The CRRCD Authors.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "crrcd/checkpoint.hpp"
#include "crrcd/config.hpp"
#include "crrcd/critic.hpp"
#include "crrcd/data.hpp"
#include "crrcd/losses.hpp"
#include "crrcd/model.hpp"
#include "crrcd/negatives.hpp"
#include "crrcd/relation.hpp"

namespace crrcd {

/// One row of the metrics stream.
struct StepRecord {
  std::int64_t step = 0;  // 1-based
  int epoch = 0;          // 1-based
  double lr = 0.0;
  LossBreakdown loss;
  bool warmup = false;
};

std::string metrics_header();
/// Comma-separated, numbers in shortest round-trip form.
std::string format_metrics_row(const StepRecord& record);
void write_metrics_csv(const std::filesystem::path& path, const std::vector<StepRecord>& records);
std::vector<StepRecord> read_metrics_csv(const std::filesystem::path& path);

/// Random streams derived from the config seed.
enum RngStream : std::uint64_t {
  kTeacherInitStream = 1,
  kStudentInitStream = 2,
  kRelationInitStream = 3,
  kCriticInitStream = 4,
  kShuffleStream = 10,
  kPartnerStream = 11,
  kNegativeStream = 12,
};

/// Minibatch SGD loop. Supervised mode trains a teacher (hi-res) or a plain
/// student (lo-res) on classification alone; distillation mode trains a
/// student, both relation heads and the critic against a frozen teacher.
///
/// The dataset and teacher are borrowed and must outlive the trainer.
class Trainer {
 public:
  Trainer(const ExperimentConfig& config, const Dataset& train, ModelRole role);
  Trainer(const ExperimentConfig& config, const Dataset& train, const Model& teacher);
  ~Trainer();
  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  bool distilling() const { return teacher_ != nullptr; }
  std::int64_t step() const { return step_; }
  std::int64_t steps_per_epoch() const;
  std::int64_t total_steps() const;
  bool finished() const { return step_ >= total_steps(); }

  StepRecord train_step();
  /// Steps until finished or until `stop_at` steps have been taken in total.
  std::vector<StepRecord> run(std::optional<std::int64_t> stop_at = std::nullopt,
                              const std::function<void(const StepRecord&)>& on_step = {});

  Checkpoint checkpoint() const;
  /// Continues from a checkpoint written by an identically configured trainer.
  /// Refuses (ConfigError) on a config or teacher mismatch. The negative bank
  /// restarts empty.
  void restore(const Checkpoint& checkpoint);

  const Model& model() const { return model_; }
  Model& model() { return model_; }
  const ExperimentConfig& config() const { return config_; }
  const NegativeBank& bank() const { return bank_; }
  const RelationHead* teacher_head() const { return teacher_head_.get(); }
  const RelationHead* cross_head() const { return cross_head_.get(); }
  const Critic* critic() const { return critic_.get(); }

 private:
  void init_optimizer();
  ParameterList trainable() const;
  ag::Var relation_term(const std::vector<Index>& batch, const ag::Var& student_embedding, bool& warmup);

  ExperimentConfig config_;
  const Dataset& train_;
  const Model* teacher_ = nullptr;
  Model model_;
  std::unique_ptr<RelationHead> teacher_head_;
  std::unique_ptr<RelationHead> cross_head_;
  std::unique_ptr<Critic> critic_;
  std::unique_ptr<Sgd> optimizer_;
  NegativeBank bank_;

  Tensor inputs_;
  Tensor teacher_embeddings_;
  Tensor teacher_logits_;
  std::vector<int> labels_;

  Rng shuffle_rng_;
  Rng partner_rng_;
  Rng negative_rng_;

  std::int64_t step_ = 0;
  int completed_epochs_ = 0;
  int step_in_epoch_ = 0;
  std::vector<Index> order_;
};

/// Trains a teacher for config.teacher_epochs and records its final training
/// accuracy in notes["train_accuracy"].
Model train_teacher(const ExperimentConfig& config, const Dataset& train, std::vector<StepRecord>* trace = nullptr);

/// Distills a student for config.epochs. With alpha = beta = 0 this is plain
/// low-resolution supervised training.
Model distill_student(const ExperimentConfig& config, const Model& teacher, const Dataset& train,
                      std::vector<StepRecord>* trace = nullptr);

}  // namespace crrcd
