// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The CRRCD Authors.

#include "crrcd/trainer.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "crrcd/error.hpp"
#include "crrcd/evaluator.hpp"
#include "crrcd/hash.hpp"

namespace crrcd {

std::string metrics_header() { return "step,epoch,lr,cls,kd,rcd,total,warmup"; }

std::string format_metrics_row(const StepRecord& r) {
  return fmt::format("{},{},{},{},{},{},{},{}", r.step, r.epoch, r.lr, r.loss.cls, r.loss.kd, r.loss.rcd, r.loss.total,
                     r.warmup ? 1 : 0);
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<StepRecord>& records) {
  std::string out = metrics_header() + "\n";
  for (const auto& r : records) out += format_metrics_row(r) + "\n";
  write_file(path, out);
}

std::vector<StepRecord> read_metrics_csv(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  std::getline(in, line);
  if (line != metrics_header()) throw ParseError(path.string(), 1, "unexpected metrics header");
  std::vector<StepRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream row(line);
    for (std::string cell; std::getline(row, cell, ',');) f.push_back(cell);
    if (f.size() != 8) throw ParseError(path.string(), lineno, "expected 8 fields");
    try {
      StepRecord r;
      r.step = std::stoll(f[0]);
      r.epoch = std::stoi(f[1]);
      r.lr = std::stod(f[2]);
      r.loss = {std::stod(f[3]), std::stod(f[4]), std::stod(f[5]), std::stod(f[6])};
      r.warmup = f[7] == "1";
      out.push_back(r);
    } catch (const std::logic_error&) {
      throw ParseError(path.string(), lineno, "malformed number");
    }
  }
  return out;
}

namespace {

Model make_model(const ExperimentConfig& config, const Dataset& train, ModelRole role) {
  Rng rng = make_rng(config.seed, role == ModelRole::teacher ? kTeacherInitStream : kStudentInitStream);
  return Model(backbone_spec(config, train.manifest, role), role, config.student_input, rng);
}

Tensor gather(const Tensor& src, const std::vector<Index>& rows) {
  Tensor out(static_cast<Index>(rows.size()), src.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = src.row(rows[i]);
  return out;
}

void shuffle(std::vector<Index>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(rng, i)]);
}

}  // namespace

Trainer::Trainer(const ExperimentConfig& config, const Dataset& train, ModelRole role)
    : config_(config),
      train_(train),
      model_(make_model(config, train, role)),
      bank_(static_cast<std::size_t>(config.bank_capacity)),
      shuffle_rng_(make_rng(config.seed, kShuffleStream)),
      partner_rng_(make_rng(config.seed, kPartnerStream)),
      negative_rng_(make_rng(config.seed, kNegativeStream)) {
  validate(config_);
  CRRCD_REQUIRE(train.size() > 0, "Trainer: empty training set");
  inputs_ = model_.inputs(train.samples);
  for (const auto& s : train.samples) labels_.push_back(s.label);
  order_.resize(train.size());
  std::iota(order_.begin(), order_.end(), Index{0});
  init_optimizer();
}

Trainer::Trainer(const ExperimentConfig& config, const Dataset& train, const Model& teacher)
    : Trainer(config, train, ModelRole::student) {
  CRRCD_REQUIRE(teacher.role() == ModelRole::teacher, "Trainer: distillation needs a teacher model");
  CRRCD_REQUIRE(teacher.spec().classes == model_.spec().classes, "Trainer: teacher and student class counts differ");
  teacher_ = &teacher;
  const Model::Outputs t = teacher.predict(train.samples);
  teacher_embeddings_ = t.embeddings;
  teacher_logits_ = t.logits;

  const RelationHeadSpec head{teacher.spec().embedding_dim, config_.relation_hidden, config_.relation_dim};
  CRRCD_REQUIRE(model_.spec().embedding_dim == head.embedding_dim, "Trainer: teacher and student embedding dims differ");
  Rng head_rng = make_rng(config_.seed, kRelationInitStream);
  teacher_head_ = std::make_unique<RelationHead>(RelationSpace::teacher_teacher, head, head_rng);
  cross_head_ = std::make_unique<RelationHead>(RelationSpace::teacher_student, head, head_rng);
  CriticSpec cs;
  cs.relation_dim = config_.relation_dim;
  cs.projection_dim = config_.projection_dim;
  cs.tau = config_.tau;
  cs.n_negatives = config_.n_negatives;
  cs.dataset_cardinality =
      config_.dataset_cardinality > 0 ? config_.dataset_cardinality : static_cast<std::int64_t>(train.size());
  Rng critic_rng = make_rng(config_.seed, kCriticInitStream);
  critic_ = std::make_unique<Critic>(cs, critic_rng);
  critic_->validate();
  init_optimizer();
}

Trainer::~Trainer() = default;

ParameterList Trainer::trainable() const {
  ParameterList params = with_prefix("model", model_.parameters());
  if (distilling()) {
    for (auto& p : with_prefix("relation_t", teacher_head_->parameters())) params.push_back(std::move(p));
    for (auto& p : with_prefix("relation_ts", cross_head_->parameters())) params.push_back(std::move(p));
    for (auto& p : with_prefix("critic", critic_->parameters())) params.push_back(std::move(p));
  }
  return params;
}

void Trainer::init_optimizer() {
  optimizer_ = std::make_unique<Sgd>(trainable(), SgdConfig{config_.momentum, config_.weight_decay});
}

std::int64_t Trainer::steps_per_epoch() const {
  const auto n = static_cast<std::int64_t>(train_.size());
  return (n + config_.batch_size - 1) / config_.batch_size;
}

std::int64_t Trainer::total_steps() const {
  const int epochs = model_.role() == ModelRole::teacher ? config_.teacher_epochs : config_.epochs;
  return steps_per_epoch() * epochs;
}

ag::Var Trainer::relation_term(const std::vector<Index>& batch, const ag::Var& student_embedding, bool& warmup) {
  const std::size_t count = batch.size();
  std::vector<Index> partner(count);
  std::iota(partner.begin(), partner.end(), Index{0});
  shuffle(partner, partner_rng_);

  const SamplingPolicy policy{config_.sampling, config_.n_negatives};
  std::vector<Index> anchors, partners;
  std::vector<std::vector<std::size_t>> negatives;
  for (std::size_t a = 0; a < count; ++a) {
    const Index j = partner[a];
    const PairedSample& s = train_.samples[static_cast<std::size_t>(batch[static_cast<std::size_t>(j)])];
    NegativeDraw draw = sample_negatives_or_warmup(bank_, policy, {s.sample_id, s.label}, negative_rng_);
    warmup = warmup || draw.warmup || draw.positions.empty();
    if (draw.positions.empty()) continue;
    anchors.push_back(static_cast<Index>(a));
    partners.push_back(j);
    negatives.push_back(std::move(draw.positions));
  }
  if (anchors.empty()) return {};

  std::vector<Index> anchor_rows, partner_rows;
  for (Index a : anchors) anchor_rows.push_back(batch[static_cast<std::size_t>(a)]);
  for (Index j : partners) partner_rows.push_back(batch[static_cast<std::size_t>(j)]);
  const TupleBatch tuples = build_tuple_batch(
      *teacher_head_, *cross_head_, ag::constant(gather(teacher_embeddings_, anchor_rows)),
      ag::constant(gather(teacher_embeddings_, partner_rows)), ag::gather_rows(student_embedding, partners), bank_,
      negatives);
  const TupleScores scores = score_tuples(*critic_, tuples);
  return rcd_loss(scores.positive, scores.negative, negative_weight(config_.negative_weighting, config_.n_negatives));
}

StepRecord Trainer::train_step() {
  CRRCD_REQUIRE(!finished(), "Trainer: training already finished");
  if (step_in_epoch_ == 0) shuffle(order_, shuffle_rng_);

  StepRecord record;
  record.epoch = completed_epochs_ + 1;
  record.lr = multistep_lr(config_.lr, config_.milestones, config_.gamma, record.epoch);

  const auto begin = static_cast<std::size_t>(step_in_epoch_) * static_cast<std::size_t>(config_.batch_size);
  const std::size_t end = std::min(order_.size(), begin + static_cast<std::size_t>(config_.batch_size));
  const std::vector<Index> batch(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                                 order_.begin() + static_cast<std::ptrdiff_t>(end));
  std::vector<int> labels;
  for (Index i : batch) labels.push_back(labels_[static_cast<std::size_t>(i)]);

  const BackboneOutput out = model_.backbone().forward(gather(inputs_, batch));
  if (!out.logits.value().allFinite() || !out.embedding.value().allFinite()) {
    throw DivergenceError(step_ + 1, fmt::format("non-finite activations at step {} (epoch {})", step_ + 1, record.epoch));
  }
  const ag::Var& cls_input = config_.cls_mode == ClsMode::arcface ? out.cosines : out.logits;
  const ag::Var cls = cls_loss(cls_input, labels, config_.cls_mode, config_.arcface);
  ag::Var total = cls;
  record.loss.cls = cls.scalar();

  // A term whose weight is zero is skipped entirely, so alpha = beta = 0
  // replays plain supervised training exactly.
  if (distilling() && config_.loss.alpha != 0.0) {
    const ag::Var kd = kd_loss(out.logits, gather(teacher_logits_, batch), config_.loss.rho);
    record.loss.kd = kd.scalar();
    total = ag::add(total, ag::scale(kd, config_.loss.alpha));
  }
  if (distilling() && config_.loss.beta != 0.0) {
    const ag::Var rcd = relation_term(batch, out.embedding, record.warmup);
    if (rcd.defined()) {
      record.loss.rcd = rcd.scalar();
      total = ag::add(total, ag::scale(rcd, config_.loss.beta));
    }
  }
  record.loss.total = total.scalar();
  record.step = step_ + 1;
  if (!std::isfinite(record.loss.total)) {
    throw DivergenceError(record.step, fmt::format("non-finite loss at step {} (epoch {}): cls={} kd={} rcd={}",
                                                   record.step, record.epoch, record.loss.cls, record.loss.kd,
                                                   record.loss.rcd));
  }

  optimizer_->zero_grad();
  total.backward();
  optimizer_->step(record.lr);

  if (distilling() && config_.loss.beta != 0.0) {
    const Tensor& student = out.embedding.value();
    for (std::size_t r = 0; r < batch.size(); ++r) {
      const auto i = static_cast<std::size_t>(batch[r]);
      bank_.push({teacher_embeddings_.row(batch[r]).transpose(), student.row(static_cast<Index>(r)).transpose(),
                  labels_[i], train_.samples[i].sample_id, 0});
    }
  }

  ++step_;
  if (++step_in_epoch_ == steps_per_epoch()) {
    step_in_epoch_ = 0;
    ++completed_epochs_;
  }
  return record;
}

std::vector<StepRecord> Trainer::run(std::optional<std::int64_t> stop_at,
                                     const std::function<void(const StepRecord&)>& on_step) {
  std::vector<StepRecord> out;
  while (!finished() && (!stop_at || step_ < *stop_at)) {
    out.push_back(train_step());
    if (on_step) on_step(out.back());
  }
  return out;
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint c = model_checkpoint(model_, config_);
  c.parameters = snapshot(trainable());
  c.optimizer = optimizer_->state();
  c.teacher_hash = teacher_ ? teacher_->parameter_hash() : "";
  c.step = step_;
  c.completed_epochs = completed_epochs_;
  c.step_in_epoch = step_in_epoch_;
  c.epoch_order.assign(order_.begin(), order_.end());
  c.rng_states = {{"shuffle", save_rng(shuffle_rng_)},
                  {"partner", save_rng(partner_rng_)},
                  {"negatives", save_rng(negative_rng_)}};
  return c;
}

void Trainer::restore(const Checkpoint& c) {
  std::vector<std::string> problems;
  if (c.config_hash != config_hash(config_)) {
    problems.push_back(fmt::format("checkpoint config hash {} does not match the supplied config ({})", c.config_hash,
                                   config_hash(config_)));
  }
  if (c.role != model_.role()) problems.push_back("checkpoint role is " + to_string(c.role));
  if (teacher_ && c.teacher_hash != teacher_->parameter_hash()) {
    problems.push_back("checkpoint was distilled from a different teacher");
  }
  if (!teacher_ && !c.teacher_hash.empty()) problems.push_back("checkpoint belongs to a distillation run");
  if (c.epoch_order.size() != order_.size()) problems.push_back("checkpoint epoch order has the wrong length");
  if (!problems.empty()) throw ConfigError(std::move(problems));

  load_parameters(trainable(), c.parameters);
  optimizer_->load_state(c.optimizer);
  shuffle_rng_ = load_rng(c.rng_states.at("shuffle"));
  partner_rng_ = load_rng(c.rng_states.at("partner"));
  negative_rng_ = load_rng(c.rng_states.at("negatives"));
  step_ = c.step;
  completed_epochs_ = c.completed_epochs;
  step_in_epoch_ = c.step_in_epoch;
  order_.assign(c.epoch_order.begin(), c.epoch_order.end());
  model_.notes = c.notes;
  bank_.clear();
}

Model train_teacher(const ExperimentConfig& config, const Dataset& train, std::vector<StepRecord>* trace) {
  Trainer trainer(config, train, ModelRole::teacher);
  auto records = trainer.run();
  Model model = trainer.model();
  model.notes["train_accuracy"] = fmt::format("{}", top1(model, train));
  if (trace) *trace = std::move(records);
  return model;
}

Model distill_student(const ExperimentConfig& config, const Model& teacher, const Dataset& train,
                      std::vector<StepRecord>* trace) {
  Trainer trainer(config, train, teacher);
  auto records = trainer.run();
  Model model = trainer.model();
  model.notes["train_accuracy"] = fmt::format("{}", top1(model, train));
  if (trace) *trace = std::move(records);
  return model;
}

}  // namespace crrcd
