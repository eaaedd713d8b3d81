// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The CRRCD Authors.

#include <benchmark/benchmark.h>

#include <vector>

#include "crrcd/critic.hpp"
#include "crrcd/losses.hpp"
#include "crrcd/relation.hpp"
#include "crrcd/rng.hpp"
#include "crrcd/trainer.hpp"

namespace crrcd {
namespace {

Tensor gaussian(Rng& rng, Index rows, Index cols) {
  Tensor t(rows, cols);
  for (Index i = 0; i < t.size(); ++i) t.data()[i] = normal(rng);
  return t;
}

std::vector<Embedding> embeddings(Rng& rng, Index count, Index dim, EmbeddingSource source) {
  std::vector<Embedding> out;
  for (Index i = 0; i < count; ++i) out.push_back({gaussian(rng, dim, 1).col(0), source, i, std::nullopt});
  return out;
}

void BM_RelateBatch(benchmark::State& state) {
  Rng rng = make_rng(1, 0);
  const Index batch = state.range(0);
  RelationHead head(RelationSpace::teacher_student, {64, 128, 128}, rng);
  const auto anchors = embeddings(rng, batch, 64, EmbeddingSource::teacher);
  const auto others = embeddings(rng, batch, 64, EmbeddingSource::student);
  for (auto _ : state) benchmark::DoNotOptimize(relate_batch(head, anchors, others));
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_RelateBatch)->Arg(96)->Arg(96 * 64);

void BM_CriticScore(benchmark::State& state) {
  Rng rng = make_rng(2, 0);
  const Index rows = state.range(0);
  Critic critic({128, 128, 0.1, 512, 50000}, rng);
  const ag::Var vt = ag::constant(gaussian(rng, rows, 128));
  const ag::Var vts = ag::constant(gaussian(rng, rows, 128));
  for (auto _ : state) benchmark::DoNotOptimize(critic.score(vt, vts).value());
  state.SetItemsProcessed(state.iterations() * rows);
}
BENCHMARK(BM_CriticScore)->Arg(96)->Arg(96 * 64);

void BM_RcdLossBackward(benchmark::State& state) {
  Rng rng = make_rng(3, 0);
  const Index negatives = state.range(0);
  const Tensor pos = (gaussian(rng, 96, 1).array().tanh() * 0.45 + 0.5).matrix();
  const Tensor neg = (gaussian(rng, 96, negatives).array().tanh() * 0.45 + 0.5).matrix();
  for (auto _ : state) {
    ag::Var p = ag::parameter(pos), n = ag::parameter(neg);
    ag::Var loss = rcd_loss(p, n, static_cast<double>(negatives));
    loss.backward();
    benchmark::DoNotOptimize(n.grad());
  }
}
BENCHMARK(BM_RcdLossBackward)->Arg(64)->Arg(512);

class TrainStep : public benchmark::Fixture {
 public:
  void SetUp(const benchmark::State&) override {
    SyntheticSpec spec;
    spec.per_class = 20;
    data_.samples = make_synthetic(spec);
    data_.manifest.classes = spec.classes;
    data_.manifest.channels = spec.channels;
    data_.manifest.hires_height = data_.manifest.hires_width = spec.hires;
    data_.manifest.factor = spec.factor;
    config_.teacher = {"cnn", 128, 8, 64};
    config_.student = {"mlp", 128, 8, 64};
    config_.teacher_epochs = 1;
    config_.relation_hidden = config_.relation_dim = config_.projection_dim = 32;
    config_.n_negatives = 64;
    config_.bank_capacity = 1024;
    config_.epochs = 1000;
    teacher_ = std::make_unique<Model>(train_teacher(config_, data_));
  }
  void TearDown(const benchmark::State&) override { teacher_.reset(); }

 protected:
  Dataset data_;
  ExperimentConfig config_;
  std::unique_ptr<Model> teacher_;
};

BENCHMARK_F(TrainStep, Distill)(benchmark::State& state) {
  Trainer trainer(config_, data_, *teacher_);
  for (int i = 0; i < 4; ++i) trainer.train_step();
  for (auto _ : state) benchmark::DoNotOptimize(trainer.train_step());
}

}  // namespace
}  // namespace crrcd

BENCHMARK_MAIN();
