// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The CRRCD Authors.

#include <gtest/gtest.h>

#include "crrcd/error.hpp"
#include "crrcd/relation.hpp"
#include "helpers.hpp"

namespace crrcd {
namespace {

using testing::random_tensor;
using testing::to_mat;
using testing::to_vec;

Embedding emb(std::vector<double> v, EmbeddingSource src, std::int64_t id = 0) {
  Embedding e;
  e.values = Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Index>(v.size()));
  e.source = src;
  e.sample_id = id;
  return e;
}

Embedding random_emb(Rng& rng, Index dim, EmbeddingSource src, std::int64_t id) {
  Embedding e;
  e.values = random_tensor(rng, dim, 1).col(0);
  e.source = src;
  e.sample_id = id;
  return e;
}

ag::Var param(const RelationHead& head, const std::string& name) {
  for (const auto& p : head.parameters()) {
    if (p.name == name) return p.var;
  }
  throw std::runtime_error("no parameter " + name);
}

TEST(Relation, ZeroInputsWithZeroBiasGiveZero) {
  Rng rng = make_rng(1, 0);
  RelationHead head(RelationSpace::teacher_student, {6, 4, 3}, rng);
  param(head, "out.bias").mutable_value().setZero();
  const auto v = relate(head, emb(std::vector<double>(6, 0.0), EmbeddingSource::teacher),
                        emb(std::vector<double>(6, 0.0), EmbeddingSource::student));
  EXPECT_EQ(v.values, Eigen::VectorXd::Zero(3));
  EXPECT_EQ(v.space, RelationSpace::teacher_student);
}

TEST(Relation, HandEvaluatedComposition) {
  Rng rng = make_rng(2, 0);
  RelationHead head(RelationSpace::teacher_student, {2, 2, 1}, rng);
  param(head, "anchor.weight").mutable_value() = Tensor::Identity(2, 2);
  param(head, "other.weight").mutable_value() = Tensor::Identity(2, 2);
  param(head, "out.weight").mutable_value() = Tensor::Ones(1, 2);
  param(head, "out.bias").mutable_value().setZero();
  const auto v = relate(head, emb({1.0, 0.0}, EmbeddingSource::teacher), emb({0.0, 2.0}, EmbeddingSource::student));
  ASSERT_EQ(v.values.size(), 1);
  EXPECT_DOUBLE_EQ(v.values(0), 1.0);
}

TEST(Relation, MatchesScalarOracle) {
  Rng rng = make_rng(3, 0);
  RelationHead head(RelationSpace::teacher_teacher, {5, 7, 3}, rng);
  const auto a = random_emb(rng, 5, EmbeddingSource::teacher, 1);
  const auto o = random_emb(rng, 5, EmbeddingSource::teacher, 2);
  const auto v = relate(head, a, o);
  const auto expect = testing::relation_oracle(
      to_mat(param(head, "anchor.weight").value()), to_mat(param(head, "other.weight").value()),
      to_mat(param(head, "out.weight").value()), to_mat(param(head, "out.bias").value())[0], to_vec(a.values),
      to_vec(o.values));
  for (Index i = 0; i < 3; ++i) EXPECT_NEAR(v.values(i), expect[i], 1e-12);
  EXPECT_EQ(v.anchor_id, 1);
  EXPECT_EQ(v.other_id, 2);
}

TEST(Relation, BiasFreeSharedMapsGiveImageOfZero) {
  Rng rng = make_rng(4, 0);
  RelationHead head(RelationSpace::teacher_teacher, {4, 4, 2}, rng);
  param(head, "other.weight").mutable_value() = param(head, "anchor.weight").value();
  const auto e = random_emb(rng, 4, EmbeddingSource::teacher, 0);
  const auto zero = emb(std::vector<double>(4, 0.0), EmbeddingSource::teacher);
  EXPECT_EQ(relate(head, e, e).values, relate(head, zero, zero).values);
}

TEST(Relation, GradientsMatchFiniteDifferences) {
  Rng rng = make_rng(5, 0);
  for (int draw = 0; draw < 5; ++draw) {
    RelationHead head(RelationSpace::teacher_student, {6, 5, 4}, rng);
    ag::Var a = ag::parameter(random_tensor(rng, 1, 6));
    ag::Var o = ag::parameter(random_tensor(rng, 1, 6));
    const Tensor probe = random_tensor(rng, 1, 4);
    std::vector<ag::Var> leaves{a, o};
    for (const auto& p : head.parameters()) leaves.push_back(p.var);
    auto loss = [&] { return ag::sum(ag::mul(head.forward(a, o), ag::constant(probe))); };
    EXPECT_LT(testing::check_gradients(loss, leaves).max_rel_error, 1e-4);
  }
}

TEST(Relation, BatchEqualsLoopBitwise) {
  Rng rng = make_rng(6, 0);
  RelationHead head(RelationSpace::teacher_student, {8, 6, 5}, rng);
  std::vector<Embedding> anchors, others;
  for (int i = 0; i < 8; ++i) {
    anchors.push_back(random_emb(rng, 8, EmbeddingSource::teacher, i));
    others.push_back(random_emb(rng, 8, EmbeddingSource::student, 100 + i));
  }
  const auto batch = relate_batch(head, anchors, others);
  ASSERT_EQ(batch.size(), 8u);
  for (std::size_t i = 0; i < 8; ++i) {
    const auto single = relate(head, anchors[i], others[i]);
    EXPECT_TRUE((single.values.array() == batch[i].values.array()).all()) << "pair " << i;
  }
}

TEST(Relation, SingletonAndEmptyBatches) {
  Rng rng = make_rng(7, 0);
  RelationHead head(RelationSpace::teacher_teacher, {3, 3, 3}, rng);
  const auto a = random_emb(rng, 3, EmbeddingSource::teacher, 0);
  const auto o = random_emb(rng, 3, EmbeddingSource::teacher, 1);
  const auto one = relate_batch(head, std::span(&a, 1), std::span(&o, 1));
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].values, relate(head, a, o).values);
  EXPECT_TRUE(relate_batch(head, {}, {}).empty());
}

TEST(Relation, Deterministic) {
  Rng r1 = make_rng(8, 0), r2 = make_rng(8, 0);
  RelationHead h1(RelationSpace::teacher_student, {4, 4, 4}, r1);
  RelationHead h2(RelationSpace::teacher_student, {4, 4, 4}, r2);
  Rng rng = make_rng(9, 0);
  const auto a = random_emb(rng, 4, EmbeddingSource::teacher, 0);
  const auto o = random_emb(rng, 4, EmbeddingSource::student, 1);
  EXPECT_EQ(relate(h1, a, o).values, relate(h2, a, o).values);
}

TEST(Relation, ContractViolations) {
  Rng rng = make_rng(10, 0);
  RelationHead tt(RelationSpace::teacher_teacher, {3, 3, 2}, rng);
  RelationHead ts(RelationSpace::teacher_student, {3, 3, 2}, rng);
  const auto t = random_emb(rng, 3, EmbeddingSource::teacher, 0);
  const auto s = random_emb(rng, 3, EmbeddingSource::student, 1);
  const auto wrong_dim = random_emb(rng, 4, EmbeddingSource::teacher, 2);
  EXPECT_THROW(relate(tt, t, wrong_dim), ContractViolation);
  EXPECT_THROW(relate(tt, t, s), ContractViolation);
  EXPECT_THROW(relate(ts, t, t), ContractViolation);
  EXPECT_THROW(relate(ts, s, s), ContractViolation);
  std::vector<Embedding> two{t, t}, one{t};
  EXPECT_THROW(relate_batch(tt, two, one), ContractViolation);
}

TEST(Relation, HeadsDoNotShareParameters) {
  Rng rng = make_rng(11, 0);
  RelationHead tt(RelationSpace::teacher_teacher, {3, 3, 2}, rng);
  RelationHead ts(RelationSpace::teacher_student, {3, 3, 2}, rng);
  for (const auto& p : tt.parameters()) {
    for (const auto& q : ts.parameters()) EXPECT_NE(p.var.node(), q.var.node());
  }
}

}  // namespace
}  // namespace crrcd
