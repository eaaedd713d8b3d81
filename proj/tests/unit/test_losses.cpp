// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The CRRCD Authors.

#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "crrcd/error.hpp"
#include "crrcd/losses.hpp"
#include "crrcd/nn.hpp"
#include "helpers.hpp"

namespace crrcd {
namespace {

using testing::random_tensor;
using testing::to_vec;

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

TEST(RcdLoss, SinglePositiveNoNegatives) {
  const std::vector<double> pos{0.5};
  EXPECT_NEAR(rcd_loss(pos, {}, 512.0), 0.6931471805599453, 1e-12);
}

TEST(RcdLoss, PrintedWeightingMultipliesNegatives) {
  const std::vector<double> pos{0.9}, neg{0.1, 0.1};
  const double loss = rcd_loss(pos, neg, negative_weight(NegativeWeighting::printed, 2));
  EXPECT_NEAR(loss, testing::rcd_oracle(pos, neg, 2.0), 1e-12);
  EXPECT_NEAR(loss, 0.5268, 5e-5);
}

TEST(RcdLoss, MeanWeightingSumsNegatives) {
  const std::vector<double> pos{0.9}, neg{0.1, 0.1};
  EXPECT_NEAR(rcd_loss(pos, neg, negative_weight(NegativeWeighting::mean, 2)), testing::rcd_oracle(pos, neg, 1.0),
              1e-12);
}

TEST(RcdLoss, PerfectScoresBoundUnderMeanWeighting) {
  const int n = 512, batch = 96;
  const std::vector<double> pos(batch, 1.0), neg(static_cast<std::size_t>(batch) * n, 0.0);
  EXPECT_LE(rcd_loss(pos, neg, negative_weight(NegativeWeighting::mean, n)), 5e-4);
  const double printed = rcd_loss(pos, neg, negative_weight(NegativeWeighting::printed, n));
  EXPECT_NEAR(printed, testing::rcd_oracle(std::vector<double>(batch, 1.0 - kScoreEpsilon),
                                           std::vector<double>(neg.size(), kScoreEpsilon), n),
              1e-9);
}

TEST(RcdLoss, MonotoneInScores) {
  const std::vector<double> pos{0.6, 0.7}, neg{0.2, 0.3, 0.4, 0.1};
  const double base = rcd_loss(pos, neg, 2.0);
  for (std::size_t i = 0; i < pos.size(); ++i) {
    auto up = pos;
    up[i] += 0.05;
    EXPECT_LT(rcd_loss(up, neg, 2.0), base);
  }
  for (std::size_t i = 0; i < neg.size(); ++i) {
    auto down = neg;
    down[i] -= 0.05;
    EXPECT_LT(rcd_loss(pos, down, 2.0), base);
  }
}

TEST(RcdLoss, PermutationInvariant) {
  Rng rng = make_rng(1, 0);
  std::vector<double> pos(16), neg(16 * 8);
  for (double& x : pos) x = uniform(rng, 0.01, 0.99);
  for (double& x : neg) x = uniform(rng, 0.01, 0.99);
  const double base = rcd_loss(pos, neg, 8.0);
  for (int t = 0; t < 5; ++t) {
    std::shuffle(pos.begin(), pos.end(), rng);
    std::shuffle(neg.begin(), neg.end(), rng);
    EXPECT_NEAR(rcd_loss(pos, neg, 8.0), base, 1e-12);
  }
}

TEST(RcdLoss, RejectsEmptyPositives) {
  EXPECT_THROW(rcd_loss(std::vector<double>{}, std::vector<double>{}, 1.0), ContractViolation);
}

TEST(RcdLoss, TupleFormMatchesScalarScores) {
  Rng rng = make_rng(2, 0);
  const int n = 3;
  Critic critic({4, 4, 0.2, n, 10}, rng);
  std::vector<RelationTuple> pos, neg;
  std::vector<double> pos_scores, neg_scores;
  auto make = [&](bool joint) {
    RelationTuple t{{random_tensor(rng, 4, 1).col(0), RelationSpace::teacher_teacher, 0, 0},
                    {random_tensor(rng, 4, 1).col(0), RelationSpace::teacher_student, 0, 0},
                    joint};
    (joint ? pos_scores : neg_scores).push_back(critic_score(critic, t.teacher, t.cross));
    return t;
  };
  for (int p = 0; p < 2; ++p) {
    pos.push_back(make(true));
    for (int k = 0; k < n; ++k) neg.push_back(make(false));
  }
  EXPECT_NEAR(rcd_loss(critic, pos, neg, NegativeWeighting::printed), testing::rcd_oracle(pos_scores, neg_scores, n),
              1e-12);
  neg.pop_back();
  EXPECT_THROW(rcd_loss(critic, pos, neg, NegativeWeighting::printed), ContractViolation);
}

TEST(KdLoss, Examples) {
  EXPECT_NEAR(kd_loss(vec({0, 0}), vec({0, 0}), 1.0), std::log(2.0), 1e-12);
  const double h = kd_loss(vec({2, 0}), vec({0, 2}), 1.0);
  EXPECT_NEAR(h, testing::kd_oracle({2, 0}, {0, 2}, 1.0), 1e-12);
  EXPECT_NEAR(h, 1.8880, 1e-3);
}

TEST(KdLoss, MatchesOracleAtTemperature) {
  Rng rng = make_rng(3, 0);
  for (int i = 0; i < 20; ++i) {
    const Eigen::VectorXd zt = random_tensor(rng, 7, 1, 3.0).col(0);
    const Eigen::VectorXd zs = random_tensor(rng, 7, 1, 3.0).col(0);
    EXPECT_NEAR(kd_loss(zt, zs, 4.0), testing::kd_oracle(to_vec(zt), to_vec(zs), 4.0), 1e-9);
  }
}

TEST(KdLoss, StationaryAtMatchedLogits) {
  Rng rng = make_rng(4, 0);
  const Tensor zt = random_tensor(rng, 3, 5, 2.0);
  ag::Var zs = ag::parameter(zt);
  kd_loss(zs, zt, 4.0).backward();
  EXPECT_LT(zs.grad().norm(), 1e-8);
}

TEST(KdLoss, ShiftInvariantAndBoundedByEntropy) {
  Rng rng = make_rng(5, 0);
  const Eigen::VectorXd z = random_tensor(rng, 6, 1, 2.0).col(0);
  const Eigen::VectorXd shifted = z.array() + 7.25;
  EXPECT_NEAR(kd_loss(z, shifted, 4.0), kd_loss(z, z, 4.0), 1e-12);
  const auto p = testing::softmax(to_vec(z), 4.0);
  double entropy = 0.0;
  for (double x : p) entropy -= x * std::log(x);
  const Eigen::VectorXd other = random_tensor(rng, 6, 1, 2.0).col(0);
  EXPECT_GE(kd_loss(z, other, 4.0), 16.0 * entropy - 1e-12);
}

TEST(KdLoss, RejectsMismatchedDims) {
  EXPECT_THROW(kd_loss(vec({1, 2, 3}), vec({1, 2}), 1.0), ContractViolation);
}

TEST(ClsLoss, SaturatedAndUniform) {
  Eigen::VectorXd z = Eigen::VectorXd::Zero(10);
  z(3) = 30.0;
  EXPECT_LT(cls_loss(z, 3, ClsMode::cross_entropy), 1e-9);
  EXPECT_NEAR(cls_loss(Eigen::VectorXd::Constant(10, 1.5), 7, ClsMode::cross_entropy), std::log(10.0), 1e-12);
  EXPECT_THROW(cls_loss(z, 10, ClsMode::cross_entropy), ContractViolation);
  EXPECT_THROW(cls_loss(z, -1, ClsMode::cross_entropy), ContractViolation);
}

TEST(ClsLoss, ArcFaceWithoutMarginIsCosineSoftmax) {
  Rng rng = make_rng(6, 0);
  for (int i = 0; i < 5; ++i) {
    const Eigen::VectorXd c = random_tensor(rng, 6, 1).col(0).unaryExpr([](double v) { return std::tanh(v); });
    const int label = i % 6;
    EXPECT_NEAR(cls_loss(c, label, ClsMode::arcface, {1.0, 0.0}), testing::ce_oracle(to_vec(c), label), 1e-12);
  }
}

TEST(ClsLoss, ArcFaceMatchesOracle) {
  Rng rng = make_rng(7, 0);
  for (int i = 0; i < 5; ++i) {
    const Eigen::VectorXd c = random_tensor(rng, 5, 1).col(0).unaryExpr([](double v) { return 0.9 * std::tanh(v); });
    EXPECT_NEAR(cls_loss(c, 2, ClsMode::arcface, {64.0, 0.5}), testing::arcface_oracle(to_vec(c), 2, 64.0, 0.5), 1e-9);
  }
  EXPECT_THROW(cls_loss(vec({2.0, 0.1}), 0, ClsMode::arcface), ContractViolation);
}

TEST(TotalLoss, WeightedSum) {
  const LossWeights w;
  EXPECT_DOUBLE_EQ(w.alpha, 0.5);
  EXPECT_DOUBLE_EQ(w.beta, 2.0);
  EXPECT_DOUBLE_EQ(w.rho, 4.0);
  EXPECT_DOUBLE_EQ(total_loss(1.0, 1.0, 1.0, w).total, 3.5);
  const LossBreakdown plain = total_loss(0.7, 3.0, 9.0, {0.0, 0.0, 4.0});
  EXPECT_EQ(plain.total, plain.cls);
}

TEST(TotalLoss, LinearInWeights) {
  const double cls = 0.3, kd = 1.7, rcd = 2.9;
  const LossBreakdown a = total_loss(cls, kd, rcd, {0.2, 1.0, 4.0});
  const LossBreakdown b = total_loss(cls, kd, rcd, {0.6, 3.0, 4.0});
  EXPECT_NEAR(b.total - cls, 3.0 * (a.total - cls), 1e-12);
}

TEST(TotalLoss, GraphFormMatchesScalar) {
  const ag::Var cls = ag::constant(Tensor::Constant(1, 1, 0.4));
  const ag::Var kd = ag::constant(Tensor::Constant(1, 1, 1.1));
  const ag::Var rcd = ag::constant(Tensor::Constant(1, 1, 2.2));
  const LossWeights w;
  EXPECT_DOUBLE_EQ(total_loss(cls, kd, rcd, w).scalar(), total_loss(0.4, 1.1, 2.2, w).total);
}

TEST(LossWeights, Validation) {
  EXPECT_THROW((LossWeights{-1.0, 2.0, 4.0}.validate()), ContractViolation);
  EXPECT_THROW((LossWeights{0.5, -2.0, 4.0}.validate()), ContractViolation);
  EXPECT_THROW((LossWeights{0.5, 2.0, 0.0}.validate()), ContractViolation);
}

TEST(Losses, EndToEndGradientOnToyBackbone) {
  Rng rng = make_rng(8, 0);
  BackboneSpec spec;
  spec.arch = "mlp";
  spec.height = spec.width = 4;
  spec.hidden = 6;
  spec.embedding_dim = 5;
  spec.classes = 3;
  Backbone student(spec, rng);
  RelationHead tt(RelationSpace::teacher_teacher, {5, 4, 4}, rng);
  RelationHead ts(RelationSpace::teacher_student, {5, 4, 4}, rng);
  Critic critic({4, 3, 0.5, 2, 1}, rng);
  const Tensor images = random_tensor(rng, 3, 16, 0.5).array().abs();
  const Tensor teacher_emb = random_tensor(rng, 3, 5);
  const Tensor teacher_logits = random_tensor(rng, 3, 3);
  const Tensor bank_student = random_tensor(rng, 6, 5);
  const std::array<int, 3> labels{0, 1, 2};
  const LossWeights w;

  auto loss = [&] {
    const BackboneOutput out = student.forward(images);
    const ag::Var anchors = ag::constant(teacher_emb);
    const ag::Var partner_t = ag::gather_rows(anchors, {1, 2, 0});
    const ag::Var partner_s = ag::gather_rows(out.embedding, {1, 2, 0});
    const ag::Var vt = tt.forward(anchors, partner_t);
    const ag::Var pos = critic.score(vt, ts.forward(anchors, partner_s));
    const ag::Var vt_rep = ag::gather_rows(vt, {0, 0, 1, 1, 2, 2});
    const ag::Var anchors_rep = ag::gather_rows(anchors, {0, 0, 1, 1, 2, 2});
    const ag::Var neg = critic.score(vt_rep, ts.forward(anchors_rep, ag::constant(bank_student)));
    const ag::Var rcd = rcd_loss(pos, ag::reshape(neg, 3, 2), 2.0);
    return total_loss(cls_loss(out.logits, labels, ClsMode::cross_entropy), kd_loss(out.logits, teacher_logits, 4.0),
                      rcd, w);
  };
  std::vector<ag::Var> leaves;
  for (const auto& p : student.parameters()) leaves.push_back(p.var);
  EXPECT_LT(testing::check_gradients(loss, leaves).max_rel_error, 1e-3);
}

}  // namespace
}  // namespace crrcd
