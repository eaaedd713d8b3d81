// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The CRRCD Authors.

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "crrcd/critic.hpp"
#include "crrcd/error.hpp"
#include "helpers.hpp"

namespace crrcd {
namespace {

using testing::random_tensor;
using testing::to_mat;
using testing::to_vec;

RelationVector rel(const Eigen::VectorXd& v, RelationSpace space) { return {v, space, 0, 0}; }

Eigen::VectorXd random_vec(Rng& rng, Index dim) { return random_tensor(rng, dim, 1).col(0); }

TEST(Critic, ProjectNormalizeClassicTriangle) {
  Rng rng = make_rng(1, 0);
  Linear map(2, 2, false, rng);
  const_cast<ag::Var&>(map.weight()).mutable_value() = Tensor::Identity(2, 2);
  const Eigen::VectorXd out = project_normalize(map, Eigen::Vector2d(3.0, 4.0));
  EXPECT_NEAR(out(0), 0.6, 1e-15);
  EXPECT_NEAR(out(1), 0.8, 1e-15);
}

TEST(Critic, ProjectNormalizeScaleInvariantAndUnit) {
  Rng rng = make_rng(2, 0);
  for (int i = 0; i < 10; ++i) {
    Linear map(6, 4, false, rng);
    const Eigen::VectorXd v = random_vec(rng, 6);
    const Eigen::VectorXd a = project_normalize(map, v);
    const Eigen::VectorXd b = project_normalize(map, 2.0 * v);
    EXPECT_NEAR((a - b).cwiseAbs().maxCoeff(), 0.0, 1e-15);
    EXPECT_NEAR(a.norm(), 1.0, 1e-9);
  }
}

TEST(Critic, ProjectNormalizeRejectsNonFinite) {
  Rng rng = make_rng(3, 0);
  Linear map(2, 2, false, rng);
  EXPECT_THROW(project_normalize(map, Eigen::Vector2d(NAN, 1.0)), ContractViolation);
}

TEST(Critic, ScalarExamples) {
  EXPECT_DOUBLE_EQ(critic_probability(0.0, 0.1, 512.0 / 512.0), 0.5);
  const double high = critic_probability(1.0, 0.1, 512.0 / 5120.0);
  EXPECT_NEAR(high, testing::critic_oracle(1.0, 0.1, 0.1), 1e-12);
  EXPECT_NEAR(high, 0.9999954, 1e-7);
  const double low = critic_probability(-1.0, 0.1, 1.0);
  EXPECT_NEAR(low, testing::critic_oracle(-1.0, 0.1, 1.0), 1e-15);
  EXPECT_NEAR(low, 4.5398e-5, 1e-9);
}

TEST(Critic, ScoreMatchesOracle) {
  Rng rng = make_rng(4, 0);
  for (int i = 0; i < 10; ++i) {
    CriticSpec spec{5, 3, 0.1 + 0.1 * i, 512, 5120};
    Critic critic(spec, rng);
    const Eigen::VectorXd vt = random_vec(rng, 5), vts = random_vec(rng, 5);
    const auto u = testing::normalized_projection(to_mat(critic.h1().weight().value()), to_vec(vt));
    const auto w = testing::normalized_projection(to_mat(critic.h2().weight().value()), to_vec(vts));
    double inner = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) inner += u[k] * w[k];
    const double expect = testing::critic_oracle(inner, spec.tau, 512.0 / 5120.0);
    EXPECT_NEAR(critic_score(critic, rel(vt, RelationSpace::teacher_teacher), rel(vts, RelationSpace::teacher_student)),
                expect, 1e-9);
  }
}

TEST(Critic, RangeAndScaleInvariance) {
  Rng rng = make_rng(5, 0);
  Critic critic({4, 4, 0.01, 1, 1000000}, rng);
  for (int i = 0; i < 50; ++i) {
    const Eigen::VectorXd vt = random_vec(rng, 4), vts = random_vec(rng, 4);
    const double s = critic_score(critic, rel(vt, RelationSpace::teacher_teacher), rel(vts, RelationSpace::teacher_student));
    EXPECT_GE(s, kScoreEpsilon);
    EXPECT_LE(s, 1.0 - kScoreEpsilon);
    const double scaled = critic_score(critic, rel(3.5 * vt, RelationSpace::teacher_teacher),
                                       rel(0.25 * vts, RelationSpace::teacher_student));
    EXPECT_NEAR(scaled, s, 1e-12);
  }
}

TEST(Critic, MonotoneInCosine) {
  Rng rng = make_rng(6, 0);
  Critic critic({2, 2, 0.1, 8, 16}, rng);
  const_cast<ag::Var&>(critic.h1().weight()).mutable_value() = Tensor::Identity(2, 2);
  const_cast<ag::Var&>(critic.h2().weight()).mutable_value() = Tensor::Identity(2, 2);
  const Eigen::Vector2d vt(1.0, 0.0);
  double prev = 0.0;
  for (int k = 0; k <= 32; ++k) {
    const double angle = std::numbers::pi * (32 - k) / 32.0;
    const Eigen::Vector2d vts(std::cos(angle), std::sin(angle));
    const double s = critic_score(critic, rel(vt, RelationSpace::teacher_teacher), rel(vts, RelationSpace::teacher_student));
    EXPECT_GE(s, prev);
    prev = s;
  }
}

TEST(Critic, GradientsMatchFiniteDifferences) {
  Rng rng = make_rng(7, 0);
  for (int draw = 0; draw < 5; ++draw) {
    Critic critic({5, 4, 0.5, 4, 2}, rng);
    ag::Var vt = ag::parameter(random_tensor(rng, 3, 5));
    ag::Var vts = ag::parameter(random_tensor(rng, 3, 5));
    std::vector<ag::Var> leaves{vt, vts};
    for (const auto& p : critic.parameters()) leaves.push_back(p.var);
    auto loss = [&] { return ag::sum(ag::log(critic.score(vt, vts))); };
    EXPECT_LT(testing::check_gradients(loss, leaves).max_rel_error, 1e-4);
  }
}

TEST(Critic, MiBoundExamples) {
  const std::vector<double> chance{0.5, 0.5, 0.5};
  EXPECT_NEAR(mi_lower_bound(1, chance), std::log(0.5), 1e-15);
  const std::vector<double> perfect(96, 1.0);
  EXPECT_NEAR(mi_lower_bound(512, perfect), std::log(512.0), 1e-6);
  EXPECT_LE(mi_lower_bound(512, perfect), std::log(512.0));
  EXPECT_THROW(mi_lower_bound(512, std::vector<double>{}), ContractViolation);
}

TEST(Critic, MiBoundNeverExceedsLogN) {
  Rng rng = make_rng(8, 0);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> s(10);
    for (double& x : s) x = uniform(rng, 0.0, 1.0);
    EXPECT_LE(mi_lower_bound(64, s), std::log(64.0));
  }
}

TEST(Critic, ValidationRejectsBadSpecs) {
  Rng rng = make_rng(9, 0);
  EXPECT_THROW(Critic({2, 2, 0.0, 1, 1}, rng), ContractViolation);
  EXPECT_THROW(Critic({2, 2, 0.1, 0, 1}, rng), ContractViolation);
  EXPECT_THROW(Critic({2, 2, 0.1, 1, 0}, rng), ContractViolation);
  Critic ok({2, 2, 0.1, 1, 1}, rng);
  const_cast<ag::Var&>(ok.h1().weight()).mutable_value().row(0).setZero();
  EXPECT_THROW(ok.validate(), ContractViolation);
}

TEST(Critic, OffsetIsNegativesOverCardinality) {
  Rng rng = make_rng(10, 0);
  Critic critic({2, 2, 0.1, 512, 50000}, rng);
  EXPECT_DOUBLE_EQ(critic.offset(), 512.0 / 50000.0);
}

}  // namespace
}  // namespace crrcd
