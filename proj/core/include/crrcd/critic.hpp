// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The CRRCD Authors.

#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <span>

#include "crrcd/autograd.hpp"
#include "crrcd/nn.hpp"
#include "crrcd/relation.hpp"

namespace crrcd {

inline constexpr double kScoreEpsilon = 1e-7;
inline constexpr double kNormEpsilon = 1e-12;

struct CriticSpec {
  Index relation_dim = 128;
  Index projection_dim = 128;
  double tau = 0.1;
  int n_negatives = 512;
  std::int64_t dataset_cardinality = 1;
  double eps = kScoreEpsilon;
};

/// Estimates q(b = 1 | v_t, v_ts), the probability that a relation tuple was
/// built from one shared partner sample:
///
///   h = exp(<u, w> / tau) / (exp(<u, w> / tau) + n / m)
///
/// with u = h1(v_t) / |h1(v_t)| and w = h2(v_ts) / |h2(v_ts)|.
class Critic {
 public:
  Critic(CriticSpec spec, Rng& rng);

  ag::Var project_teacher(const ag::Var& teacher_relations) const;
  ag::Var project_cross(const ag::Var& cross_relations) const;
  /// Scores row-aligned projected pairs; output is B x 1 in [eps, 1 - eps].
  ag::Var score_projected(const ag::Var& teacher_units, const ag::Var& cross_units) const;
  ag::Var score(const ag::Var& teacher_relations, const ag::Var& cross_relations) const;

  /// n / m.
  double offset() const;
  const CriticSpec& spec() const { return spec_; }
  /// Throws ContractViolation when the spec or projection weights are unusable.
  void validate() const;
  /// Names: h1.weight, h2.weight.
  ParameterList parameters() const;
  const Linear& h1() const { return h1_; }
  const Linear& h2() const { return h2_; }

 private:
  CriticSpec spec_;
  Linear h1_;
  Linear h2_;
};

/// Scalar form of the critic on a precomputed inner product.
double critic_probability(double inner, double tau, double offset, double eps = kScoreEpsilon);

/// map(v) / max(|map(v)|, kNormEpsilon) for a bias-free map.
Eigen::VectorXd project_normalize(const Linear& map, const Eigen::VectorXd& v);

double critic_score(const Critic& critic, const RelationVector& teacher_relation,
                    const RelationVector& cross_relation);

/// log(n) + mean(log score) over positive-tuple scores; the estimate of the
/// mutual-information lower bound the critic optimizes.
double mi_lower_bound(int n_negatives, std::span<const double> positive_scores,
                      double eps = kScoreEpsilon);

}  // namespace crrcd
