// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The CRRCD Authors.

#include "crrcd/critic.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "crrcd/error.hpp"

namespace crrcd {

Critic::Critic(CriticSpec spec, Rng& rng)
    : spec_(spec),
      h1_(spec.relation_dim, spec.projection_dim, false, rng),
      h2_(spec.relation_dim, spec.projection_dim, false, rng) {
  validate();
}

void Critic::validate() const {
  CRRCD_REQUIRE(spec_.tau > 0.0, "critic: tau must be positive");
  CRRCD_REQUIRE(spec_.n_negatives >= 1, "critic: n_negatives must be at least 1");
  CRRCD_REQUIRE(spec_.dataset_cardinality >= 1, "critic: dataset_cardinality must be at least 1");
  CRRCD_REQUIRE(spec_.eps > 0.0 && spec_.eps < 0.5, "critic: eps must lie in (0, 0.5)");
  for (const Linear* map : {&h1_, &h2_}) {
    const Tensor& w = map->weight().value();
    CRRCD_REQUIRE(w.allFinite(), "critic: non-finite projection weights");
    for (Index r = 0; r < w.rows(); ++r) {
      CRRCD_REQUIRE(w.row(r).cwiseAbs().maxCoeff() > 0.0, "critic: all-zero projection row");
    }
  }
}

double Critic::offset() const {
  return static_cast<double>(spec_.n_negatives) / static_cast<double>(spec_.dataset_cardinality);
}

ag::Var Critic::project_teacher(const ag::Var& teacher_relations) const {
  return ag::l2_normalize_rows(h1_.forward(teacher_relations), kNormEpsilon);
}

ag::Var Critic::project_cross(const ag::Var& cross_relations) const {
  return ag::l2_normalize_rows(h2_.forward(cross_relations), kNormEpsilon);
}

ag::Var Critic::score_projected(const ag::Var& teacher_units, const ag::Var& cross_units) const {
  return ag::contrastive_probability(ag::rowwise_dot(teacher_units, cross_units), spec_.tau,
                                     offset(), spec_.eps);
}

ag::Var Critic::score(const ag::Var& teacher_relations, const ag::Var& cross_relations) const {
  CRRCD_REQUIRE(teacher_relations.rows() == cross_relations.rows(), "critic: row count mismatch");
  CRRCD_REQUIRE(teacher_relations.cols() == spec_.relation_dim &&
                    cross_relations.cols() == spec_.relation_dim,
                "critic: relation dimension mismatch");
  return score_projected(project_teacher(teacher_relations), project_cross(cross_relations));
}

ParameterList Critic::parameters() const {
  ParameterList out = with_prefix("h1", h1_.parameters());
  for (auto& p : with_prefix("h2", h2_.parameters())) out.push_back(std::move(p));
  return out;
}

double critic_probability(double inner, double tau, double offset, double eps) {
  CRRCD_REQUIRE(tau > 0.0, "critic_probability: tau must be positive");
  const double e = std::exp(inner / tau);
  const double p = std::isinf(e) ? 1.0 : e / (e + offset);
  return std::clamp(p, eps, 1.0 - eps);
}

Eigen::VectorXd project_normalize(const Linear& map, const Eigen::VectorXd& v) {
  CRRCD_REQUIRE(v.size() == map.in_features(), "project_normalize: dimension mismatch");
  CRRCD_REQUIRE(v.allFinite(), "project_normalize: non-finite input");
  Tensor row = v.transpose();
  const ag::Var out = ag::l2_normalize_rows(map.forward(ag::constant(row)), kNormEpsilon);
  return out.value().row(0).transpose();
}

double critic_score(const Critic& critic, const RelationVector& teacher_relation,
                    const RelationVector& cross_relation) {
  CRRCD_REQUIRE(teacher_relation.space == RelationSpace::teacher_teacher,
                "critic_score: first relation must live in teacher space");
  CRRCD_REQUIRE(cross_relation.space == RelationSpace::teacher_student,
                "critic_score: second relation must live in cross space");
  const Tensor vt = teacher_relation.values.transpose();
  const Tensor vts = cross_relation.values.transpose();
  return critic.score(ag::constant(vt), ag::constant(vts)).scalar();
}

double mi_lower_bound(int n_negatives, std::span<const double> positive_scores, double eps) {
  CRRCD_REQUIRE(!positive_scores.empty(), "mi_lower_bound: no positive scores");
  CRRCD_REQUIRE(n_negatives >= 1, "mi_lower_bound: n_negatives must be at least 1");
  std::vector<double> logs;
  logs.reserve(positive_scores.size());
  for (double s : positive_scores) {
    CRRCD_REQUIRE(std::isfinite(s), "mi_lower_bound: non-finite score");
    logs.push_back(std::log(std::clamp(s, eps, 1.0 - eps)));
  }
  return std::log(static_cast<double>(n_negatives)) +
         ag::pairwise_sum(logs) / static_cast<double>(logs.size());
}

}  // namespace crrcd
