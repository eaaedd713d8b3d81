// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The CRRCD Authors.

#include "crrcd/losses.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "crrcd/error.hpp"

namespace crrcd {

void LossWeights::validate() const {
  CRRCD_REQUIRE(alpha >= 0.0, "loss weights: alpha must be nonnegative");
  CRRCD_REQUIRE(beta >= 0.0, "loss weights: beta must be nonnegative");
  CRRCD_REQUIRE(rho > 0.0, "loss weights: rho must be positive");
}

double negative_weight(NegativeWeighting weighting, int n_negatives) {
  return weighting == NegativeWeighting::printed ? static_cast<double>(n_negatives) : 1.0;
}

ag::Var rcd_loss(const ag::Var& positive_scores, const ag::Var& negative_scores,
                 double negative_weight) {
  const Index positives = positive_scores.rows();
  CRRCD_REQUIRE(positives > 0 && positive_scores.cols() == 1, "rcd_loss: need a P x 1 positive column");
  CRRCD_REQUIRE(negative_scores.size() == 0 || negative_scores.rows() == positives,
                "rcd_loss: negatives must have one row per positive");
  CRRCD_REQUIRE(positive_scores.value().allFinite(), "rcd_loss: non-finite positive score");
  ag::Var loss = ag::scale(ag::sum(ag::log(positive_scores)), -1.0);
  if (negative_scores.size() > 0) {
    CRRCD_REQUIRE(negative_scores.value().allFinite(), "rcd_loss: non-finite negative score");
    const ag::Var ones = ag::constant(Tensor::Ones(negative_scores.rows(), negative_scores.cols()));
    const ag::Var neg = ag::sum(ag::log(ag::sub(ones, negative_scores)));
    loss = ag::sub(loss, ag::scale(neg, negative_weight));
  }
  return ag::scale(loss, 1.0 / static_cast<double>(positives));
}

double rcd_loss(std::span<const double> positive_scores, std::span<const double> negative_scores,
                double negative_weight, double eps) {
  CRRCD_REQUIRE(!positive_scores.empty(), "rcd_loss: no positives");
  const auto positives = static_cast<Index>(positive_scores.size());
  CRRCD_REQUIRE(negative_scores.size() % positive_scores.size() == 0,
                "rcd_loss: negatives must divide evenly among positives");
  const Index per = static_cast<Index>(negative_scores.size()) / positives;
  Tensor pos(positives, 1), neg(positives, per);
  for (Index i = 0; i < positives; ++i) pos(i, 0) = std::clamp(positive_scores[i], eps, 1.0 - eps);
  for (Index i = 0; i < neg.size(); ++i) neg.data()[i] = std::clamp(negative_scores[i], eps, 1.0 - eps);
  return rcd_loss(ag::constant(pos), ag::constant(neg), negative_weight).scalar();
}

double rcd_loss(const Critic& critic, std::span<const RelationTuple> positives,
                std::span<const RelationTuple> negatives, NegativeWeighting weighting) {
  CRRCD_REQUIRE(!positives.empty(), "rcd_loss: no positive tuples");
  const auto n = static_cast<std::size_t>(critic.spec().n_negatives);
  CRRCD_REQUIRE(negatives.size() == positives.size() * n,
                "rcd_loss: negative count per positive must equal n_negatives");
  auto score_all = [&](std::span<const RelationTuple> tuples, bool joint) {
    std::vector<double> scores;
    scores.reserve(tuples.size());
    for (const auto& t : tuples) {
      CRRCD_REQUIRE(t.joint == joint, "rcd_loss: tuple tag does not match its list");
      scores.push_back(critic_score(critic, t.teacher, t.cross));
    }
    return scores;
  };
  const std::vector<double> pos = score_all(positives, true);
  const std::vector<double> neg = score_all(negatives, false);
  return rcd_loss(pos, neg, negative_weight(weighting, critic.spec().n_negatives),
                  critic.spec().eps);
}

ag::Var kd_loss(const ag::Var& student_logits, const Tensor& teacher_logits, double rho) {
  CRRCD_REQUIRE(rho > 0.0, "kd_loss: rho must be positive");
  CRRCD_REQUIRE(student_logits.rows() == teacher_logits.rows() &&
                    student_logits.cols() == teacher_logits.cols(),
                "kd_loss: logit shape mismatch");
  CRRCD_REQUIRE(student_logits.cols() >= 2, "kd_loss: need at least two classes");
  CRRCD_REQUIRE(teacher_logits.allFinite() && student_logits.value().allFinite(),
                "kd_loss: non-finite logits");
  Tensor targets(teacher_logits.rows(), teacher_logits.cols());
  for (Index r = 0; r < targets.rows(); ++r) {
    const double peak = teacher_logits.row(r).maxCoeff() / rho;
    double total = 0.0;
    for (Index c = 0; c < targets.cols(); ++c) {
      targets(r, c) = std::exp(teacher_logits(r, c) / rho - peak);
      total += targets(r, c);
    }
    targets.row(r) /= total;
  }
  return ag::soft_cross_entropy(student_logits, targets, rho);
}

double kd_loss(const Eigen::VectorXd& teacher_logits, const Eigen::VectorXd& student_logits,
               double rho) {
  CRRCD_REQUIRE(teacher_logits.size() == student_logits.size(), "kd_loss: dimension mismatch");
  const Tensor zt = teacher_logits.transpose();
  const Tensor zs = student_logits.transpose();
  return kd_loss(ag::constant(zs), zt, rho).scalar();
}

ag::Var cls_loss(const ag::Var& logits, std::span<const int> labels, ClsMode mode,
                 const ArcFaceParams& arcface) {
  for (int y : labels) {
    CRRCD_REQUIRE(y >= 0 && y < logits.cols(), "cls_loss: label out of range");
  }
  if (mode == ClsMode::cross_entropy) return ag::cross_entropy(logits, labels);
  CRRCD_REQUIRE((logits.value().array().abs() <= 1.0 + 1e-9).all(),
                "cls_loss: arcface mode expects cosines from a normalized classifier");
  return ag::cross_entropy(
      ag::additive_angular_margin(logits, labels, arcface.margin, arcface.scale), labels);
}

double cls_loss(const Eigen::VectorXd& logits, int label, ClsMode mode, const ArcFaceParams& arcface) {
  const Tensor z = logits.transpose();
  const int labels[] = {label};
  return cls_loss(ag::constant(z), labels, mode, arcface).scalar();
}

ag::Var total_loss(const ag::Var& cls, const ag::Var& kd, const ag::Var& rcd, const LossWeights& w) {
  return ag::add(ag::add(cls, ag::scale(kd, w.alpha)), ag::scale(rcd, w.beta));
}

LossBreakdown total_loss(double cls, double kd, double rcd, const LossWeights& w) {
  return {cls, kd, rcd, cls + w.alpha * kd + w.beta * rcd};
}

std::string to_string(NegativeWeighting w) { return w == NegativeWeighting::printed ? "printed" : "mean"; }
std::string to_string(ClsMode m) { return m == ClsMode::cross_entropy ? "cross_entropy" : "arcface"; }

NegativeWeighting parse_negative_weighting(const std::string& s) {
  if (s == "printed") return NegativeWeighting::printed;
  if (s == "mean") return NegativeWeighting::mean;
  throw ContractViolation("unknown negative weighting '" + s + "'");
}

ClsMode parse_cls_mode(const std::string& s) {
  if (s == "cross_entropy") return ClsMode::cross_entropy;
  if (s == "arcface") return ClsMode::arcface;
  throw ContractViolation("unknown classification mode '" + s + "'");
}

}  // namespace crrcd
