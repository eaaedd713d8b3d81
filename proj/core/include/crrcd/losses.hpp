// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The CRRCD Authors.

#pragma once

#include <Eigen/Core>

#include <span>
#include <string>

#include "crrcd/autograd.hpp"
#include "crrcd/critic.hpp"
#include "crrcd/relation.hpp"

namespace crrcd {

struct LossWeights {
  double alpha = 0.5;  // weight of the KD term
  double beta = 2.0;   // weight of the relation contrastive term
  double rho = 4.0;    // KD temperature

  void validate() const;
};

struct LossBreakdown {
  double cls = 0.0;
  double kd = 0.0;
  double rcd = 0.0;
  double total = 0.0;
};

/// How the negative log-terms of the relation contrastive loss are weighted.
/// `printed` multiplies every negative term by n; `mean` weights each by 1,
/// i.e. n times the mean over the n negatives.
enum class NegativeWeighting { printed, mean };

enum class ClsMode { cross_entropy, arcface };

struct ArcFaceParams {
  double scale = 64.0;
  double margin = 0.5;
};

/// A (teacher relation, cross relation) pair; joint == true for b = 1.
struct RelationTuple {
  RelationVector teacher;
  RelationVector cross;
  bool joint = true;
};

double negative_weight(NegativeWeighting weighting, int n_negatives);

// Relation contrastive loss, reported per positive:
//   (1/P) * [ -sum_pos log h  -  w * sum_neg log(1 - h) ]

/// Graph form. positive_scores is P x 1, negative_scores is P x K (K may be 0).
ag::Var rcd_loss(const ag::Var& positive_scores, const ag::Var& negative_scores,
                 double negative_weight);
/// Scores are clamped to [eps, 1 - eps] before the logarithms.
double rcd_loss(std::span<const double> positive_scores, std::span<const double> negative_scores,
                double negative_weight, double eps = kScoreEpsilon);
/// Scores every tuple with the critic. Requires
/// negatives.size() == positives.size() * critic.spec().n_negatives.
double rcd_loss(const Critic& critic, std::span<const RelationTuple> positives,
                std::span<const RelationTuple> negatives, NegativeWeighting weighting);

/// rho^2 * H(softmax(z_t / rho), softmax(z_s / rho)), batch mean.
ag::Var kd_loss(const ag::Var& student_logits, const Tensor& teacher_logits, double rho);
double kd_loss(const Eigen::VectorXd& teacher_logits, const Eigen::VectorXd& student_logits,
               double rho);

/// In arcface mode the input must be cosines from a normalized classifier head.
ag::Var cls_loss(const ag::Var& logits, std::span<const int> labels, ClsMode mode,
                 const ArcFaceParams& arcface = {});
double cls_loss(const Eigen::VectorXd& logits, int label, ClsMode mode,
                const ArcFaceParams& arcface = {});

ag::Var total_loss(const ag::Var& cls, const ag::Var& kd, const ag::Var& rcd, const LossWeights& w);
LossBreakdown total_loss(double cls, double kd, double rcd, const LossWeights& w);

std::string to_string(NegativeWeighting w);
std::string to_string(ClsMode m);
NegativeWeighting parse_negative_weighting(const std::string& s);
ClsMode parse_cls_mode(const std::string& s);

}  // namespace crrcd
