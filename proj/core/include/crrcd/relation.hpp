// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The CRRCD Authors.
//
// Relation heads. A head maps an (anchor, other) embedding pair to a relation
// vector:
//
//   v = W_out * relu(A * e_anchor - B * e_other) + b_out
//
// A and B are separate bias-free maps. The teacher/teacher head sees two
// teacher embeddings; the teacher/student head sees a teacher anchor and a
// student partner, which is where cross-resolution structure is captured.

#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "crrcd/autograd.hpp"
#include "crrcd/nn.hpp"

namespace crrcd {

enum class EmbeddingSource { teacher, student };

struct Embedding {
  Eigen::VectorXd values;
  EmbeddingSource source = EmbeddingSource::teacher;
  std::int64_t sample_id = 0;
  std::optional<int> label;
};

enum class RelationSpace { teacher_teacher, teacher_student };

struct RelationVector {
  Eigen::VectorXd values;
  RelationSpace space = RelationSpace::teacher_teacher;
  std::int64_t anchor_id = 0;
  std::int64_t other_id = 0;
};

struct RelationHeadSpec {
  Index embedding_dim = 512;
  Index hidden_dim = 128;
  Index relation_dim = 128;
};

class RelationHead {
 public:
  RelationHead(RelationSpace space, RelationHeadSpec spec, Rng& rng);

  /// Row i of the result relates anchors row i to others row i.
  ag::Var forward(const ag::Var& anchors, const ag::Var& others) const;

  // Split form for callers that reuse projections across many pairs:
  // forward(a, o) == combine(project_anchor(a), project_other(o)).
  ag::Var project_anchor(const ag::Var& anchors) const { return anchor_map_.forward(anchors); }
  ag::Var project_other(const ag::Var& others) const { return other_map_.forward(others); }
  ag::Var combine(const ag::Var& anchor_proj, const ag::Var& other_proj) const;

  RelationSpace space() const { return space_; }
  const RelationHeadSpec& spec() const { return spec_; }
  /// Names: anchor.weight, other.weight, out.weight, out.bias.
  ParameterList parameters() const;

 private:
  RelationSpace space_;
  RelationHeadSpec spec_;
  Linear anchor_map_;
  Linear other_map_;
  Linear out_map_;
};

RelationVector relate(const RelationHead& head, const Embedding& anchor, const Embedding& other);
std::vector<RelationVector> relate_batch(const RelationHead& head, std::span<const Embedding> anchors,
                                         std::span<const Embedding> others);

/// Stacks embedding values as rows.
Tensor stack_embeddings(std::span<const Embedding> embeddings);

}  // namespace crrcd
