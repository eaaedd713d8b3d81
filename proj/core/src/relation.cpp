// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The CRRCD Authors.

#include "crrcd/relation.hpp"

#include "crrcd/error.hpp"

namespace crrcd {

RelationHead::RelationHead(RelationSpace space, RelationHeadSpec spec, Rng& rng)
    : space_(space),
      spec_(spec),
      anchor_map_(spec.embedding_dim, spec.hidden_dim, false, rng),
      other_map_(spec.embedding_dim, spec.hidden_dim, false, rng),
      out_map_(spec.hidden_dim, spec.relation_dim, true, rng) {}

ag::Var RelationHead::forward(const ag::Var& anchors, const ag::Var& others) const {
  CRRCD_REQUIRE(anchors.rows() == others.rows(), "relation head: row count mismatch");
  CRRCD_REQUIRE(anchors.cols() == spec_.embedding_dim && others.cols() == spec_.embedding_dim,
                "relation head: embedding dimension mismatch");
  return combine(project_anchor(anchors), project_other(others));
}

ag::Var RelationHead::combine(const ag::Var& anchor_proj, const ag::Var& other_proj) const {
  return out_map_.forward(ag::relu(ag::sub(anchor_proj, other_proj)));
}

ParameterList RelationHead::parameters() const {
  ParameterList out = with_prefix("anchor", anchor_map_.parameters());
  for (auto& p : with_prefix("other", other_map_.parameters())) out.push_back(std::move(p));
  for (auto& p : with_prefix("out", out_map_.parameters())) out.push_back(std::move(p));
  return out;
}

Tensor stack_embeddings(std::span<const Embedding> embeddings) {
  if (embeddings.empty()) return Tensor(0, 0);
  const Index dim = embeddings.front().values.size();
  Tensor out(static_cast<Index>(embeddings.size()), dim);
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    CRRCD_REQUIRE(embeddings[i].values.size() == dim, "stack_embeddings: ragged dimensions");
    out.row(static_cast<Index>(i)) = embeddings[i].values.transpose();
  }
  return out;
}

namespace {

void check_pair(const RelationHead& head, const Embedding& anchor, const Embedding& other) {
  CRRCD_REQUIRE(anchor.values.size() == head.spec().embedding_dim &&
                    other.values.size() == head.spec().embedding_dim,
                "relate: embedding dimension does not match the head");
  CRRCD_REQUIRE(anchor.values.allFinite() && other.values.allFinite(), "relate: non-finite embedding");
  CRRCD_REQUIRE(anchor.source == EmbeddingSource::teacher, "relate: anchor must be a teacher embedding");
  const auto expected = head.space() == RelationSpace::teacher_teacher ? EmbeddingSource::teacher
                                                                      : EmbeddingSource::student;
  CRRCD_REQUIRE(other.source == expected, "relate: partner embedding source does not match head space");
}

}  // namespace

std::vector<RelationVector> relate_batch(const RelationHead& head, std::span<const Embedding> anchors,
                                         std::span<const Embedding> others) {
  CRRCD_REQUIRE(anchors.size() == others.size(), "relate_batch: length mismatch");
  if (anchors.empty()) return {};
  for (std::size_t i = 0; i < anchors.size(); ++i) check_pair(head, anchors[i], others[i]);
  const ag::Var out =
      head.forward(ag::constant(stack_embeddings(anchors)), ag::constant(stack_embeddings(others)));
  std::vector<RelationVector> result;
  result.reserve(anchors.size());
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    result.push_back({out.value().row(static_cast<Index>(i)).transpose(), head.space(),
                      anchors[i].sample_id, others[i].sample_id});
  }
  return result;
}

RelationVector relate(const RelationHead& head, const Embedding& anchor, const Embedding& other) {
  return relate_batch(head, std::span(&anchor, 1), std::span(&other, 1)).front();
}

}  // namespace crrcd
