// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The CRRCD Authors.

#include "crrcd/negatives.hpp"

#include <algorithm>
#include <map>

#include "crrcd/error.hpp"

namespace crrcd {

NegativeBank::NegativeBank(std::size_t capacity) : capacity_(capacity) {
  CRRCD_REQUIRE(capacity > 0, "negative bank capacity must be positive");
}

void NegativeBank::push(BankRecord record) {
  CRRCD_REQUIRE(record.teacher.allFinite() && record.student.allFinite(),
                "negative bank: non-finite embedding");
  record.insertion_step = pushes_++;
  if (records_.size() == capacity_) records_.pop_front();
  records_.push_back(std::move(record));
}

void NegativeBank::clear() { records_.clear(); }

std::vector<std::size_t> eligible_negatives(const NegativeBank& bank, const SamplingPolicy& policy,
                                            const SamplingAnchor& anchor) {
  std::vector<std::size_t> out;
  out.reserve(bank.size());
  if (policy.mode == SamplingMode::supervised) {
    CRRCD_REQUIRE(anchor.label.has_value(), "supervised sampling needs an anchor label");
    for (std::size_t i = 0; i < bank.size(); ++i) {
      const auto& label = bank[i].label;
      CRRCD_REQUIRE(label.has_value(), "supervised sampling over an unlabeled bank record");
      if (*label != *anchor.label) out.push_back(i);
    }
  } else {
    for (std::size_t i = 0; i < bank.size(); ++i) {
      if (bank[i].sample_id != anchor.sample_id) out.push_back(i);
    }
  }
  return out;
}

std::vector<std::size_t> sample_negatives(const NegativeBank& bank, const SamplingPolicy& policy,
                                          const SamplingAnchor& anchor, Rng& rng) {
  CRRCD_REQUIRE(policy.n >= 0, "sampling policy: n must be nonnegative");
  std::vector<std::size_t> pool = eligible_negatives(bank, policy, anchor);
  const auto n = static_cast<std::size_t>(policy.n);
  if (pool.size() < n) throw InsufficientNegatives(pool.size(), n);
  // Partial Fisher-Yates: the first n slots become a uniform n-subset.
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + uniform_index(rng, pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(n);
  return pool;
}

NegativeDraw sample_negatives_or_warmup(const NegativeBank& bank, const SamplingPolicy& policy,
                                        const SamplingAnchor& anchor, Rng& rng) {
  std::vector<std::size_t> pool = eligible_negatives(bank, policy, anchor);
  const auto n = static_cast<std::size_t>(policy.n);
  if (pool.size() >= n) return {sample_negatives(bank, policy, anchor, rng), false};
  NegativeDraw draw{{}, true};
  if (pool.empty()) return draw;
  draw.positions.reserve(n);
  for (std::size_t i = 0; i < n; ++i) draw.positions.push_back(pool[uniform_index(rng, pool.size())]);
  return draw;
}

TupleBatch build_tuple_batch(const RelationHead& teacher_head, const RelationHead& cross_head,
                             const ag::Var& anchor_teacher, const ag::Var& partner_teacher,
                             const ag::Var& partner_student, const NegativeBank& bank,
                             const std::vector<std::vector<std::size_t>>& negatives) {
  CRRCD_REQUIRE(teacher_head.space() == RelationSpace::teacher_teacher,
                "build_tuples: first head must be the teacher/teacher head");
  CRRCD_REQUIRE(cross_head.space() == RelationSpace::teacher_student,
                "build_tuples: second head must be the teacher/student head");
  const Index positives = anchor_teacher.rows();
  CRRCD_REQUIRE(partner_teacher.rows() == positives && partner_student.rows() == positives,
                "build_tuples: anchor/partner row count mismatch");
  CRRCD_REQUIRE(negatives.empty() || static_cast<Index>(negatives.size()) == positives,
                "build_tuples: need one negative list per positive");
  const std::size_t per = negatives.empty() ? 0 : negatives.front().size();
  for (const auto& list : negatives) {
    CRRCD_REQUIRE(list.size() == per, "build_tuples: ragged negative lists");
    for (std::size_t pos : list) CRRCD_REQUIRE(pos < bank.size(), "build_tuples: bank position out of range");
  }

  TupleBatch out;
  out.negatives_per_positive = static_cast<Index>(per);
  out.teacher_relations = teacher_head.forward(anchor_teacher, partner_teacher);
  const ag::Var anchor_proj = cross_head.project_anchor(anchor_teacher);
  out.positive_cross = cross_head.combine(anchor_proj, cross_head.project_other(partner_student));
  if (per == 0) return out;

  // Stored student embeddings enter as constants; only the head's maps get gradients.
  std::map<std::size_t, Index> row_of;
  for (const auto& list : negatives) {
    for (std::size_t pos : list) row_of.emplace(pos, 0);
  }
  Tensor stored(static_cast<Index>(row_of.size()), partner_student.cols());
  Index next = 0;
  for (auto& [pos, row] : row_of) {
    CRRCD_REQUIRE(bank[pos].student.size() == stored.cols(), "build_tuples: bank embedding dimension mismatch");
    row = next++;
    stored.row(row) = bank[pos].student.transpose();
  }
  const ag::Var stored_proj = cross_head.project_other(ag::constant(std::move(stored)));

  std::vector<Index> anchor_rows, bank_rows;
  anchor_rows.reserve(static_cast<std::size_t>(positives) * per);
  bank_rows.reserve(static_cast<std::size_t>(positives) * per);
  for (Index p = 0; p < positives; ++p) {
    for (std::size_t pos : negatives[static_cast<std::size_t>(p)]) {
      anchor_rows.push_back(p);
      bank_rows.push_back(row_of.at(pos));
    }
  }
  out.negative_cross = cross_head.combine(ag::gather_rows(anchor_proj, std::move(anchor_rows)),
                                          ag::gather_rows(stored_proj, std::move(bank_rows)));
  return out;
}

TupleScores score_tuples(const Critic& critic, const TupleBatch& tuples) {
  TupleScores out;
  const ag::Var teacher_units = critic.project_teacher(tuples.teacher_relations);
  out.positive = critic.score_projected(teacher_units, critic.project_cross(tuples.positive_cross));
  const Index positives = tuples.teacher_relations.rows();
  const Index per = tuples.negatives_per_positive;
  if (per == 0) {
    out.negative = ag::constant(Tensor(positives, 0));
    return out;
  }
  std::vector<Index> repeat;
  repeat.reserve(static_cast<std::size_t>(positives * per));
  for (Index p = 0; p < positives; ++p) {
    for (Index q = 0; q < per; ++q) repeat.push_back(p);
  }
  const ag::Var scores = critic.score_projected(ag::gather_rows(teacher_units, std::move(repeat)),
                                                critic.project_cross(tuples.negative_cross));
  out.negative = ag::reshape(scores, positives, per);
  return out;
}

namespace {

void require_source(std::span<const Embedding> list, EmbeddingSource source, const char* what) {
  for (const auto& e : list) CRRCD_REQUIRE(e.source == source, std::string("build_tuples: wrong source for ") + what);
}

}  // namespace

TupleSet build_tuples(const RelationHead& teacher_head, const RelationHead& cross_head,
                      std::span<const Embedding> anchors, std::span<const Embedding> partner_teacher,
                      std::span<const Embedding> partner_student, const NegativeBank& bank,
                      const std::vector<std::vector<std::size_t>>& negatives) {
  CRRCD_REQUIRE(anchors.size() == partner_teacher.size() && anchors.size() == partner_student.size(),
                "build_tuples: list length mismatch");
  require_source(anchors, EmbeddingSource::teacher, "anchors");
  require_source(partner_teacher, EmbeddingSource::teacher, "teacher partners");
  require_source(partner_student, EmbeddingSource::student, "student partners");
  for (std::size_t p = 0; p < negatives.size() && p < anchors.size(); ++p) {
    CRRCD_REQUIRE(partner_teacher[p].sample_id == partner_student[p].sample_id,
                  "build_tuples: partner views come from different samples");
    for (std::size_t pos : negatives[p]) {
      CRRCD_REQUIRE(pos < bank.size(), "build_tuples: bank position out of range");
      CRRCD_REQUIRE(bank[pos].sample_id != partner_student[p].sample_id,
                    "build_tuples: negative reuses the positive partner");
    }
  }
  TupleSet out;
  if (anchors.empty()) return out;

  const TupleBatch batch = build_tuple_batch(
      teacher_head, cross_head, ag::constant(stack_embeddings(anchors)),
      ag::constant(stack_embeddings(partner_teacher)), ag::constant(stack_embeddings(partner_student)),
      bank, negatives);
  const std::size_t per = static_cast<std::size_t>(batch.negatives_per_positive);
  for (std::size_t p = 0; p < anchors.size(); ++p) {
    const auto row = static_cast<Index>(p);
    RelationVector vt{batch.teacher_relations.value().row(row).transpose(), RelationSpace::teacher_teacher,
                      anchors[p].sample_id, partner_teacher[p].sample_id};
    out.positives.push_back({vt,
                             {batch.positive_cross.value().row(row).transpose(),
                              RelationSpace::teacher_student, anchors[p].sample_id,
                              partner_student[p].sample_id},
                             true});
    for (std::size_t q = 0; q < per; ++q) {
      const auto nrow = static_cast<Index>(p * per + q);
      out.negatives.push_back({vt,
                               {batch.negative_cross.value().row(nrow).transpose(),
                                RelationSpace::teacher_student, anchors[p].sample_id,
                                bank[negatives[p][q]].sample_id},
                               false});
    }
  }
  return out;
}

std::string to_string(SamplingMode m) { return m == SamplingMode::supervised ? "supervised" : "unsupervised"; }

SamplingMode parse_sampling_mode(const std::string& s) {
  if (s == "supervised") return SamplingMode::supervised;
  if (s == "unsupervised") return SamplingMode::unsupervised;
  throw ContractViolation("unknown sampling mode '" + s + "'");
}

}  // namespace crrcd
