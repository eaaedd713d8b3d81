// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The CRRCD Authors.

#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crrcd/autograd.hpp"
#include "crrcd/losses.hpp"
#include "crrcd/relation.hpp"
#include "crrcd/rng.hpp"

namespace crrcd {

struct BankRecord {
  Eigen::VectorXd teacher;
  Eigen::VectorXd student;
  std::optional<int> label;
  std::int64_t sample_id = 0;
  std::int64_t insertion_step = 0;  // assigned by the bank
};

/// Fixed-capacity FIFO of recent (teacher, student) embedding pairs. Pushing
/// into a full bank evicts the oldest record. Index 0 is the oldest record.
class NegativeBank {
 public:
  explicit NegativeBank(std::size_t capacity);

  void push(BankRecord record);

  std::size_t size() const { return records_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::int64_t total_pushes() const { return pushes_; }
  const BankRecord& operator[](std::size_t i) const { return records_[i]; }
  const std::deque<BankRecord>& records() const { return records_; }
  void clear();

 private:
  std::size_t capacity_;
  std::int64_t pushes_ = 0;
  std::deque<BankRecord> records_;
};

enum class SamplingMode { unsupervised, supervised };

struct SamplingPolicy {
  SamplingMode mode = SamplingMode::supervised;
  int n = 512;
};

/// Identity of the sample whose negatives are being drawn.
struct SamplingAnchor {
  std::int64_t sample_id = 0;
  std::optional<int> label;
};

/// Bank positions a negative may be drawn from: id != anchor id
/// (unsupervised) or label != anchor label (supervised).
std::vector<std::size_t> eligible_negatives(const NegativeBank& bank, const SamplingPolicy& policy,
                                            const SamplingAnchor& anchor);

/// n distinct eligible bank positions, uniform without replacement.
/// Throws InsufficientNegatives when fewer than n are eligible.
std::vector<std::size_t> sample_negatives(const NegativeBank& bank, const SamplingPolicy& policy,
                                          const SamplingAnchor& anchor, Rng& rng);

struct NegativeDraw {
  std::vector<std::size_t> positions;  // empty only if nothing is eligible
  bool warmup = false;
};

/// sample_negatives, except that a pool smaller than n is sampled with
/// replacement and the draw is flagged as warm-up.
NegativeDraw sample_negatives_or_warmup(const NegativeBank& bank, const SamplingPolicy& policy,
                                        const SamplingAnchor& anchor, Rng& rng);

/// Graph form of the tuple construction for P positives with K negatives each.
/// Positive p pairs v_t(anchor p, partner p) with v_ts(anchor p, partner p);
/// negative (p, q) pairs the same v_t with v_ts(anchor p, bank[neg[p][q]]).
struct TupleBatch {
  ag::Var teacher_relations;  // P x d_r
  ag::Var positive_cross;     // P x d_r
  ag::Var negative_cross;     // (P*K) x d_r, row p*K + q; empty when K == 0
  Index negatives_per_positive = 0;
};

TupleBatch build_tuple_batch(const RelationHead& teacher_head, const RelationHead& cross_head,
                             const ag::Var& anchor_teacher, const ag::Var& partner_teacher,
                             const ag::Var& partner_student, const NegativeBank& bank,
                             const std::vector<std::vector<std::size_t>>& negatives);

/// Critic scores for a tuple batch: positives P x 1, negatives P x K.
struct TupleScores {
  ag::Var positive;
  ag::Var negative;
};
TupleScores score_tuples(const Critic& critic, const TupleBatch& tuples);

struct TupleSet {
  std::vector<RelationTuple> positives;
  std::vector<RelationTuple> negatives;  // grouped by positive, K per positive
};

/// Value form of build_tuple_batch. Refuses negatives that reuse the
/// positive partner's sample id.
TupleSet build_tuples(const RelationHead& teacher_head, const RelationHead& cross_head,
                      std::span<const Embedding> anchors, std::span<const Embedding> partner_teacher,
                      std::span<const Embedding> partner_student, const NegativeBank& bank,
                      const std::vector<std::vector<std::size_t>>& negatives);

std::string to_string(SamplingMode m);
SamplingMode parse_sampling_mode(const std::string& s);

}  // namespace crrcd
