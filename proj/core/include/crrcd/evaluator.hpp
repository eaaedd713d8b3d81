// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The CRRCD Authors.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "crrcd/autograd.hpp"
#include "crrcd/data.hpp"
#include "crrcd/model.hpp"

namespace crrcd {

inline constexpr int kHistogramBins = 100;

/// Fraction of rows whose argmax (lowest index on ties) equals the label.
double top1(const Tensor& logits, std::span<const int> labels);
double top1(const Model& model, const Dataset& dataset);

struct ThresholdChoice {
  double threshold = 0.0;
  double accuracy = 0.0;
};

/// Candidate thresholds for a pair sweep: one below the smallest score, the
/// midpoints between consecutive distinct scores, and the largest score.
std::vector<double> threshold_candidates(std::span<const double> scores);

/// Best accuracy of the rule "same iff score > threshold" over the candidates;
/// ties go to the lowest threshold.
ThresholdChoice best_threshold(std::span<const double> scores, std::span<const int> same);

/// Normalized counts over `bins` equal bins on [-1, 1].
std::vector<double> score_histogram(std::span<const double> scores, int bins = kHistogramBins);
/// Sum of bin-wise minima of two normalized histograms.
double histogram_intersection(std::span<const double> a, std::span<const double> b, int bins = kHistogramBins);

struct VerificationReport {
  double accuracy = 0.0;
  double threshold = 0.0;
  std::vector<double> scores;
  std::vector<int> same;
  double margin = 0.0;        // mean positive score - mean negative score
  double intersection = 0.0;  // histogram intersection of the two score sets
};

/// Scores must contain at least one positive and one negative pair.
VerificationReport verify_scores(std::vector<double> scores, std::vector<int> same);

double cosine_similarity(const Eigen::Ref<const Eigen::RowVectorXd>& a, const Eigen::Ref<const Eigen::RowVectorXd>& b);

/// Resolves pair ids against the dataset; an unknown id is a ContractViolation.
VerificationReport verify_pairs(const Model& model, const Dataset& dataset, std::span<const PairSpec> pairs);

struct ProbeConfig {
  int epochs = 10;
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  int batch_size = 96;
  std::uint64_t seed = 5;
};

/// Retrains a linear softmax layer on frozen features and reports test top-1.
/// Features are standardized with training-split statistics first.
double linear_probe(const Tensor& train_features, std::span<const int> train_labels, const Tensor& test_features,
                    std::span<const int> test_labels, int classes, const ProbeConfig& config = {});
double linear_probe(const Model& model, const Dataset& train, const Dataset& test, const ProbeConfig& config = {});

struct RetrievalReport {
  std::vector<int> ks;
  std::vector<double> accuracy;  // rank-k accuracy, aligned with ks
};

/// Probes rank the gallery by cosine similarity (descending, ties by gallery
/// index); rank-k counts a hit when a same-label item is in the first k.
RetrievalReport retrieve(const Tensor& gallery, std::span<const int> gallery_labels, const Tensor& probes,
                         std::span<const int> probe_labels, std::vector<int> ks = {1, 10, 20});
RetrievalReport retrieve(const Model& model, const Dataset& gallery, const Dataset& probes,
                         std::vector<int> ks = {1, 10, 20});

struct EmbeddingTable {
  std::vector<std::int64_t> sample_ids;
  std::vector<int> labels;
  Tensor values;
};

/// CSV: sample_id,label,e0..e{d-1}; one row per sample.
void export_embeddings(const Model& model, const Dataset& dataset, const std::filesystem::path& path);
void write_embeddings_csv(const std::filesystem::path& path, const EmbeddingTable& table);
EmbeddingTable read_embeddings_csv(const std::filesystem::path& path);

using Report = std::vector<std::pair<std::string, std::string>>;
/// `key: value` lines.
std::string format_report(const Report& report);
Report parse_report(const std::string& text);
Report verification_report(const VerificationReport& v);
Report retrieval_report(const RetrievalReport& r);
/// id_a,id_b,same,score rows for external plotting.
void write_pair_scores_csv(const std::filesystem::path& path, std::span<const PairSpec> pairs,
                           const VerificationReport& report);

}  // namespace crrcd
