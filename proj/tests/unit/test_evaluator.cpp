// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The CRRCD Authors.

#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>

#include "crrcd/error.hpp"
#include "crrcd/evaluator.hpp"
#include "crrcd/hash.hpp"
#include "helpers.hpp"

namespace crrcd {
namespace {

using testing::random_tensor;
using testing::to_mat;

TEST(Top1, ArgmaxWithLowestIndexTies) {
  Tensor logits(3, 3);
  logits << 1, 1, 0,  //
      0, 2, 2,        //
      5, 0, 0;
  const std::vector<int> labels{0, 1, 1};
  EXPECT_DOUBLE_EQ(top1(logits, labels), 2.0 / 3.0);
  EXPECT_THROW(top1(Tensor(0, 3), std::vector<int>{}), ContractViolation);
}

TEST(Top1, ConstantOutputIsChance) {
  const Tensor logits = Tensor::Zero(40, 4);
  std::vector<int> labels;
  for (int i = 0; i < 40; ++i) labels.push_back(i % 4);
  EXPECT_DOUBLE_EQ(top1(logits, labels), 0.25);
}

TEST(Top1, MatchesLoopOracle) {
  Rng rng = make_rng(1, 0);
  const Tensor logits = random_tensor(rng, 200, 7);
  std::vector<int> labels;
  for (int i = 0; i < 200; ++i) labels.push_back(static_cast<int>(uniform_index(rng, 7)));
  EXPECT_EQ(top1(logits, labels), testing::top1_oracle(to_mat(logits), labels));
}

TEST(Verify, SeparableToyScores) {
  const VerificationReport r = verify_scores({0.9, 0.8, 0.1, 0.2}, {1, 1, 0, 0});
  EXPECT_DOUBLE_EQ(r.accuracy, 1.0);
  EXPECT_NEAR(r.margin, 0.7, 1e-12);
  EXPECT_GT(r.threshold, 0.2);
  EXPECT_LT(r.threshold, 0.8);
  EXPECT_DOUBLE_EQ(r.intersection, 0.0);
}

TEST(Verify, IndistinguishableDistributions) {
  const std::vector<double> s{0.1, 0.4, 0.7, 0.2};
  std::vector<double> scores = s;
  scores.insert(scores.end(), s.begin(), s.end());
  const VerificationReport r = verify_scores(scores, {1, 1, 1, 1, 0, 0, 0, 0});
  EXPECT_DOUBLE_EQ(r.accuracy, 0.5);
  EXPECT_DOUBLE_EQ(r.intersection, 1.0);
  EXPECT_DOUBLE_EQ(r.margin, 0.0);
}

TEST(Verify, SweepMatchesExhaustiveSearch) {
  Rng rng = make_rng(2, 0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> scores(100);
    std::vector<int> same(100);
    for (int i = 0; i < 100; ++i) {
      same[i] = i % 2;
      scores[i] = std::round(uniform(rng, -1.0, 1.0) * 50.0) / 50.0 + (same[i] ? 0.2 : 0.0);
    }
    const ThresholdChoice got = best_threshold(scores, same);
    const auto expect = testing::exhaustive_threshold(scores, same);
    EXPECT_EQ(got.accuracy, expect.accuracy);
    for (double s : scores) EXPECT_EQ(s > got.threshold, s > expect.threshold);
  }
}

TEST(Verify, TiesGoToLowestThreshold) {
  const ThresholdChoice t = best_threshold(std::vector<double>{0.1, 0.5, 0.9}, std::vector<int>{0, 1, 0});
  EXPECT_DOUBLE_EQ(t.accuracy, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(t.threshold, 0.3);
}

TEST(Verify, HistogramProperties) {
  const std::vector<double> a{-1.0, -0.5, 0.0, 0.99, 1.0};
  const std::vector<double> b{0.2, 0.3};
  const auto h = score_histogram(a);
  EXPECT_EQ(h.size(), 100u);
  double total = 0.0;
  for (double v : h) total += v;
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(histogram_intersection(a, b), histogram_intersection(b, a));
  EXPECT_DOUBLE_EQ(histogram_intersection(a, a), 1.0);
  EXPECT_DOUBLE_EQ(histogram_intersection(std::vector<double>{-0.9}, std::vector<double>{0.9}), 0.0);
}

TEST(Verify, ScaleInvariantAndNamedErrors) {
  Rng rng = make_rng(3, 0);
  const Tensor e = random_tensor(rng, 2, 5);
  EXPECT_NEAR(cosine_similarity(e.row(0), e.row(1)), cosine_similarity(3.0 * e.row(0), 0.5 * e.row(1)), 1e-15);
  EXPECT_THROW(cosine_similarity(e.row(0), Eigen::RowVectorXd::Zero(5)), ContractViolation);
  EXPECT_THROW(verify_scores({0.5}, {1}), ContractViolation);
}

TEST(Verify, PairsOnModelAndUnknownIds) {
  const Dataset data = testing::synthetic_dataset(3, 4, 5);
  Rng rng = make_rng(4, 0);
  BackboneSpec spec;
  spec.height = spec.width = 32;
  spec.embedding_dim = 8;
  spec.classes = 3;
  const Model model(spec, ModelRole::teacher, StudentInput::native, rng);
  const auto pairs = make_pairs(data.samples, 10, 5);
  const VerificationReport r = verify_pairs(model, data, pairs);
  EXPECT_EQ(r.scores.size(), 10u);
  const std::vector<PairSpec> bad{{0, 999, true}, {1, 2, false}};
  EXPECT_THROW(verify_pairs(model, data, bad), ContractViolation);
}

TEST(Probe, OneHotFeaturesAreSeparable) {
  const int classes = 5, n = 100;
  Tensor f = Tensor::Zero(n, classes);
  std::vector<int> labels;
  for (int i = 0; i < n; ++i) {
    labels.push_back(i % classes);
    f(i, i % classes) = 1.0;
  }
  EXPECT_DOUBLE_EQ(linear_probe(f, labels, f, labels, classes), 1.0);
  std::vector<int> bad = labels;
  bad[0] = classes;
  EXPECT_THROW(linear_probe(f, bad, f, labels, classes), ContractViolation);
}

TEST(Probe, RandomFeaturesNearChance) {
  Rng rng = make_rng(5, 0);
  const int classes = 4;
  const Tensor train = random_tensor(rng, 400, 8), test = random_tensor(rng, 2000, 8);
  std::vector<int> ytr, yte;
  for (int i = 0; i < 400; ++i) ytr.push_back(static_cast<int>(uniform_index(rng, classes)));
  for (int i = 0; i < 2000; ++i) yte.push_back(static_cast<int>(uniform_index(rng, classes)));
  const double acc = linear_probe(train, ytr, test, yte, classes);
  EXPECT_NEAR(acc, 0.25, 0.05);
}

TEST(Probe, AtLeastNearestCentroid) {
  Rng rng = make_rng(6, 0);
  const int classes = 4, dim = 6;
  const Tensor centers = random_tensor(rng, classes, dim, 1.5);
  auto draw = [&](int n, std::vector<int>& y) {
    Tensor f(n, dim);
    for (int i = 0; i < n; ++i) {
      y.push_back(i % classes);
      f.row(i) = centers.row(i % classes) + random_tensor(rng, 1, dim);
    }
    return f;
  };
  std::vector<int> ytr, yte;
  const Tensor train = draw(400, ytr), test = draw(400, yte);
  Tensor centroid = Tensor::Zero(classes, dim);
  for (int i = 0; i < 400; ++i) centroid.row(ytr[i]) += train.row(i) / 100.0;
  int correct = 0;
  for (int i = 0; i < 400; ++i) {
    Index best;
    (centroid.rowwise() - test.row(i)).rowwise().squaredNorm().minCoeff(&best);
    correct += best == yte[i];
  }
  EXPECT_GE(linear_probe(train, ytr, test, yte, classes) + 0.02, correct / 400.0);
}

TEST(Retrieve, SelfMatchAndFullDepth) {
  Rng rng = make_rng(7, 0);
  const Tensor gallery = random_tensor(rng, 10, 4);
  std::vector<int> labels{0, 1, 2, 3, 4, 0, 1, 2, 3, 4};
  const RetrievalReport self = retrieve(gallery, labels, gallery, labels, {1, 10});
  EXPECT_DOUBLE_EQ(self.accuracy[0], 1.0);
  const Tensor probes = random_tensor(rng, 7, 4);
  const std::vector<int> plabels{0, 1, 2, 3, 4, 0, 1};
  EXPECT_DOUBLE_EQ(retrieve(gallery, labels, probes, plabels, {10}).accuracy[0], 1.0);
  EXPECT_THROW(retrieve(Tensor(0, 4), {}, probes, plabels), ContractViolation);
}

TEST(Retrieve, MatchesLoopOracleAndIsMonotone) {
  Rng rng = make_rng(8, 0);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor gallery = random_tensor(rng, 50, 6);
    gallery.row(7) = gallery.row(3);
    gallery.row(20) = 2.0 * gallery.row(11);
    const Tensor probes = random_tensor(rng, 50, 6);
    std::vector<int> gl, pl;
    for (int i = 0; i < 50; ++i) {
      gl.push_back(static_cast<int>(uniform_index(rng, 10)));
      pl.push_back(static_cast<int>(uniform_index(rng, 10)));
    }
    const std::vector<int> ks{1, 5, 10, 20};
    const RetrievalReport got = retrieve(gallery, gl, probes, pl, ks);
    EXPECT_EQ(got.accuracy, testing::retrieval_oracle(to_mat(gallery), gl, to_mat(probes), pl, ks));
    for (std::size_t k = 1; k < ks.size(); ++k) EXPECT_LE(got.accuracy[k - 1], got.accuracy[k]);
  }
}

TEST(Export, RoundTripAndCounts) {
  testing::TempDir dir("export");
  const Dataset data = testing::synthetic_dataset(2, 5, 5);
  Rng rng = make_rng(9, 0);
  BackboneSpec spec;
  spec.height = spec.width = 32;
  spec.embedding_dim = 4;
  spec.classes = 2;
  const Model model(spec, ModelRole::teacher, StudentInput::native, rng);
  export_embeddings(model, data, dir / "e.csv");
  const EmbeddingTable t = read_embeddings_csv(dir / "e.csv");
  ASSERT_EQ(t.sample_ids.size(), 10u);
  const Tensor expect = model.predict(data.samples).embeddings;
  EXPECT_LT((t.values - expect).cwiseAbs().maxCoeff(), 1e-6);
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_EQ(t.sample_ids[i], data.samples[i].sample_id);
    EXPECT_EQ(t.labels[i], data.samples[i].label);
  }

  Dataset empty = data;
  empty.samples.clear();
  export_embeddings(model, empty, dir / "empty.csv");
  const std::string text = read_file(dir / "empty.csv");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1);
}

TEST(Export, ThousandRows) {
  testing::TempDir dir("export_big");
  EmbeddingTable t;
  Rng rng = make_rng(10, 0);
  t.values = random_tensor(rng, 1000, 3);
  for (int i = 0; i < 1000; ++i) {
    t.sample_ids.push_back(i);
    t.labels.push_back(i % 7);
  }
  write_embeddings_csv(dir / "e.csv", t);
  const EmbeddingTable back = read_embeddings_csv(dir / "e.csv");
  EXPECT_EQ(back.sample_ids.size(), 1000u);
  EXPECT_LT((back.values - t.values).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Report, FormatParseRoundTrip) {
  const Report r{{"protocol", "verify"}, {"accuracy", "0.75"}};
  EXPECT_EQ(parse_report(format_report(r)), r);
  const VerificationReport v = verify_scores({0.9, 0.1}, {1, 0});
  const Report vr = verification_report(v);
  EXPECT_TRUE(std::any_of(vr.begin(), vr.end(), [](const auto& kv) { return kv.first == "expectation_margin"; }));
  EXPECT_THROW(parse_report("no separator\n"), ParseError);
}

}  // namespace
}  // namespace crrcd
