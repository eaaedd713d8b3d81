// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The CRRCD Authors.

#include "crrcd/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "crrcd/error.hpp"
#include "crrcd/hash.hpp"
#include "crrcd/nn.hpp"

namespace crrcd {

namespace {

std::vector<int> labels_of(const Dataset& d) {
  std::vector<int> out;
  out.reserve(d.size());
  for (const auto& s : d.samples) out.push_back(s.label);
  return out;
}

Index argmax_row(const Tensor& m, Index r) {
  Index best = 0;
  for (Index c = 1; c < m.cols(); ++c) {
    if (m(r, c) > m(r, best)) best = c;
  }
  return best;
}

}  // namespace

double top1(const Tensor& logits, std::span<const int> labels) {
  CRRCD_REQUIRE(logits.rows() > 0, "top1: empty dataset");
  CRRCD_REQUIRE(static_cast<std::size_t>(logits.rows()) == labels.size(), "top1: label count mismatch");
  std::size_t hits = 0;
  for (Index r = 0; r < logits.rows(); ++r) {
    if (argmax_row(logits, r) == labels[static_cast<std::size_t>(r)]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double top1(const Model& model, const Dataset& dataset) {
  CRRCD_REQUIRE(dataset.size() > 0, "top1: empty dataset");
  return top1(model.predict(dataset.samples).logits, labels_of(dataset));
}

std::vector<double> threshold_candidates(std::span<const double> scores) {
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::vector<double> out;
  if (sorted.empty()) return out;
  out.push_back(sorted.front() - 1.0);
  for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
    const double mid = std::midpoint(sorted[i], sorted[i + 1]);
    out.push_back(mid < sorted[i + 1] ? mid : sorted[i]);
  }
  out.push_back(sorted.back());
  return out;
}

ThresholdChoice best_threshold(std::span<const double> scores, std::span<const int> same) {
  CRRCD_REQUIRE(!scores.empty(), "best_threshold: no scores");
  CRRCD_REQUIRE(scores.size() == same.size(), "best_threshold: label count mismatch");
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Sweep thresholds upward; correct = positives above t + negatives at or below t.
  const std::size_t n = scores.size();
  std::size_t positives_above = static_cast<std::size_t>(std::count_if(same.begin(), same.end(), [](int s) { return s != 0; }));
  std::size_t negatives_below = 0;
  const std::vector<double> candidates = threshold_candidates(scores);
  ThresholdChoice best{candidates.front(), static_cast<double>(positives_above) / static_cast<double>(n)};
  std::size_t best_correct = positives_above;
  std::size_t next = 0;
  for (std::size_t c = 1; c < candidates.size(); ++c) {
    const double t = candidates[c];
    while (next < n && scores[idx[next]] <= t) {
      if (same[idx[next]] != 0) --positives_above;
      else ++negatives_below;
      ++next;
    }
    const std::size_t correct = positives_above + negatives_below;
    if (correct > best_correct) {
      best_correct = correct;
      best = {t, static_cast<double>(correct) / static_cast<double>(n)};
    }
  }
  return best;
}

std::vector<double> score_histogram(std::span<const double> scores, int bins) {
  CRRCD_REQUIRE(bins > 0, "score_histogram: bins must be positive");
  std::vector<double> h(static_cast<std::size_t>(bins), 0.0);
  if (scores.empty()) return h;
  for (double s : scores) {
    const double pos = (std::clamp(s, -1.0, 1.0) + 1.0) / 2.0 * bins;
    const int b = std::min(bins - 1, static_cast<int>(std::floor(pos)));
    h[static_cast<std::size_t>(b)] += 1.0;
  }
  for (double& v : h) v /= static_cast<double>(scores.size());
  return h;
}

double histogram_intersection(std::span<const double> a, std::span<const double> b, int bins) {
  const auto ha = score_histogram(a, bins);
  const auto hb = score_histogram(b, bins);
  double total = 0.0;
  for (std::size_t i = 0; i < ha.size(); ++i) total += std::min(ha[i], hb[i]);
  return total;
}

VerificationReport verify_scores(std::vector<double> scores, std::vector<int> same) {
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i < scores.size(); ++i) (same.at(i) ? pos : neg).push_back(scores[i]);
  CRRCD_REQUIRE(!pos.empty() && !neg.empty(), "verify_scores: need positive and negative pairs");
  VerificationReport r;
  const ThresholdChoice choice = best_threshold(scores, same);
  r.accuracy = choice.accuracy;
  r.threshold = choice.threshold;
  const auto mean = [](const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  r.margin = mean(pos) - mean(neg);
  r.intersection = histogram_intersection(pos, neg);
  r.scores = std::move(scores);
  r.same = std::move(same);
  return r;
}

double cosine_similarity(const Eigen::Ref<const Eigen::RowVectorXd>& a, const Eigen::Ref<const Eigen::RowVectorXd>& b) {
  const double na = a.norm();
  const double nb = b.norm();
  CRRCD_REQUIRE(na > 0.0 && nb > 0.0, "cosine_similarity: zero embedding");
  return a.dot(b) / (na * nb);
}

VerificationReport verify_pairs(const Model& model, const Dataset& dataset, std::span<const PairSpec> pairs) {
  std::map<std::int64_t, Index> row_of;
  for (std::size_t i = 0; i < dataset.size(); ++i) row_of.emplace(dataset.samples[i].sample_id, static_cast<Index>(i));
  const auto lookup = [&](std::int64_t id) {
    auto it = row_of.find(id);
    CRRCD_REQUIRE(it != row_of.end(), fmt::format("verify_pairs: sample id {} is not in the dataset", id));
    return it->second;
  };
  std::vector<Index> a_rows, b_rows;
  for (const auto& p : pairs) {
    a_rows.push_back(lookup(p.id_a));
    b_rows.push_back(lookup(p.id_b));
  }
  const Tensor emb = model.predict(dataset.samples).embeddings;
  std::vector<double> scores;
  std::vector<int> same;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    scores.push_back(cosine_similarity(emb.row(a_rows[i]), emb.row(b_rows[i])));
    same.push_back(pairs[i].same ? 1 : 0);
  }
  return verify_scores(std::move(scores), std::move(same));
}

double linear_probe(const Tensor& train_features, std::span<const int> train_labels, const Tensor& test_features,
                    std::span<const int> test_labels, int classes, const ProbeConfig& config) {
  CRRCD_REQUIRE(train_features.rows() > 0 && test_features.rows() > 0, "linear_probe: empty split");
  CRRCD_REQUIRE(train_features.cols() == test_features.cols(), "linear_probe: feature dims differ");
  CRRCD_REQUIRE(static_cast<std::size_t>(train_features.rows()) == train_labels.size() &&
                    static_cast<std::size_t>(test_features.rows()) == test_labels.size(),
                "linear_probe: label count mismatch");
  for (int l : train_labels) CRRCD_REQUIRE(l >= 0 && l < classes, "linear_probe: train label outside class range");
  for (int l : test_labels) CRRCD_REQUIRE(l >= 0 && l < classes, "linear_probe: test label outside class range");

  const Eigen::RowVectorXd mu = train_features.colwise().mean();
  Eigen::RowVectorXd sd = ((train_features.rowwise() - mu).array().square().colwise().mean()).sqrt();
  for (Index c = 0; c < sd.size(); ++c) {
    if (!(sd(c) > 1e-12)) sd(c) = 1.0;
  }
  const auto standardize = [&](const Tensor& x) -> Tensor {
    return ((x.rowwise() - mu).array().rowwise() / sd.array()).matrix();
  };
  const Tensor xtr = standardize(train_features);
  const Tensor xte = standardize(test_features);

  Rng rng = make_rng(config.seed, 0x9000);
  Linear head(xtr.cols(), classes, true, rng);
  Sgd sgd(head.parameters(), {config.momentum, config.weight_decay});
  std::vector<Index> order(static_cast<std::size_t>(xtr.rows()));
  std::iota(order.begin(), order.end(), Index{0});
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(config.batch_size));
      Tensor xb(static_cast<Index>(end - begin), xtr.cols());
      std::vector<int> yb;
      for (std::size_t k = begin; k < end; ++k) {
        xb.row(static_cast<Index>(k - begin)) = xtr.row(order[k]);
        yb.push_back(train_labels[static_cast<std::size_t>(order[k])]);
      }
      const ag::Var loss = ag::cross_entropy(head.forward(ag::constant(std::move(xb))), yb);
      sgd.zero_grad();
      loss.backward();
      sgd.step(config.lr);
    }
  }
  return top1(head.forward(ag::constant(xte)).value(), test_labels);
}

double linear_probe(const Model& model, const Dataset& train, const Dataset& test, const ProbeConfig& config) {
  CRRCD_REQUIRE(train.manifest.classes == test.manifest.classes, "linear_probe: class count differs between splits");
  return linear_probe(model.predict(train.samples).embeddings, labels_of(train), model.predict(test.samples).embeddings,
                      labels_of(test), train.manifest.classes, config);
}

RetrievalReport retrieve(const Tensor& gallery, std::span<const int> gallery_labels, const Tensor& probes,
                         std::span<const int> probe_labels, std::vector<int> ks) {
  CRRCD_REQUIRE(gallery.rows() > 0, "retrieve: empty gallery");
  CRRCD_REQUIRE(probes.rows() > 0, "retrieve: no probes");
  CRRCD_REQUIRE(gallery.cols() == probes.cols(), "retrieve: embedding dims differ");
  CRRCD_REQUIRE(static_cast<std::size_t>(gallery.rows()) == gallery_labels.size() &&
                    static_cast<std::size_t>(probes.rows()) == probe_labels.size(),
                "retrieve: label count mismatch");
  for (int k : ks) CRRCD_REQUIRE(k >= 1, "retrieve: k must be at least 1");

  const auto m = static_cast<std::size_t>(gallery.rows());
  // first_hit[p] = 0-based rank of the best same-label gallery item, or m if none.
  std::vector<std::size_t> first_hit(static_cast<std::size_t>(probes.rows()), m);
  std::vector<double> score(m);
  std::vector<std::size_t> rank(m);
  for (Index p = 0; p < probes.rows(); ++p) {
    for (std::size_t g = 0; g < m; ++g) score[g] = cosine_similarity(probes.row(p), gallery.row(static_cast<Index>(g)));
    std::iota(rank.begin(), rank.end(), std::size_t{0});
    std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
    for (std::size_t r = 0; r < m; ++r) {
      if (gallery_labels[rank[r]] == probe_labels[static_cast<std::size_t>(p)]) {
        first_hit[static_cast<std::size_t>(p)] = r;
        break;
      }
    }
  }
  RetrievalReport report;
  report.ks = std::move(ks);
  for (int k : report.ks) {
    const auto hits = std::count_if(first_hit.begin(), first_hit.end(),
                                    [k, m](std::size_t r) { return r < m && r < static_cast<std::size_t>(k); });
    report.accuracy.push_back(static_cast<double>(hits) / static_cast<double>(first_hit.size()));
  }
  return report;
}

RetrievalReport retrieve(const Model& model, const Dataset& gallery, const Dataset& probes, std::vector<int> ks) {
  CRRCD_REQUIRE(gallery.size() > 0, "retrieve: empty gallery");
  return retrieve(model.predict(gallery.samples).embeddings, labels_of(gallery), model.predict(probes.samples).embeddings,
                  labels_of(probes), std::move(ks));
}

void write_embeddings_csv(const std::filesystem::path& path, const EmbeddingTable& table) {
  std::string out = "sample_id,label";
  for (Index c = 0; c < table.values.cols(); ++c) out += fmt::format(",e{}", c);
  out += "\n";
  for (std::size_t i = 0; i < table.sample_ids.size(); ++i) {
    out += fmt::format("{},{}", table.sample_ids[i], table.labels[i]);
    for (Index c = 0; c < table.values.cols(); ++c) out += fmt::format(",{}", table.values(static_cast<Index>(i), c));
    out += "\n";
  }
  write_file(path, out);
}

void export_embeddings(const Model& model, const Dataset& dataset, const std::filesystem::path& path) {
  EmbeddingTable table;
  for (const auto& s : dataset.samples) {
    table.sample_ids.push_back(s.sample_id);
    table.labels.push_back(s.label);
  }
  table.values = dataset.size() > 0 ? model.predict(dataset.samples).embeddings
                                    : Tensor(0, model.spec().embedding_dim);
  write_embeddings_csv(path, table);
}

EmbeddingTable read_embeddings_csv(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || !line.starts_with("sample_id,label")) {
    throw ParseError(path.string(), 1, "missing embeddings header");
  }
  const auto dims = static_cast<Index>(std::count(line.begin(), line.end(), ',') - 1);
  std::vector<std::vector<double>> rows;
  EmbeddingTable t;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream row(line);
    for (std::string cell; std::getline(row, cell, ',');) f.push_back(cell);
    if (static_cast<Index>(f.size()) != dims + 2) throw ParseError(path.string(), lineno, "wrong field count");
    try {
      t.sample_ids.push_back(std::stoll(f[0]));
      t.labels.push_back(std::stoi(f[1]));
      std::vector<double> v;
      for (std::size_t c = 2; c < f.size(); ++c) v.push_back(std::stod(f[c]));
      rows.push_back(std::move(v));
    } catch (const std::logic_error&) {
      throw ParseError(path.string(), lineno, "malformed number");
    }
  }
  t.values.resize(static_cast<Index>(rows.size()), dims);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (Index c = 0; c < dims; ++c) t.values(static_cast<Index>(r), c) = rows[r][static_cast<std::size_t>(c)];
  }
  return t;
}

std::string format_report(const Report& report) {
  std::string out;
  for (const auto& [k, v] : report) out += k + ": " + v + "\n";
  return out;
}

Report parse_report(const std::string& text) {
  Report out;
  std::istringstream in(text);
  std::size_t lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    if (line.empty()) continue;
    const auto sep = line.find(": ");
    if (sep == std::string::npos) throw ParseError("report", lineno, "expected `key: value`");
    out.emplace_back(line.substr(0, sep), line.substr(sep + 2));
  }
  return out;
}

Report verification_report(const VerificationReport& v) {
  const auto positives = std::count(v.same.begin(), v.same.end(), 1);
  return {{"protocol", "verify"},
          {"pairs", fmt::format("{}", v.scores.size())},
          {"positive_pairs", fmt::format("{}", positives)},
          {"accuracy", fmt::format("{}", v.accuracy)},
          {"threshold", fmt::format("{}", v.threshold)},
          {"expectation_margin", fmt::format("{}", v.margin)},
          {"histogram_intersection", fmt::format("{}", v.intersection)},
          {"histogram_bins", fmt::format("{}", kHistogramBins)}};
}

Report retrieval_report(const RetrievalReport& r) {
  Report out{{"protocol", "retrieve"}};
  for (std::size_t i = 0; i < r.ks.size(); ++i) out.emplace_back(fmt::format("rank{}", r.ks[i]), fmt::format("{}", r.accuracy[i]));
  return out;
}

void write_pair_scores_csv(const std::filesystem::path& path, std::span<const PairSpec> pairs,
                           const VerificationReport& report) {
  CRRCD_REQUIRE(pairs.size() == report.scores.size(), "write_pair_scores_csv: pair count mismatch");
  std::string out = "id_a,id_b,same,score\n";
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    out += fmt::format("{},{},{},{}\n", pairs[i].id_a, pairs[i].id_b, pairs[i].same ? 1 : 0, report.scores[i]);
  }
  write_file(path, out);
}

}  // namespace crrcd
