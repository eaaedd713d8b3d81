// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The CRRCD Authors.

#include "helpers.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <unistd.h>

namespace crrcd::testing {

Tensor random_tensor(Rng& rng, Index rows, Index cols, double scale) {
  Tensor t(rows, cols);
  for (Index i = 0; i < t.size(); ++i) t.data()[i] = scale * normal(rng);
  return t;
}

Mat to_mat(const Tensor& t) {
  Mat m(static_cast<std::size_t>(t.rows()), Vec(static_cast<std::size_t>(t.cols())));
  for (Index r = 0; r < t.rows(); ++r) {
    for (Index c = 0; c < t.cols(); ++c) m[r][c] = t(r, c);
  }
  return m;
}

Vec to_vec(const Eigen::VectorXd& v) { return Vec(v.data(), v.data() + v.size()); }

GradCheck check_gradients(const std::function<ag::Var()>& loss, const std::vector<ag::Var>& leaves, double step,
                          double floor) {
  for (const auto& leaf : leaves) const_cast<ag::Var&>(leaf).zero_grad();
  loss().backward();
  GradCheck result;
  for (std::size_t l = 0; l < leaves.size(); ++l) {
    ag::Var leaf = leaves[l];
    const Tensor analytic = leaf.grad();
    Tensor numeric(analytic.rows(), analytic.cols());
    for (Index i = 0; i < leaf.value().size(); ++i) {
      double& x = leaf.mutable_value().data()[i];
      const double saved = x;
      x = saved + step;
      const double up = loss().scalar();
      x = saved - step;
      const double down = loss().scalar();
      x = saved;
      numeric.data()[i] = (up - down) / (2.0 * step);
    }
    const double scale = std::max({analytic.norm(), numeric.norm(), floor});
    const double err = (analytic - numeric).norm() / scale;
    if (err > result.max_rel_error) {
      result.max_rel_error = err;
      result.worst = "leaf " + std::to_string(l);
    }
  }
  return result;
}

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("crrcd_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

Dataset synthetic_dataset(int classes, int per_class, std::uint64_t seed, std::uint64_t split, std::int64_t id_base) {
  SyntheticSpec spec;
  spec.classes = classes;
  spec.per_class = per_class;
  spec.seed = seed;
  spec.split = split;
  spec.id_base = id_base;
  Dataset ds;
  ds.samples = make_synthetic(spec);
  ds.manifest.root = "memory";
  ds.manifest.split = split == 0 ? "train" : "test";
  ds.manifest.classes = classes;
  ds.manifest.channels = spec.channels;
  ds.manifest.hires_height = ds.manifest.hires_width = spec.hires;
  ds.manifest.factor = spec.factor;
  return ds;
}

}  // namespace crrcd::testing
