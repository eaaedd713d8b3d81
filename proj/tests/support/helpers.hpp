// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The CRRCD Authors.

#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "crrcd/autograd.hpp"
#include "crrcd/data.hpp"
#include "crrcd/rng.hpp"
#include "oracles.hpp"

namespace crrcd::testing {

Tensor random_tensor(Rng& rng, Index rows, Index cols, double scale = 1.0);
Mat to_mat(const Tensor& t);
Vec to_vec(const Eigen::VectorXd& v);

/// Largest relative error between analytic and central-difference gradients
/// over the given leaves. Each leaf is compared as a whole:
/// |g_a - g_n| / max(|g_a|, |g_n|, floor).
struct GradCheck {
  double max_rel_error = 0.0;
  std::string worst;
};
GradCheck check_gradients(const std::function<ag::Var()>& loss, const std::vector<ag::Var>& leaves,
                          double step = 1e-6, double floor = 1e-8);

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Small in-memory synthetic dataset with a matching manifest.
Dataset synthetic_dataset(int classes, int per_class, std::uint64_t seed, std::uint64_t split = 0,
                          std::int64_t id_base = 0);

}  // namespace crrcd::testing
