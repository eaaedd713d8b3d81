// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The CRRCD Authors.
//
// Minimal reverse-mode automatic differentiation over dense row-major
// matrices. Rows are samples, columns are features. All kernels reduce in
// plain index order so that a row's result never depends on how many other
// rows share the batch.

#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace crrcd {

using Tensor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

namespace ag {

struct Node {
  Tensor value;
  Tensor grad;  // empty until something flows in
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  void accumulate(const Tensor& g);
};

/// Handle to a node in the computation graph. Copies share the node.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  /// Gradient accumulated by backward(); zeros of the value's shape if none.
  Tensor grad() const;
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool defined() const { return static_cast<bool>(node_); }

  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  /// Element count; 0 for an undefined handle.
  Index size() const { return node_ ? node_->value.size() : 0; }
  /// Value of a 1x1 result.
  double scalar() const;

  void zero_grad();
  /// Seeds d(self)/d(self) = 1 and propagates. Requires a 1x1 value.
  void backward() const;

  const std::shared_ptr<Node>& node() const { return node_; }

  static Var from_op(Tensor value, std::vector<Var> parents,
                     std::function<void(Node&)> backward_fn);

 private:
  std::shared_ptr<Node> node_;
};

inline Var constant(Tensor value) { return Var(std::move(value), false); }
inline Var parameter(Tensor value) { return Var(std::move(value), true); }

// --- dense kernels (also used outside the graph) -------------------------

/// x (B x K) times w^T where w is (O x K).
Tensor matmul_nt(const Tensor& x, const Tensor& w);
/// Index-order pairwise summation of a contiguous range.
double pairwise_sum(std::span<const double> values);

// --- differentiable ops --------------------------------------------------

/// Affine map x w^T (+ b); b is 1 x O or undefined.
Var linear(const Var& x, const Var& w, const Var& b = Var());
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var relu(const Var& a);
Var log(const Var& a);
/// Rows a[idx[0]], a[idx[1]], ...; gradients scatter-add back.
Var gather_rows(const Var& a, std::vector<Index> idx);
/// Reinterprets the (row-major) storage with a new shape.
Var reshape(const Var& a, Index rows, Index cols);
/// x / max(||x||_2, eps) for every row.
Var l2_normalize_rows(const Var& a, double eps);
/// Per-row inner product, result is B x 1.
Var rowwise_dot(const Var& a, const Var& b);
/// Sum of all entries as 1 x 1 (pairwise order).
Var sum(const Var& a);
Var mean(const Var& a);

/// 3x3 convolution, stride 1, zero padding 1. x is B x (C*H*W) in CHW order,
/// w is O x (C*9), b is 1 x O. Output B x (O*H*W).
Var conv3x3(const Var& x, const Var& w, const Var& b, int channels, int height, int width);
/// 2x2 average pooling, stride 2. x is B x (C*H*W); H and W even.
Var avg_pool2(const Var& x, int channels, int height, int width);

/// Mean over rows of -log softmax(logits)[label].
Var cross_entropy(const Var& logits, std::span<const int> labels);
/// Mean over rows of H(targets_row, softmax(logits_row / temperature)) times
/// temperature^2. Targets are fixed probability rows.
Var soft_cross_entropy(const Var& logits, const Tensor& targets, double temperature);
/// Elementwise e^{c/tau} / (e^{c/tau} + offset), clamped to [eps, 1 - eps].
/// Gradient is zero where the clamp is active.
Var contrastive_probability(const Var& inner, double tau, double offset, double eps);
/// Replaces the target-class cosine c with cos(acos(c) + margin), then
/// multiplies every entry by scale.
Var additive_angular_margin(const Var& cosines, std::span<const int> labels, double margin,
                            double scale);

}  // namespace ag
}  // namespace crrcd
