// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The CRRCD Authors.

#include "crrcd/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "crrcd/error.hpp"

namespace crrcd::ag {

void Node::accumulate(const Tensor& g) {
  if (grad.size() == 0) {
    grad = g;
  } else {
    grad += g;
  }
}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Tensor Var::grad() const {
  if (node_->grad.size() == 0) return Tensor::Zero(rows(), cols());
  return node_->grad;
}

double Var::scalar() const {
  CRRCD_REQUIRE(rows() == 1 && cols() == 1, "scalar() on a non 1x1 value");
  return node_->value(0, 0);
}

void Var::zero_grad() { node_->grad.resize(0, 0); }

Var Var::from_op(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward_fn) {
  Var out(std::move(value), false);
  for (const auto& p : parents) {
    if (p.requires_grad()) out.node_->requires_grad = true;
  }
  if (out.node_->requires_grad) {
    out.node_->parents.reserve(parents.size());
    for (auto& p : parents) out.node_->parents.push_back(p.node_);
    out.node_->backward_fn = std::move(backward_fn);
  }
  return out;
}

void Var::backward() const {
  CRRCD_REQUIRE(rows() == 1 && cols() == 1, "backward() needs a 1x1 root");
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  node_->accumulate(Tensor::Constant(1, 1, 1.0));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->grad.size() != 0) n->backward_fn(*n);
  }
}

namespace {

Node& parent(Node& self, std::size_t i) { return *self.parents[i]; }

bool wants(Node& self, std::size_t i) {
  return i < self.parents.size() && self.parents[i]->requires_grad;
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  CRRCD_REQUIRE(a.rows() == b.rows() && a.cols() == b.cols(),
                std::string(op) + ": shape mismatch");
}

void softmax_row(const double* z, Index n, double inv_temperature, double* out) {
  double peak = z[0] * inv_temperature;
  for (Index c = 1; c < n; ++c) peak = std::max(peak, z[c] * inv_temperature);
  double total = 0.0;
  for (Index c = 0; c < n; ++c) {
    out[c] = std::exp(z[c] * inv_temperature - peak);
    total += out[c];
  }
  for (Index c = 0; c < n; ++c) out[c] /= total;
}

}  // namespace

Tensor matmul_nt(const Tensor& x, const Tensor& w) {
  CRRCD_REQUIRE(x.cols() == w.cols(), "matmul_nt: inner dimension mismatch");
  const Index rows = x.rows(), inner = x.cols(), outs = w.rows();
  const Tensor wt = w.transpose();
  Tensor out = Tensor::Zero(rows, outs);
  for (Index r = 0; r < rows; ++r) {
    double* dst = out.row(r).data();
    for (Index k = 0; k < inner; ++k) {
      const double xv = x(r, k);
      const double* src = wt.row(k).data();
      for (Index o = 0; o < outs; ++o) dst[o] += xv * src[o];
    }
  }
  return out;
}

double pairwise_sum(std::span<const double> values) {
  constexpr std::size_t kBlock = 8;
  if (values.size() <= kBlock) {
    double total = 0.0;
    for (double v : values) total += v;
    return total;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

Var linear(const Var& x, const Var& w, const Var& b) {
  Tensor out = matmul_nt(x.value(), w.value());
  const bool has_bias = b.defined();
  if (has_bias) {
    CRRCD_REQUIRE(b.rows() == 1 && b.cols() == w.rows(), "linear: bias shape mismatch");
    for (Index r = 0; r < out.rows(); ++r) out.row(r) += b.value().row(0);
  }
  std::vector<Var> parents{x, w};
  if (has_bias) parents.push_back(b);
  return Var::from_op(std::move(out), std::move(parents), [](Node& self) {
    const Tensor& g = self.grad;
    const Tensor& xv = parent(self, 0).value;
    const Tensor& wv = parent(self, 1).value;
    const Index rows = g.rows(), outs = g.cols(), inner = xv.cols();
    if (wants(self, 0)) {
      Tensor dx = Tensor::Zero(rows, inner);
      for (Index r = 0; r < rows; ++r) {
        double* dst = dx.row(r).data();
        for (Index o = 0; o < outs; ++o) {
          const double gv = g(r, o);
          const double* src = wv.row(o).data();
          for (Index k = 0; k < inner; ++k) dst[k] += gv * src[k];
        }
      }
      parent(self, 0).accumulate(dx);
    }
    if (wants(self, 1)) {
      Tensor dw = Tensor::Zero(outs, inner);
      for (Index r = 0; r < rows; ++r) {
        const double* src = xv.row(r).data();
        for (Index o = 0; o < outs; ++o) {
          const double gv = g(r, o);
          double* dst = dw.row(o).data();
          for (Index k = 0; k < inner; ++k) dst[k] += gv * src[k];
        }
      }
      parent(self, 1).accumulate(dw);
    }
    if (wants(self, 2)) {
      Tensor db = Tensor::Zero(1, outs);
      for (Index r = 0; r < rows; ++r) db.row(0) += g.row(r);
      parent(self, 2).accumulate(db);
    }
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  return Var::from_op(a.value() + b.value(), {a, b}, [](Node& self) {
    if (wants(self, 0)) parent(self, 0).accumulate(self.grad);
    if (wants(self, 1)) parent(self, 1).accumulate(self.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  return Var::from_op(a.value() - b.value(), {a, b}, [](Node& self) {
    if (wants(self, 0)) parent(self, 0).accumulate(self.grad);
    if (wants(self, 1)) parent(self, 1).accumulate(-self.grad);
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tensor out = a.value().cwiseProduct(b.value());
  return Var::from_op(std::move(out), {a, b}, [](Node& self) {
    if (wants(self, 0)) parent(self, 0).accumulate(self.grad.cwiseProduct(parent(self, 1).value));
    if (wants(self, 1)) parent(self, 1).accumulate(self.grad.cwiseProduct(parent(self, 0).value));
  });
}

Var scale(const Var& a, double s) {
  return Var::from_op(a.value() * s, {a}, [s](Node& self) {
    if (wants(self, 0)) parent(self, 0).accumulate(self.grad * s);
  });
}

Var relu(const Var& a) {
  Tensor out = a.value().cwiseMax(0.0);
  return Var::from_op(std::move(out), {a}, [](Node& self) {
    if (!wants(self, 0)) return;
    const Tensor& x = parent(self, 0).value;
    Tensor dx = (x.array() > 0.0).select(self.grad, 0.0);
    parent(self, 0).accumulate(dx);
  });
}

Var log(const Var& a) {
  Tensor out = a.value().array().log().matrix();
  return Var::from_op(std::move(out), {a}, [](Node& self) {
    if (wants(self, 0)) {
      parent(self, 0).accumulate(self.grad.cwiseQuotient(parent(self, 0).value));
    }
  });
}

Var gather_rows(const Var& a, std::vector<Index> idx) {
  Tensor out(static_cast<Index>(idx.size()), a.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    CRRCD_REQUIRE(idx[i] >= 0 && idx[i] < a.rows(), "gather_rows: index out of range");
    out.row(static_cast<Index>(i)) = a.value().row(idx[i]);
  }
  return Var::from_op(std::move(out), {a}, [idx = std::move(idx)](Node& self) {
    if (!wants(self, 0)) return;
    Node& src = parent(self, 0);
    Tensor dx = Tensor::Zero(src.value.rows(), src.value.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) dx.row(idx[i]) += self.grad.row(static_cast<Index>(i));
    src.accumulate(dx);
  });
}

Var reshape(const Var& a, Index rows, Index cols) {
  CRRCD_REQUIRE(rows * cols == a.rows() * a.cols(), "reshape: element count mismatch");
  Tensor out = Eigen::Map<const Tensor>(a.value().data(), rows, cols);
  return Var::from_op(std::move(out), {a}, [](Node& self) {
    if (!wants(self, 0)) return;
    Node& src = parent(self, 0);
    Tensor dx = Eigen::Map<const Tensor>(self.grad.data(), src.value.rows(), src.value.cols());
    src.accumulate(dx);
  });
}

Var l2_normalize_rows(const Var& a, double eps) {
  const Tensor& x = a.value();
  Tensor out(x.rows(), x.cols());
  Eigen::VectorXd denom(x.rows());
  for (Index r = 0; r < x.rows(); ++r) {
    double sq = 0.0;
    for (Index c = 0; c < x.cols(); ++c) sq += x(r, c) * x(r, c);
    denom(r) = std::max(std::sqrt(sq), eps);
    for (Index c = 0; c < x.cols(); ++c) out(r, c) = x(r, c) / denom(r);
  }
  return Var::from_op(out, {a}, [out, denom, eps](Node& self) {
    if (!wants(self, 0)) return;
    const Tensor& g = self.grad;
    Tensor dx(g.rows(), g.cols());
    for (Index r = 0; r < g.rows(); ++r) {
      const double n = denom(r);
      if (n > eps) {
        double proj = 0.0;
        for (Index c = 0; c < g.cols(); ++c) proj += out(r, c) * g(r, c);
        for (Index c = 0; c < g.cols(); ++c) dx(r, c) = (g(r, c) - out(r, c) * proj) / n;
      } else {
        for (Index c = 0; c < g.cols(); ++c) dx(r, c) = g(r, c) / n;
      }
    }
    parent(self, 0).accumulate(dx);
  });
}

Var rowwise_dot(const Var& a, const Var& b) {
  require_same_shape(a, b, "rowwise_dot");
  Tensor out(a.rows(), 1);
  for (Index r = 0; r < a.rows(); ++r) {
    double acc = 0.0;
    for (Index c = 0; c < a.cols(); ++c) acc += a.value()(r, c) * b.value()(r, c);
    out(r, 0) = acc;
  }
  return Var::from_op(std::move(out), {a, b}, [](Node& self) {
    const Tensor& g = self.grad;
    for (std::size_t i = 0; i < 2; ++i) {
      if (!wants(self, i)) continue;
      const Tensor& other = parent(self, 1 - i).value;
      Tensor d(other.rows(), other.cols());
      for (Index r = 0; r < other.rows(); ++r) d.row(r) = other.row(r) * g(r, 0);
      parent(self, i).accumulate(d);
    }
  });
}

Var sum(const Var& a) {
  const Tensor& x = a.value();
  const double total = pairwise_sum(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
  return Var::from_op(Tensor::Constant(1, 1, total), {a}, [](Node& self) {
    if (!wants(self, 0)) return;
    Node& src = parent(self, 0);
    src.accumulate(Tensor::Constant(src.value.rows(), src.value.cols(), self.grad(0, 0)));
  });
}

Var mean(const Var& a) {
  CRRCD_REQUIRE(a.rows() * a.cols() > 0, "mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.rows() * a.cols()));
}

Var conv3x3(const Var& x, const Var& w, const Var& b, int channels, int height, int width) {
  const Index batch = x.rows();
  const Index outs = w.rows();
  const Index plane = static_cast<Index>(height) * width;
  CRRCD_REQUIRE(x.cols() == channels * plane, "conv3x3: input size mismatch");
  CRRCD_REQUIRE(w.cols() == channels * 9, "conv3x3: kernel size mismatch");
  CRRCD_REQUIRE(b.rows() == 1 && b.cols() == outs, "conv3x3: bias size mismatch");

  // Visits every (output pixel, kernel tap) pair with a valid input pixel.
  auto for_taps = [=](auto&& fn) {
    for (int y = 0; y < height; ++y) {
      for (int xx = 0; xx < width; ++xx) {
        for (int ky = 0; ky < 3; ++ky) {
          const int iy = y + ky - 1;
          if (iy < 0 || iy >= height) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int ix = xx + kx - 1;
            if (ix < 0 || ix >= width) continue;
            fn(static_cast<Index>(y) * width + xx, static_cast<Index>(iy) * width + ix, ky * 3 + kx);
          }
        }
      }
    }
  };

  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  Tensor out(batch, outs * plane);
  for (Index n = 0; n < batch; ++n) {
    for (Index o = 0; o < outs; ++o) {
      double* dst = out.row(n).data() + o * plane;
      for (Index p = 0; p < plane; ++p) dst[p] = b.value()(0, o);
      for (int c = 0; c < channels; ++c) {
        const double* src = xv.row(n).data() + c * plane;
        const double* kern = wv.row(o).data() + c * 9;
        for_taps([&](Index op, Index ip, int tap) { dst[op] += kern[tap] * src[ip]; });
      }
    }
  }

  return Var::from_op(std::move(out), {x, w, b}, [=](Node& self) {
    const Tensor& g = self.grad;
    const Tensor& xin = parent(self, 0).value;
    const Tensor& win = parent(self, 1).value;
    if (wants(self, 0)) {
      Tensor dx = Tensor::Zero(batch, xin.cols());
      for (Index n = 0; n < batch; ++n) {
        for (Index o = 0; o < outs; ++o) {
          const double* gsrc = g.row(n).data() + o * plane;
          for (int c = 0; c < channels; ++c) {
            double* dst = dx.row(n).data() + c * plane;
            const double* kern = win.row(o).data() + c * 9;
            for_taps([&](Index op, Index ip, int tap) { dst[ip] += kern[tap] * gsrc[op]; });
          }
        }
      }
      parent(self, 0).accumulate(dx);
    }
    if (wants(self, 1)) {
      Tensor dw = Tensor::Zero(outs, win.cols());
      for (Index n = 0; n < batch; ++n) {
        for (Index o = 0; o < outs; ++o) {
          const double* gsrc = g.row(n).data() + o * plane;
          for (int c = 0; c < channels; ++c) {
            const double* src = xin.row(n).data() + c * plane;
            double* kern = dw.row(o).data() + c * 9;
            for_taps([&](Index op, Index ip, int tap) { kern[tap] += gsrc[op] * src[ip]; });
          }
        }
      }
      parent(self, 1).accumulate(dw);
    }
    if (wants(self, 2)) {
      Tensor db = Tensor::Zero(1, outs);
      for (Index n = 0; n < batch; ++n) {
        for (Index o = 0; o < outs; ++o) {
          const double* gsrc = g.row(n).data() + o * plane;
          for (Index p = 0; p < plane; ++p) db(0, o) += gsrc[p];
        }
      }
      parent(self, 2).accumulate(db);
    }
  });
}

Var avg_pool2(const Var& x, int channels, int height, int width) {
  CRRCD_REQUIRE(height % 2 == 0 && width % 2 == 0, "avg_pool2: odd spatial size");
  CRRCD_REQUIRE(x.cols() == static_cast<Index>(channels) * height * width,
                "avg_pool2: input size mismatch");
  const int oh = height / 2, ow = width / 2;
  const Index batch = x.rows();
  Tensor out(batch, static_cast<Index>(channels) * oh * ow);
  for (Index n = 0; n < batch; ++n) {
    for (int c = 0; c < channels; ++c) {
      const double* src = x.value().row(n).data() + static_cast<Index>(c) * height * width;
      double* dst = out.row(n).data() + static_cast<Index>(c) * oh * ow;
      for (int y = 0; y < oh; ++y) {
        for (int xx = 0; xx < ow; ++xx) {
          const double* tl = src + (2 * y) * width + 2 * xx;
          dst[y * ow + xx] = 0.25 * (tl[0] + tl[1] + tl[width] + tl[width + 1]);
        }
      }
    }
  }
  return Var::from_op(std::move(out), {x}, [=](Node& self) {
    if (!wants(self, 0)) return;
    Tensor dx = Tensor::Zero(batch, parent(self, 0).value.cols());
    for (Index n = 0; n < batch; ++n) {
      for (int c = 0; c < channels; ++c) {
        const double* gsrc = self.grad.row(n).data() + static_cast<Index>(c) * oh * ow;
        double* dst = dx.row(n).data() + static_cast<Index>(c) * height * width;
        for (int y = 0; y < oh; ++y) {
          for (int xx = 0; xx < ow; ++xx) {
            const double gv = 0.25 * gsrc[y * ow + xx];
            double* tl = dst + (2 * y) * width + 2 * xx;
            tl[0] += gv;
            tl[1] += gv;
            tl[width] += gv;
            tl[width + 1] += gv;
          }
        }
      }
    }
    parent(self, 0).accumulate(dx);
  });
}

Var cross_entropy(const Var& logits, std::span<const int> labels) {
  const Tensor& z = logits.value();
  const Index rows = z.rows(), classes = z.cols();
  CRRCD_REQUIRE(static_cast<Index>(labels.size()) == rows, "cross_entropy: label count mismatch");
  CRRCD_REQUIRE(rows > 0, "cross_entropy: empty batch");
  Tensor probs(rows, classes);
  std::vector<double> per_row(static_cast<std::size_t>(rows));
  for (Index r = 0; r < rows; ++r) {
    const int y = labels[static_cast<std::size_t>(r)];
    CRRCD_REQUIRE(y >= 0 && y < classes, "cross_entropy: label out of range");
    softmax_row(z.row(r).data(), classes, 1.0, probs.row(r).data());
    // log-sum-exp form keeps saturated rows exact
    double peak = z(r, 0);
    for (Index c = 1; c < classes; ++c) peak = std::max(peak, z(r, c));
    double total = 0.0;
    for (Index c = 0; c < classes; ++c) total += std::exp(z(r, c) - peak);
    per_row[static_cast<std::size_t>(r)] = peak + std::log(total) - z(r, y);
  }
  const double loss = pairwise_sum(per_row) / static_cast<double>(rows);
  std::vector<int> owned(labels.begin(), labels.end());
  return Var::from_op(Tensor::Constant(1, 1, loss), {logits},
                      [probs = std::move(probs), owned = std::move(owned)](Node& self) {
                        if (!wants(self, 0)) return;
                        const double g = self.grad(0, 0) / static_cast<double>(probs.rows());
                        Tensor dz = probs;
                        for (Index r = 0; r < dz.rows(); ++r) dz(r, owned[static_cast<std::size_t>(r)]) -= 1.0;
                        parent(self, 0).accumulate(dz * g);
                      });
}

Var soft_cross_entropy(const Var& logits, const Tensor& targets, double temperature) {
  const Tensor& z = logits.value();
  CRRCD_REQUIRE(z.rows() == targets.rows() && z.cols() == targets.cols(),
                "soft_cross_entropy: shape mismatch");
  CRRCD_REQUIRE(z.rows() > 0, "soft_cross_entropy: empty batch");
  CRRCD_REQUIRE(temperature > 0.0, "soft_cross_entropy: temperature must be positive");
  const Index rows = z.rows(), classes = z.cols();
  const double inv_t = 1.0 / temperature;
  Tensor probs(rows, classes);
  std::vector<double> per_row(static_cast<std::size_t>(rows));
  for (Index r = 0; r < rows; ++r) {
    softmax_row(z.row(r).data(), classes, inv_t, probs.row(r).data());
    double peak = z(r, 0) * inv_t;
    for (Index c = 1; c < classes; ++c) peak = std::max(peak, z(r, c) * inv_t);
    double total = 0.0;
    for (Index c = 0; c < classes; ++c) total += std::exp(z(r, c) * inv_t - peak);
    const double log_norm = peak + std::log(total);
    double h = 0.0;
    for (Index c = 0; c < classes; ++c) h += targets(r, c) * (log_norm - z(r, c) * inv_t);
    per_row[static_cast<std::size_t>(r)] = temperature * temperature * h;
  }
  const double loss = pairwise_sum(per_row) / static_cast<double>(rows);
  return Var::from_op(Tensor::Constant(1, 1, loss), {logits},
                      [probs = std::move(probs), targets, temperature](Node& self) {
                        if (!wants(self, 0)) return;
                        const Index rows = probs.rows();
                        Tensor dz(rows, probs.cols());
                        for (Index r = 0; r < rows; ++r) {
                          const double mass = targets.row(r).sum();
                          dz.row(r) = probs.row(r) * mass - targets.row(r);
                        }
                        const double g = self.grad(0, 0) * temperature / static_cast<double>(rows);
                        parent(self, 0).accumulate(dz * g);
                      });
}

Var contrastive_probability(const Var& inner, double tau, double offset, double eps) {
  CRRCD_REQUIRE(tau > 0.0, "contrastive_probability: tau must be positive");
  const Tensor& c = inner.value();
  Tensor p(c.rows(), c.cols());
  Tensor slope(c.rows(), c.cols());
  for (Index i = 0; i < c.size(); ++i) {
    const double e = std::exp(c.data()[i] / tau);
    double value = std::isinf(e) ? 1.0 : e / (e + offset);
    double d = value * (1.0 - value) / tau;
    if (value < eps) {
      value = eps;
      d = 0.0;
    } else if (value > 1.0 - eps) {
      value = 1.0 - eps;
      d = 0.0;
    }
    p.data()[i] = value;
    slope.data()[i] = d;
  }
  return Var::from_op(std::move(p), {inner}, [slope = std::move(slope)](Node& self) {
    if (wants(self, 0)) parent(self, 0).accumulate(self.grad.cwiseProduct(slope));
  });
}

Var additive_angular_margin(const Var& cosines, std::span<const int> labels, double margin,
                            double scale) {
  const Tensor& c = cosines.value();
  CRRCD_REQUIRE(static_cast<Index>(labels.size()) == c.rows(), "angular margin: label count mismatch");
  constexpr double kEdge = 1e-7;
  Tensor out = c * scale;
  Tensor slope = Tensor::Constant(c.rows(), c.cols(), scale);
  for (Index r = 0; r < c.rows(); ++r) {
    const int y = labels[static_cast<std::size_t>(r)];
    CRRCD_REQUIRE(y >= 0 && y < c.cols(), "angular margin: label out of range");
    if (margin == 0.0) continue;
    const double cv = std::clamp(c(r, y), -1.0 + kEdge, 1.0 - kEdge);
    const double theta = std::acos(cv);
    out(r, y) = scale * std::cos(theta + margin);
    slope(r, y) = scale * std::sin(theta + margin) / std::sin(theta);
  }
  return Var::from_op(std::move(out), {cosines}, [slope = std::move(slope)](Node& self) {
    if (wants(self, 0)) parent(self, 0).accumulate(self.grad.cwiseProduct(slope));
  });
}

}  // namespace crrcd::ag
