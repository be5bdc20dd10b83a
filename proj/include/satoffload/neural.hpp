// Copyright 2026 The satoffload Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SATOFFLOAD_NEURAL_HPP_
#define SATOFFLOAD_NEURAL_HPP_

// Dense networks with reverse-mode gradients.
//
// Values are Eigen matrices with one sample per row. A Tape records every
// operation of a forward pass; Tape::backward walks it in reverse and
// accumulates gradients into the Parameters that were read.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "satoffload/errors.hpp"

namespace satoffload {

using Matrix = Eigen::MatrixXd;

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  void zero_grad() { grad = Matrix::Zero(value.rows(), value.cols()); }
};

struct Var {
  int id = -1;
};

enum class Activation { kLinear, kRelu, kTanh };

inline const char* activation_name(Activation a) {
  switch (a) {
    case Activation::kLinear: return "linear";
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
  }
  return "?";
}

inline Matrix apply_activation(const Matrix& x, Activation a) {
  switch (a) {
    case Activation::kLinear: return x;
    case Activation::kRelu: return x.cwiseMax(0.0);
    case Activation::kTanh: return x.array().tanh().matrix();
  }
  return x;
}

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  const Matrix& value(Var v) const { return nodes_[v.id].value; }
  double scalar(Var v) const { return nodes_[v.id].value(0, 0); }

  /// Gradient of the last backward root with respect to `v`.
  Matrix grad(Var v) const {
    const Node& n = nodes_[v.id];
    if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  size_t size() const { return nodes_.size(); }

  Var constant(Matrix v) { return push(std::move(v), false, nullptr); }

  Var param(Parameter& p) {
    Var v = push(p.value, true, nullptr);
    nodes_[v.id].param = &p;
    return v;
  }

  /// Accumulates d root / d parameter into every Parameter on the tape.
  void backward(Var root) {
    if (nodes_[root.id].value.size() != 1) throw ShapeError("backward: root must be a scalar");
    for (auto& n : nodes_) n.grad.resize(0, 0);
    g(root.id) = Matrix::Constant(1, 1, 1.0);
    for (int i = root.id; i >= 0; --i) {
      Node& n = nodes_[i];
      if (!n.needs || n.grad.size() == 0) continue;
      if (n.back) n.back();
      if (n.param) {
        if (n.param->grad.rows() != n.value.rows() || n.param->grad.cols() != n.value.cols()) {
          n.param->zero_grad();
        }
        n.param->grad += n.grad;
      }
    }
  }

  // ---- operations -------------------------------------------------------

  Var matmul(Var a, Var b) {
    check(value(a).cols() == value(b).rows(), "matmul", a, b);
    return push(value(a) * value(b), needs(a, b), [=, this] {
      const Matrix& dc = nodes_[cur_].grad;
      if (nodes_[a.id].needs) g(a.id).noalias() += dc * value(b).transpose();
      if (nodes_[b.id].needs) g(b.id).noalias() += value(a).transpose() * dc;
    });
  }

  /// a (n x k) + row vector b (1 x k) broadcast over rows.
  Var add_bias(Var a, Var b) {
    check(value(b).rows() == 1 && value(a).cols() == value(b).cols(), "add_bias", a, b);
    Matrix out = value(a);
    out.rowwise() += value(b).row(0);
    return push(std::move(out), needs(a, b), [=, this] {
      const Matrix& dc = nodes_[cur_].grad;
      if (nodes_[a.id].needs) g(a.id) += dc;
      if (nodes_[b.id].needs) g(b.id) += dc.colwise().sum();
    });
  }

  Var add(Var a, Var b) {
    check_same(a, b, "add");
    return push(value(a) + value(b), needs(a, b), [=, this] {
      const Matrix& dc = nodes_[cur_].grad;
      if (nodes_[a.id].needs) g(a.id) += dc;
      if (nodes_[b.id].needs) g(b.id) += dc;
    });
  }

  Var sub(Var a, Var b) {
    check_same(a, b, "sub");
    return push(value(a) - value(b), needs(a, b), [=, this] {
      const Matrix& dc = nodes_[cur_].grad;
      if (nodes_[a.id].needs) g(a.id) += dc;
      if (nodes_[b.id].needs) g(b.id) -= dc;
    });
  }

  Var mul(Var a, Var b) {
    check_same(a, b, "mul");
    return push(value(a).cwiseProduct(value(b)), needs(a, b), [=, this] {
      const Matrix& dc = nodes_[cur_].grad;
      if (nodes_[a.id].needs) g(a.id) += dc.cwiseProduct(value(b));
      if (nodes_[b.id].needs) g(b.id) += dc.cwiseProduct(value(a));
    });
  }

  Var scale(Var a, double s) {
    return push(value(a) * s, needs(a), [=, this] { g(a.id) += nodes_[cur_].grad * s; });
  }

  Var add_scalar(Var a, double s) {
    return push((value(a).array() + s).matrix(), needs(a), [=, this] { g(a.id) += nodes_[cur_].grad; });
  }

  Var relu(Var a) {
    return push(value(a).cwiseMax(0.0), needs(a), [=, this] {
      g(a.id) += (value(a).array() > 0.0).select(nodes_[cur_].grad, 0.0);
    });
  }

  Var tanh(Var a) {
    Matrix y = value(a).array().tanh().matrix();
    return push(std::move(y), needs(a), [=, this] {
      const Matrix& y = nodes_[cur_].value;
      g(a.id).array() += nodes_[cur_].grad.array() * (1.0 - y.array().square());
    });
  }

  Var activation(Var a, Activation act) {
    switch (act) {
      case Activation::kLinear: return a;
      case Activation::kRelu: return relu(a);
      case Activation::kTanh: return tanh(a);
    }
    return a;
  }

  Var exp(Var a) {
    return push(value(a).array().exp().matrix(), needs(a), [=, this] {
      g(a.id).array() += nodes_[cur_].grad.array() * nodes_[cur_].value.array();
    });
  }

  Var log(Var a) {
    return push(value(a).array().log().matrix(), needs(a), [=, this] {
      g(a.id).array() += nodes_[cur_].grad.array() / value(a).array();
    });
  }

  Var square(Var a) {
    return push(value(a).array().square().matrix(), needs(a), [=, this] {
      g(a.id).array() += 2.0 * nodes_[cur_].grad.array() * value(a).array();
    });
  }

  Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no inputs");
    const Eigen::Index rows = value(parts[0]).rows();
    Eigen::Index cols = 0;
    bool any = false;
    for (Var p : parts) {
      if (value(p).rows() != rows) throw ShapeError("concat_cols: row mismatch");
      cols += value(p).cols();
      any = any || nodes_[p.id].needs;
    }
    Matrix out(rows, cols);
    Eigen::Index at = 0;
    for (Var p : parts) {
      out.middleCols(at, value(p).cols()) = value(p);
      at += value(p).cols();
    }
    return push(std::move(out), any, [=, this] {
      Eigen::Index at = 0;
      for (Var p : parts) {
        const Eigen::Index c = value(p).cols();
        if (nodes_[p.id].needs) g(p.id) += nodes_[cur_].grad.middleCols(at, c);
        at += c;
      }
    });
  }

  Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
    if (start < 0 || start + count > value(a).cols()) throw ShapeError("slice_cols: out of range");
    return push(value(a).middleCols(start, count), needs(a), [=, this] {
      g(a.id).middleCols(start, count) += nodes_[cur_].grad;
    });
  }

  /// Row-wise dot product: (n x k), (n x k) -> (n x 1).
  Var rowdot(Var a, Var b) {
    check_same(a, b, "rowdot");
    return push(value(a).cwiseProduct(value(b)).rowwise().sum(), needs(a, b), [=, this] {
      const Eigen::ArrayXd dc = nodes_[cur_].grad.col(0).array();
      if (nodes_[a.id].needs) g(a.id).array() += value(b).array().colwise() * dc;
      if (nodes_[b.id].needs) g(b.id).array() += value(a).array().colwise() * dc;
    });
  }

  /// Scales row i of a (n x k) by c(i) where c is (n x 1).
  Var mul_col(Var a, Var c) {
    check(value(c).cols() == 1 && value(c).rows() == value(a).rows(), "mul_col", a, c);
    Matrix out = (value(a).array().colwise() * value(c).col(0).array()).matrix();
    return push(std::move(out), needs(a, c), [=, this] {
      const Matrix& dc = nodes_[cur_].grad;
      if (nodes_[a.id].needs) g(a.id).array() += dc.array().colwise() * value(c).col(0).array();
      if (nodes_[c.id].needs) g(c.id) += dc.cwiseProduct(value(a)).rowwise().sum();
    });
  }

  /// Sum over columns: (n x k) -> (n x 1).
  Var row_sum(Var a) {
    return push(value(a).rowwise().sum(), needs(a), [=, this] {
      g(a.id).colwise() += nodes_[cur_].grad.col(0);
    });
  }

  Var softmax_rows(Var a) {
    Matrix y = value(a);
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      const double m = y.row(i).maxCoeff();
      y.row(i) = (y.row(i).array() - m).exp().matrix();
      y.row(i) /= y.row(i).sum();
    }
    return push(std::move(y), needs(a), [=, this] {
      const Matrix& y = nodes_[cur_].value;
      const Matrix& dc = nodes_[cur_].grad;
      const Eigen::VectorXd inner = dc.cwiseProduct(y).rowwise().sum();
      g(a.id).array() += y.array() * (dc.array().colwise() - inner.array());
    });
  }

  /// Log-softmax over the entries with mask != 0; masked entries yield 0 and
  /// receive no gradient. Every row needs at least one valid entry.
  Var masked_log_softmax(Var a, const Matrix& mask) {
    check(mask.rows() == value(a).rows() && mask.cols() == value(a).cols(), "masked_log_softmax", a, a);
    const Matrix& x = value(a);
    Matrix y = Matrix::Zero(x.rows(), x.cols());
    Matrix p = Matrix::Zero(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      double m = -std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < x.cols(); ++j) {
        if (mask(i, j) != 0.0) m = std::max(m, x(i, j));
      }
      if (!std::isfinite(m)) throw ShapeError("masked_log_softmax: row without valid entries");
      double z = 0.0;
      for (Eigen::Index j = 0; j < x.cols(); ++j) {
        if (mask(i, j) != 0.0) z += std::exp(x(i, j) - m);
      }
      const double lse = m + std::log(z);
      for (Eigen::Index j = 0; j < x.cols(); ++j) {
        if (mask(i, j) != 0.0) {
          y(i, j) = x(i, j) - lse;
          p(i, j) = std::exp(y(i, j));
        }
      }
    }
    return push(std::move(y), needs(a), [=, this] {
      const Matrix& dc = nodes_[cur_].grad;
      Matrix masked = dc.cwiseProduct((mask.array() != 0.0).cast<double>().matrix());
      const Eigen::VectorXd total = masked.rowwise().sum();
      g(a.id) += masked - (p.array().colwise() * total.array()).matrix();
    });
  }

  /// Picks a(i, index[i]) per row: (n x k) -> (n x 1).
  Var gather_cols(Var a, const std::vector<int>& index) {
    if (static_cast<Eigen::Index>(index.size()) != value(a).rows()) {
      throw ShapeError("gather_cols: one index per row required");
    }
    Matrix out(value(a).rows(), 1);
    for (Eigen::Index i = 0; i < out.rows(); ++i) out(i, 0) = value(a)(i, index[i]);
    return push(std::move(out), needs(a), [=, this] {
      Matrix& ga = g(a.id);
      const Matrix& dc = nodes_[cur_].grad;
      for (Eigen::Index i = 0; i < dc.rows(); ++i) ga(i, index[i]) += dc(i, 0);
    });
  }

  /// Elementwise minimum; ties send the gradient to `a`.
  Var minimum(Var a, Var b) {
    check_same(a, b, "minimum");
    const Matrix pick_a = (value(a).array() <= value(b).array()).cast<double>().matrix();
    return push(value(a).cwiseMin(value(b)), needs(a, b), [=, this] {
      const Matrix& dc = nodes_[cur_].grad;
      if (nodes_[a.id].needs) g(a.id) += dc.cwiseProduct(pick_a);
      if (nodes_[b.id].needs) g(b.id) += dc.cwiseProduct((1.0 - pick_a.array()).matrix());
    });
  }

  /// Clamp to [lo, hi]; zero gradient where the bound is active.
  Var clamp(Var a, double lo, double hi) {
    const Matrix inside = ((value(a).array() > lo) && (value(a).array() < hi)).cast<double>().matrix();
    return push(value(a).cwiseMax(lo).cwiseMin(hi), needs(a), [=, this] {
      g(a.id) += nodes_[cur_].grad.cwiseProduct(inside);
    });
  }

  Var sum(Var a) {
    return push(Matrix::Constant(1, 1, value(a).sum()), needs(a), [=, this] {
      g(a.id).array() += nodes_[cur_].grad(0, 0);
    });
  }

  Var mean(Var a) {
    const double n = static_cast<double>(value(a).size());
    return push(Matrix::Constant(1, 1, value(a).sum() / n), needs(a), [=, this] {
      g(a.id).array() += nodes_[cur_].grad(0, 0) / n;
    });
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::function<void()> back;
    Parameter* param = nullptr;
    bool needs = false;
  };

  bool needs(Var a) const { return nodes_[a.id].needs; }
  bool needs(Var a, Var b) const { return nodes_[a.id].needs || nodes_[b.id].needs; }

  Matrix& g(int id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  Var push(Matrix v, bool needs_grad, std::function<void()> back) {
    const int id = static_cast<int>(nodes_.size());
    Node n;
    n.value = std::move(v);
    n.needs = needs_grad;
    if (needs_grad && back) {
      n.back = [this, id, fn = std::move(back)] {
        cur_ = id;
        fn();
      };
    }
    nodes_.push_back(std::move(n));
    return Var{id};
  }

  void check(bool ok, const char* op, Var a, Var b) const {
    if (!ok) {
      std::ostringstream os;
      os << op << ": incompatible shapes " << value(a).rows() << "x" << value(a).cols() << " and "
         << value(b).rows() << "x" << value(b).cols();
      throw ShapeError(os.str());
    }
  }

  void check_same(Var a, Var b, const char* op) const {
    check(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(), op, a, b);
  }

  std::vector<Node> nodes_;
  int cur_ = 0;
};

// ---------------------------------------------------------------------------
// Plain-value helpers.

inline std::vector<double> softmax(std::span<const double> scores) {
  std::vector<double> out(scores.begin(), scores.end());
  if (out.empty()) return out;
  const double m = *std::max_element(out.begin(), out.end());
  double z = 0.0;
  for (double& v : out) {
    v = std::exp(v - m);
    z += v;
  }
  for (double& v : out) v /= z;
  return out;
}

/// Softmax restricted to entries with mask true; others get probability 0.
inline std::vector<double> masked_softmax(std::span<const double> logits, std::span<const bool> mask) {
  std::vector<double> out(logits.size(), 0.0);
  double m = -std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < logits.size(); ++i) {
    if (mask[i]) m = std::max(m, logits[i]);
  }
  if (!std::isfinite(m)) throw DomainError("masked_softmax: no valid entry");
  double z = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    if (mask[i]) {
      out[i] = std::exp(logits[i] - m);
      z += out[i];
    }
  }
  for (double& v : out) v /= z;
  return out;
}

// ---------------------------------------------------------------------------
// Networks.

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization.
inline Matrix fan_in_uniform(int rows, int cols, int fan_in, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max(1, fan_in)));
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = bound * u(rng);
  return m;
}

class Mlp {
 public:
  Mlp() = default;

  /// widths = {input, hidden..., output}; hidden layers use `hidden`, the
  /// last layer uses `output`.
  Mlp(const std::vector<int>& widths, Activation hidden, Activation output, std::mt19937_64& rng,
      const std::string& name = "mlp")
      : widths_(widths) {
    if (widths.size() < 2) throw ShapeError("Mlp: need at least input and output widths");
    for (size_t l = 0; l + 1 < widths.size(); ++l) {
      Parameter w{name + ".w" + std::to_string(l), fan_in_uniform(widths[l], widths[l + 1], widths[l], rng), {}};
      Parameter b{name + ".b" + std::to_string(l), fan_in_uniform(1, widths[l + 1], widths[l], rng), {}};
      params_.push_back(std::move(w));
      params_.push_back(std::move(b));
      activations_.push_back(l + 2 == widths.size() ? output : hidden);
    }
    for (auto& p : params_) p.zero_grad();
  }

  int input_width() const { return widths_.front(); }
  int output_width() const { return widths_.back(); }
  size_t layer_count() const { return activations_.size(); }
  const std::vector<int>& widths() const { return widths_; }

  Parameter& weight(size_t layer) { return params_[2 * layer]; }
  Parameter& bias(size_t layer) { return params_[2 * layer + 1]; }
  const Parameter& weight(size_t layer) const { return params_[2 * layer]; }
  const Parameter& bias(size_t layer) const { return params_[2 * layer + 1]; }
  Activation activation(size_t layer) const { return activations_[layer]; }
  void set_activation(size_t layer, Activation a) { activations_[layer] = a; }

  void scale_output_layer(double s) {
    weight(layer_count() - 1).value *= s;
    bias(layer_count() - 1).value *= s;
  }

  std::vector<Parameter*> parameters() {
    std::vector<Parameter*> out;
    for (auto& p : params_) out.push_back(&p);
    return out;
  }

  Var forward(Tape& tape, Var x) {
    check_input(tape.value(x).cols());
    Var h = x;
    for (size_t l = 0; l < layer_count(); ++l) {
      h = tape.add_bias(tape.matmul(h, tape.param(weight(l))), tape.param(bias(l)));
      h = tape.activation(h, activations_[l]);
    }
    return h;
  }

  /// Batched forward pass without gradient bookkeeping.
  Matrix infer(const Matrix& x) const {
    check_input(x.cols());
    Matrix h = x;
    for (size_t l = 0; l < layer_count(); ++l) {
      Matrix z = h * weight(l).value;
      z.rowwise() += bias(l).value.row(0);
      h = apply_activation(z, activations_[l]);
    }
    return h;
  }

  std::vector<double> forward(std::span<const double> input) const {
    Matrix x(1, static_cast<Eigen::Index>(input.size()));
    for (size_t i = 0; i < input.size(); ++i) x(0, static_cast<Eigen::Index>(i)) = input[i];
    const Matrix y = infer(x);
    return std::vector<double>(y.data(), y.data() + y.size());
  }

 private:
  void check_input(Eigen::Index cols) const {
    for (size_t l = 0; l < layer_count(); ++l) {
      const Eigen::Index expected = l == 0 ? cols : weight(l - 1).value.cols();
      if (weight(l).value.rows() != expected) {
        throw ShapeError("Mlp: layer " + std::to_string(l) + " expects input width " +
                         std::to_string(weight(l).value.rows()) + ", got " + std::to_string(expected));
      }
    }
  }

  std::vector<int> widths_;
  std::vector<Parameter> params_;
  std::vector<Activation> activations_;
};

struct AttentionMix {
  Eigen::RowVectorXd psi;
  std::vector<double> weights;
};

/// Scaled dot-product attention over the other agents' embeddings:
/// phi_i = softmax_i((e_i W_k) . (e_b W_q) / sqrt(d_k)),
/// psi_b = sum_i phi_i Psi(e_i V).
class AttentionHead {
 public:
  AttentionHead() = default;
  AttentionHead(int embed, int key, int value, std::mt19937_64& rng, Activation psi = Activation::kRelu,
                const std::string& name = "attn")
      : psi_(psi) {
    wq_ = {name + ".wq", fan_in_uniform(embed, key, embed, rng), Matrix::Zero(embed, key)};
    wk_ = {name + ".wk", fan_in_uniform(embed, key, embed, rng), Matrix::Zero(embed, key)};
    v_ = {name + ".v", fan_in_uniform(embed, value, embed, rng), Matrix::Zero(embed, value)};
  }

  Parameter& query() { return wq_; }
  Parameter& key() { return wk_; }
  Parameter& value() { return v_; }
  int value_width() const { return static_cast<int>(v_.value.cols()); }
  Activation psi() const { return psi_; }

  std::vector<Parameter*> parameters() { return {&wq_, &wk_, &v_}; }

  AttentionMix mix(const Eigen::RowVectorXd& own, const std::vector<Eigen::RowVectorXd>& others) const {
    AttentionMix out;
    out.psi = Eigen::RowVectorXd::Zero(v_.value.cols());
    if (others.empty()) return out;
    const Eigen::RowVectorXd q = own * wq_.value;
    const double scale = 1.0 / std::sqrt(static_cast<double>(wq_.value.cols()));
    std::vector<double> scores;
    for (const auto& e : others) scores.push_back((e * wk_.value).dot(q) * scale);
    out.weights = softmax(scores);
    for (size_t i = 0; i < others.size(); ++i) {
      out.psi += out.weights[i] * apply_activation(others[i] * v_.value, psi_);
    }
    return out;
  }

  /// Tape version: embeddings[u] is (batch x embed) for unit u; returns
  /// psi[u] (batch x value) mixing every other unit.
  std::vector<Var> forward(Tape& tape, const std::vector<Var>& embeddings) {
    const size_t n = embeddings.size();
    std::vector<Var> out;
    if (n == 0) return out;
    const Eigen::Index batch = tape.value(embeddings[0]).rows();
    if (n == 1) {
      out.push_back(tape.constant(Matrix::Zero(batch, v_.value.cols())));
      return out;
    }
    const Var wq = tape.param(wq_), wk = tape.param(wk_), wv = tape.param(v_);
    const double scale = 1.0 / std::sqrt(static_cast<double>(wq_.value.cols()));
    std::vector<Var> q, k, v;
    for (Var e : embeddings) {
      q.push_back(tape.matmul(e, wq));
      k.push_back(tape.matmul(e, wk));
      v.push_back(tape.activation(tape.matmul(e, wv), psi_));
    }
    for (size_t b = 0; b < n; ++b) {
      std::vector<Var> scores;
      std::vector<size_t> idx;
      for (size_t i = 0; i < n; ++i) {
        if (i == b) continue;
        scores.push_back(tape.scale(tape.rowdot(q[b], k[i]), scale));
        idx.push_back(i);
      }
      const Var w = tape.softmax_rows(tape.concat_cols(scores));
      Var psi = tape.mul_col(v[idx[0]], tape.slice_cols(w, 0, 1));
      for (size_t j = 1; j < idx.size(); ++j) {
        psi = tape.add(psi, tape.mul_col(v[idx[j]], tape.slice_cols(w, static_cast<Eigen::Index>(j), 1)));
      }
      out.push_back(psi);
    }
    return out;
  }

 private:
  Parameter wq_, wk_, v_;
  Activation psi_ = Activation::kRelu;
};

// ---------------------------------------------------------------------------
// Optimizer.

enum class Direction { kDescent, kAscent };

struct AdamState {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;
};

/// One bias-corrected Adam update. Ascent moves along +grad.
inline void adam_step(std::span<Parameter* const> params, AdamState& s,
                      Direction direction = Direction::kDescent) {
  if (s.m.empty()) {
    for (Parameter* p : params) {
      s.m.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      s.v.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }
  if (s.m.size() != params.size()) throw ShapeError("adam_step: parameter count changed");
  ++s.step;
  const double sign = direction == Direction::kDescent ? -1.0 : 1.0;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols() ||
        s.m[i].rows() != p.value.rows() || s.m[i].cols() != p.value.cols()) {
      throw ShapeError("adam_step: shape mismatch for " + p.name);
    }
    s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * p.grad;
    s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * p.grad.cwiseProduct(p.grad);
    p.value.array() += sign * s.learning_rate * (s.m[i].array() / c1) /
                       ((s.v[i].array() / c2).sqrt() + s.epsilon);
  }
}

inline double gradient_norm(std::span<Parameter* const> params) {
  double sq = 0.0;
  for (const Parameter* p : params) sq += p->grad.squaredNorm();
  return std::sqrt(sq);
}

/// Rescales gradients so their global norm is at most `max_norm`.
inline void clip_gradients(std::span<Parameter* const> params, double max_norm) {
  const double norm = gradient_norm(params);
  if (max_norm > 0.0 && norm > max_norm) {
    for (Parameter* p : params) p->grad *= max_norm / norm;
  }
}

inline void zero_gradients(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->zero_grad();
}

// ---------------------------------------------------------------------------
// Binary checkpoint primitives (little-endian host order).

inline constexpr char kCheckpointMagic[8] = {'S', 'O', 'F', 'F', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace io {

template <class T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw ConfigError("checkpoint: unexpected end of file");
  return v;
}

inline void write_string(std::ostream& os, const std::string& s) {
  write_pod<std::uint64_t>(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& is) {
  const auto n = read_pod<std::uint64_t>(is);
  if (n > (1ull << 30)) throw ConfigError("checkpoint: corrupt string length");
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (!is) throw ConfigError("checkpoint: unexpected end of file");
  return s;
}

inline void write_matrix(std::ostream& os, const Matrix& m) {
  write_pod<std::int64_t>(os, m.rows());
  write_pod<std::int64_t>(os, m.cols());
  os.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
}

inline Matrix read_matrix(std::istream& is) {
  const auto rows = read_pod<std::int64_t>(is);
  const auto cols = read_pod<std::int64_t>(is);
  if (rows < 0 || cols < 0 || rows * cols > (1ll << 28)) throw ConfigError("checkpoint: corrupt shape");
  Matrix m(rows, cols);
  is.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
  if (!is) throw ConfigError("checkpoint: unexpected end of file");
  return m;
}

inline void write_header(std::ostream& os) {
  os.write(kCheckpointMagic, sizeof kCheckpointMagic);
  write_pod(os, kCheckpointVersion);
}

inline void read_header(std::istream& is) {
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || !std::equal(magic, magic + 8, kCheckpointMagic)) throw ConfigError("checkpoint: bad magic");
  const auto version = read_pod<std::uint32_t>(is);
  if (version != kCheckpointVersion) {
    throw ConfigError("checkpoint: unsupported version " + std::to_string(version));
  }
}

inline void write_parameters(std::ostream& os, std::span<Parameter* const> params) {
  write_pod<std::uint64_t>(os, params.size());
  for (const Parameter* p : params) {
    write_string(os, p->name);
    write_matrix(os, p->value);
  }
}

inline void read_parameters(std::istream& is, std::span<Parameter* const> params) {
  const auto n = read_pod<std::uint64_t>(is);
  if (n != params.size()) throw ConfigError("checkpoint: parameter count mismatch");
  for (Parameter* p : params) {
    const std::string name = read_string(is);
    Matrix m = read_matrix(is);
    if (name != p->name || m.rows() != p->value.rows() || m.cols() != p->value.cols()) {
      throw ConfigError("checkpoint: parameter " + name + " does not match " + p->name);
    }
    p->value = std::move(m);
  }
}

inline void write_adam(std::ostream& os, const AdamState& s) {
  write_pod(os, s.learning_rate);
  write_pod(os, s.beta1);
  write_pod(os, s.beta2);
  write_pod(os, s.epsilon);
  write_pod(os, s.step);
  write_pod<std::uint64_t>(os, s.m.size());
  for (size_t i = 0; i < s.m.size(); ++i) {
    write_matrix(os, s.m[i]);
    write_matrix(os, s.v[i]);
  }
}

inline AdamState read_adam(std::istream& is) {
  AdamState s;
  s.learning_rate = read_pod<double>(is);
  s.beta1 = read_pod<double>(is);
  s.beta2 = read_pod<double>(is);
  s.epsilon = read_pod<double>(is);
  s.step = read_pod<std::int64_t>(is);
  const auto n = read_pod<std::uint64_t>(is);
  for (std::uint64_t i = 0; i < n; ++i) {
    s.m.push_back(read_matrix(is));
    s.v.push_back(read_matrix(is));
  }
  return s;
}

inline void write_rng(std::ostream& os, const std::mt19937_64& rng) {
  std::ostringstream text;
  text << rng;
  write_string(os, text.str());
}

inline std::mt19937_64 read_rng(std::istream& is) {
  std::istringstream text(read_string(is));
  std::mt19937_64 rng;
  text >> rng;
  if (!text) throw ConfigError("checkpoint: corrupt RNG state");
  return rng;
}

}  // namespace io

}  // namespace satoffload

#endif  // SATOFFLOAD_NEURAL_HPP_
