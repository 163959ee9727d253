// Copyright 2026 The ssmd Authors
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

#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace ssmd::ad {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Handle to a node on a Tape.
struct Var {
  int id = -1;
};

/// Contiguous row ranges that form independent attention groups.
struct Segment {
  int offset = 0;
  int length = 0;
};

/// Reverse-mode tape over row-major matrices. Nodes are appended in
/// evaluation order; backward() walks them in reverse. Each op captures what
/// it needs for its vector-Jacobian product.
class Tape {
 public:
  explicit Tape(bool record = true) : record_(record) {}

  /// Leaf holding a copy of `value`. Gradients accumulate when requires_grad.
  Var leaf(const Matrix& value, bool requires_grad = true);

  const Matrix& value(Var v) const { return nodes_[idx(v)]->value; }
  /// Accumulated gradient, or an empty matrix when none reached this node.
  const Matrix& grad(Var v) const { return nodes_[idx(v)]->grad; }
  int size() const noexcept { return static_cast<int>(nodes_.size()); }

  /// out[r] = table[rows[r]]
  Var gather_rows(Var table, std::vector<int> rows);
  Var add(Var a, Var b);
  /// Adds a 1 x C row vector to every row.
  Var add_row(Var a, Var row);
  Var matmul(Var a, Var b);
  Var scale(Var a, double s);
  /// Row-wise layer norm with per-column gain and bias (1 x C each).
  Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
  /// tanh-approximated GELU.
  Var gelu(Var x);
  Var concat_cols(Var a, Var b);
  Var concat_rows(Var a, Var b);
  /// Multi-head scaled dot-product attention. qkv has 3C columns laid out
  /// [q | k | v]; each segment attends only within itself, and causally
  /// (row k of a segment sees rows <= k) when `causal` is set.
  Var attention(Var qkv, std::vector<Segment> segments, int heads, bool causal);
  /// sum_r weights[r] * -log softmax(logits[r])[targets[r]], as a 1 x 1 node.
  Var weighted_nll(Var logits, std::vector<int> targets, std::vector<double> weights);

  /// Seeds d(out)/d(out) = 1 for a 1 x 1 node and propagates.
  void backward(Var out);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    std::function<void(Node&)> backprop;
  };

  std::size_t idx(Var v) const { return static_cast<std::size_t>(v.id); }
  Node& node(Var v) { return *nodes_[idx(v)]; }
  Var push(Matrix value, bool requires_grad, std::function<void(Node&)> backprop);
  bool needs(Var v) const { return record_ && nodes_[idx(v)]->requires_grad; }
  Matrix& grad_of(Var v);
  /// grad(v) += e, assigning instead when no gradient has arrived yet.
  template <class Expr>
  void accumulate(Var v, const Expr& e) {
    Matrix& g = nodes_[idx(v)]->grad;
    if (g.size() == 0) {
      g = e;
    } else {
      g += e;
    }
  }
  template <class Expr>
  void accumulate_product(Var v, const Expr& e) {
    Matrix& g = nodes_[idx(v)]->grad;
    if (g.size() == 0) {
      g.noalias() = e;
    } else {
      g.noalias() += e;
    }
  }

  bool record_;
  std::vector<std::unique_ptr<Node>> nodes_;
};

/// Row-wise softmax.
Matrix softmax_rows(const Matrix& logits);

}  // namespace ssmd::ad
