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

#include "ssmd/autodiff.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace ssmd::ad {
namespace {

void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) +
                                "x" + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                                "x" + std::to_string(b.cols()));
  }
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;

using RowArray = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    out.row(r) = (logits.row(r).array() - m).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

Var Tape::push(Matrix value, bool requires_grad, std::function<void(Node&)> backprop) {
  auto n = std::make_unique<Node>();
  n->value = std::move(value);
  n->requires_grad = record_ && requires_grad;
  if (n->requires_grad) n->backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Matrix& Tape::grad_of(Var v) {
  Node& n = node(v);
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

Var Tape::leaf(const Matrix& value, bool requires_grad) {
  return push(value, requires_grad, nullptr);
}

Var Tape::gather_rows(Var table, std::vector<int> rows) {
  const Matrix& t = value(table);
  Matrix out(static_cast<Eigen::Index>(rows.size()), t.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || rows[r] >= t.rows()) throw std::out_of_range("gather_rows: row index out of range");
    out.row(static_cast<Eigen::Index>(r)) = t.row(rows[r]);
  }
  return push(std::move(out), needs(table), [this, table, rows = std::move(rows)](Node& self) {
    Matrix& g = grad_of(table);
    for (std::size_t r = 0; r < rows.size(); ++r) g.row(rows[r]) += self.grad.row(static_cast<Eigen::Index>(r));
  });
}

Var Tape::add(Var a, Var b) {
  check_same_shape(value(a), value(b), "add");
  Matrix out = value(a) + value(b);
  return push(std::move(out), needs(a) || needs(b), [this, a, b](Node& self) {
    if (needs(a)) accumulate(a, self.grad);
    if (needs(b)) accumulate(b, self.grad);
  });
}

Var Tape::add_row(Var a, Var row) {
  const Matrix& x = value(a);
  const Matrix& r = value(row);
  if (r.rows() != 1 || r.cols() != x.cols()) throw std::invalid_argument("add_row: bias shape mismatch");
  Matrix out = x.rowwise() + r.row(0);
  return push(std::move(out), needs(a) || needs(row), [this, a, row](Node& self) {
    if (needs(a)) accumulate(a, self.grad);
    if (needs(row)) accumulate(row, self.grad.colwise().sum());
  });
}

Var Tape::matmul(Var a, Var b) {
  const Matrix& x = value(a);
  const Matrix& y = value(b);
  if (x.cols() != y.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
  Matrix out = x * y;
  return push(std::move(out), needs(a) || needs(b), [this, a, b](Node& self) {
    if (needs(a)) accumulate_product(a, self.grad * value(b).transpose());
    if (needs(b)) accumulate_product(b, value(a).transpose() * self.grad);
  });
}

Var Tape::scale(Var a, double s) {
  Matrix out = value(a) * s;
  return push(std::move(out), needs(a), [this, a, s](Node& self) { accumulate(a, self.grad * s); });
}

Var Tape::layer_norm(Var x, Var gain, Var bias, double eps) {
  const Matrix& in = value(x);
  const Eigen::Index n = in.rows();
  const Eigen::Index c = in.cols();
  if (value(gain).size() != c || value(bias).size() != c) {
    throw std::invalid_argument("layer_norm: gain/bias width mismatch");
  }
  Matrix xhat(n, c);
  Eigen::VectorXd inv_std(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double mu = in.row(r).mean();
    const double var = (in.row(r).array() - mu).square().mean();
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (in.row(r).array() - mu) * inv_std[r];
  }
  Matrix out = (xhat.array().rowwise() * value(gain).row(0).array()).matrix();
  out.rowwise() += value(bias).row(0);
  const bool req = needs(x) || needs(gain) || needs(bias);
  return push(std::move(out), req,
              [this, x, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
                const Matrix& dy = self.grad;
                if (needs(gain)) accumulate(gain, (dy.array() * xhat.array()).colwise().sum().matrix());
                if (needs(bias)) accumulate(bias, dy.colwise().sum());
                if (!needs(x)) return;
                const Matrix dxhat = (dy.array().rowwise() * value(gain).row(0).array()).matrix();
                Matrix& gx = grad_of(x);
                const double inv_c = 1.0 / static_cast<double>(dxhat.cols());
                for (Eigen::Index r = 0; r < dxhat.rows(); ++r) {
                  const double m1 = dxhat.row(r).sum() * inv_c;
                  const double m2 = dxhat.row(r).dot(xhat.row(r)) * inv_c;
                  gx.row(r).array() +=
                      inv_std[r] * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
                }
              });
}

Var Tape::gelu(Var x) {
  const Matrix& in = value(x);
  // tanh(u) = 1 - 2 / (exp(2u) + 1) keeps the evaluation vectorized.
  const RowArray v = in.array();
  const RowArray u = (kGeluC * (v + kGeluA * v.cube())).min(40.0).max(-40.0);
  RowArray t = 1.0 - 2.0 / ((2.0 * u).exp() + 1.0);
  Matrix out = (0.5 * v * (1.0 + t)).matrix();
  return push(std::move(out), needs(x), [this, x, t = std::move(t)](Node& self) {
    const RowArray v = value(x).array();
    const RowArray d =
        0.5 * (1.0 + t) + 0.5 * v * (1.0 - t.square()) * kGeluC * (1.0 + 3.0 * kGeluA * v.square());
    accumulate(x, (self.grad.array() * d).matrix());
  });
}

Var Tape::concat_cols(Var a, Var b) {
  const Matrix& x = value(a);
  const Matrix& y = value(b);
  if (x.rows() != y.rows()) throw std::invalid_argument("concat_cols: row count mismatch");
  Matrix out(x.rows(), x.cols() + y.cols());
  out << x, y;
  const Eigen::Index ca = x.cols();
  const Eigen::Index cb = y.cols();
  return push(std::move(out), needs(a) || needs(b), [this, a, b, ca, cb](Node& self) {
    if (needs(a)) accumulate(a, self.grad.leftCols(ca));
    if (needs(b)) accumulate(b, self.grad.rightCols(cb));
  });
}

Var Tape::concat_rows(Var a, Var b) {
  const Matrix& x = value(a);
  const Matrix& y = value(b);
  if (x.cols() != y.cols()) throw std::invalid_argument("concat_rows: column count mismatch");
  Matrix out(x.rows() + y.rows(), x.cols());
  out << x, y;
  const Eigen::Index ra = x.rows();
  const Eigen::Index rb = y.rows();
  return push(std::move(out), needs(a) || needs(b), [this, a, b, ra, rb](Node& self) {
    if (needs(a)) accumulate(a, self.grad.topRows(ra));
    if (needs(b)) accumulate(b, self.grad.bottomRows(rb));
  });
}

Var Tape::attention(Var qkv, std::vector<Segment> segments, int heads, bool causal) {
  const Matrix& in = value(qkv);
  if (heads < 1 || in.cols() % (3 * heads) != 0) {
    throw std::invalid_argument("attention: qkv width must be a multiple of 3 * heads");
  }
  const Eigen::Index c = in.cols() / 3;
  const Eigen::Index dh = c / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Matrix out = Matrix::Zero(in.rows(), c);
  // Attention weights per (segment, head), kept for the backward pass.
  auto probs = std::make_shared<std::vector<Matrix>>();
  probs->reserve(segments.size() * static_cast<std::size_t>(heads));
  for (const Segment& s : segments) {
    if (s.offset < 0 || s.length < 0 || s.offset + s.length > in.rows()) {
      throw std::out_of_range("attention: segment outside the input rows");
    }
    for (int h = 0; h < heads; ++h) {
      const auto q = in.block(s.offset, h * dh, s.length, dh);
      const auto k = in.block(s.offset, c + h * dh, s.length, dh);
      const auto v = in.block(s.offset, 2 * c + h * dh, s.length, dh);
      Matrix scores = (q * k.transpose()) * scale;
      if (causal) {
        for (int r = 0; r < s.length; ++r) {
          for (int col = r + 1; col < s.length; ++col) {
            scores(r, col) = -std::numeric_limits<double>::infinity();
          }
        }
      }
      Matrix p = softmax_rows(scores);
      out.block(s.offset, h * dh, s.length, dh).noalias() = p * v;
      probs->push_back(std::move(p));
    }
  }
  return push(std::move(out), needs(qkv),
              [this, qkv, segments = std::move(segments), heads, c, dh, scale, probs](Node& self) {
                const Matrix& in = value(qkv);
                Matrix& g = grad_of(qkv);
                std::size_t n = 0;
                for (const Segment& s : segments) {
                  for (int h = 0; h < heads; ++h, ++n) {
                    const Matrix& p = (*probs)[n];
                    const auto q = in.block(s.offset, h * dh, s.length, dh);
                    const auto k = in.block(s.offset, c + h * dh, s.length, dh);
                    const auto v = in.block(s.offset, 2 * c + h * dh, s.length, dh);
                    const auto dout = self.grad.block(s.offset, h * dh, s.length, dh);
                    g.block(s.offset, 2 * c + h * dh, s.length, dh).noalias() += p.transpose() * dout;
                    const Matrix dp = dout * v.transpose();
                    const Eigen::VectorXd row_dot = (dp.array() * p.array()).rowwise().sum();
                    Matrix ds = (p.array() * (dp.colwise() - row_dot).array()).matrix() * scale;
                    g.block(s.offset, h * dh, s.length, dh).noalias() += ds * k;
                    g.block(s.offset, c + h * dh, s.length, dh).noalias() += ds.transpose() * q;
                  }
                }
              });
}

Var Tape::weighted_nll(Var logits, std::vector<int> targets, std::vector<double> weights) {
  const Matrix& z = value(logits);
  if (static_cast<Eigen::Index>(targets.size()) != z.rows() || targets.size() != weights.size()) {
    throw std::invalid_argument("weighted_nll: targets/weights must match logit rows");
  }
  Matrix p = softmax_rows(z);
  double loss = 0.0;
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const int y = targets[static_cast<std::size_t>(r)];
    if (y < 0 || y >= z.cols()) throw std::out_of_range("weighted_nll: target outside logits");
    const double m = z.row(r).maxCoeff();
    const double lse = m + std::log((z.row(r).array() - m).exp().sum());
    loss += weights[static_cast<std::size_t>(r)] * (lse - z(r, y));
  }
  Matrix out(1, 1);
  out(0, 0) = loss;
  return push(std::move(out), needs(logits),
              [this, logits, targets = std::move(targets), weights = std::move(weights),
               p = std::move(p)](Node& self) {
                const double up = self.grad(0, 0);
                Matrix& g = grad_of(logits);
                for (Eigen::Index r = 0; r < p.rows(); ++r) {
                  const double w = weights[static_cast<std::size_t>(r)] * up;
                  if (w == 0.0) continue;
                  g.row(r) += w * p.row(r);
                  g(r, targets[static_cast<std::size_t>(r)]) -= w;
                }
              });
}

void Tape::backward(Var out) {
  if (!record_) throw std::logic_error("backward on a tape that does not record");
  Node& top = node(out);
  if (top.value.size() != 1) throw std::invalid_argument("backward needs a scalar output");
  if (!top.requires_grad) return;
  top.grad = Matrix::Ones(1, 1);
  for (int k = out.id; k >= 0; --k) {
    Node& n = *nodes_[static_cast<std::size_t>(k)];
    if (n.backprop && n.grad.size() != 0) n.backprop(n);
  }
}

}  // namespace ssmd::ad
