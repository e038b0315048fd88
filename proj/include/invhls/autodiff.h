// Copyright 2026 The invhls Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef INVHLS_AUTODIFF_H_
#define INVHLS_AUTODIFF_H_

// Tape-based reverse-mode differentiation over dense row-major matrices, plus
// the graph gather/scatter primitives needed for attention and ADAM.
//
// A Tape records every primitive applied during one forward build. Calling
// Backward() on a 1x1 result walks the tape once in reverse, accumulating
// gradients into every node that requires them and into the bound Parameters.

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "invhls/matrix.h"

namespace invhls {

// A trainable array living outside any tape.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)),
        grad(Matrix::Zero(value.rows(), value.cols())) {}
  void ZeroGrad() { grad.setZero(value.rows(), value.cols()); }
};

class Tape;

// Handle to a tape node. Cheap to copy; valid while its tape lives.
class Var {
 public:
  Var() = default;
  const Matrix& value() const;
  // Gradient of the backward root with respect to this node (zeros if the
  // node did not take part).
  const Matrix& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
  Tape* tape() const { return tape_; }
  std::size_t index() const { return index_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t index) : tape_(tape), index_(index) {}
  Tape* tape_ = nullptr;
  std::size_t index_ = 0;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Value that never receives gradient.
  Var Constant(Matrix value);
  // Differentiable input; read its gradient through Var::grad().
  Var Leaf(Matrix value);
  // Differentiable input whose gradient is added to p.grad on Backward().
  Var Param(Parameter& p);

  // Throws ShapeError for a non-scalar root and std::logic_error when called
  // twice on the same tape.
  void Backward(Var root);

  std::size_t size() const { return nodes_.size(); }

  // Primitive construction; used by the op functions below.
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;
  Var Record(Matrix value, std::vector<std::size_t> inputs, BackwardFn backward);
  const Matrix& value(std::size_t i) const { return nodes_[i].value; }
  const Matrix& grad(std::size_t i) const;
  bool requires_grad(std::size_t i) const { return nodes_[i].requires_grad; }
  // Adds delta to the gradient slot of node i when it requires gradient.
  void Accumulate(std::size_t i, const Matrix& delta);
  template <typename Expr>
  void AccumulateExpr(std::size_t i, const Expr& delta) {
    Node& n = nodes_[i];
    if (!n.requires_grad) return;
    EnsureGrad(n);
    n.grad += delta;
  }
  Matrix& grad_slot(std::size_t i);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    bool has_grad = false;
    BackwardFn backward;
    Parameter* param = nullptr;
  };
  static void EnsureGrad(Node& n);

  std::deque<Node> nodes_;
  bool backward_done_ = false;
};

// Elementwise and linear-algebra primitives. All inputs must share one tape.
Var Matmul(Var a, Var b);
Var Add(Var a, Var b);
Var Sub(Var a, Var b);
Var Mul(Var a, Var b);                    // elementwise
Var AddRow(Var a, Var row);               // a + broadcast of a 1 x c row
Var MulRow(Var a, Var row);               // a * broadcast of a 1 x c row
Var MulCol(Var a, Var col);               // a * broadcast of an r x 1 column
Var Transpose(Var a);
Var Scale(Var a, double s);
Var AddScalar(Var a, double s);
Var ConcatCols(std::span<const Var> parts);
Var BroadcastRows(Var row, Eigen::Index n);  // 1 x c -> n x c
Var MeanRows(Var a);                      // r x c -> 1 x c
Var Sum(Var a);                           // -> 1 x 1
Var Mean(Var a);                          // -> 1 x 1
Var Softmax(Var a);                       // row-wise
Var LeakyRelu(Var a, double slope);
Var Relu(Var a);
Var Elu(Var a);
Var Exp(Var a);
Var Log(Var a);
Var Square(Var a);
Var Sqrt(Var a);
Var Softplus(Var a);

// Graph primitives. idx entries are row positions.
Var GatherRows(Var a, std::span<const int> idx);  // out[e] = a[idx[e]]
// out[s] = sum of rows e with seg[e] == s; out has n rows.
Var ScatterAddRows(Var a, std::span<const int> seg, Eigen::Index n);
// Segment-wise mean; segments must be nonempty.
Var SegmentMeanRows(Var a, std::span<const int> seg, Eigen::Index n);
// Softmax of an E x 1 column within each segment.
Var SegmentSoftmax(Var scores, std::span<const int> seg, Eigen::Index n);

// Attention logits of edges (src -> dst) without materializing per-edge
// hidden rows: with s_e = q[dst_e] + k[src_e] + e_e * we, the logit is
// a^T LeakyReLU(s_e) when dynamic and LeakyReLU(a^T s_e) otherwise.
// q, k: n x d; e: E x c; we: c x d; a: d x 1. Returns E x 1.
Var EdgeAttentionLogits(Var q, Var k, Var e, Var we, Var a, std::span<const int> src,
                        std::span<const int> dst, double slope, bool dynamic);
// out[dst_e] += w_e * v[src_e]; w: E x 1, v: n x d. Returns n x d.
Var WeightedAggregate(Var w, Var v, std::span<const int> src, std::span<const int> dst,
                      Eigen::Index n);

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamOptions options;
  std::vector<Matrix> m, v;
  long step = 0;
};

AdamState MakeAdam(std::span<Parameter* const> params, AdamOptions options = {});
// One bias-corrected ADAM update from each parameter's grad.
void AdamStep(AdamState& state, std::span<Parameter* const> params);

}  // namespace invhls

#endif  // INVHLS_AUTODIFF_H_
