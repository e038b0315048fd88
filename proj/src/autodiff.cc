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

#include "invhls/autodiff.h"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "invhls/errors.h"

namespace invhls {
namespace {

std::string ShapeStr(const Matrix& m) {
  return "(" + std::to_string(m.rows()) + "," + std::to_string(m.cols()) + ")";
}

Tape& SameTape(Var a, Var b, const char* op) {
  if (a.tape() == nullptr || a.tape() != b.tape()) {
    throw std::logic_error(std::string(op) + ": operands from different tapes");
  }
  return *a.tape();
}

void RequireSameShape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + ShapeStr(a) + " vs " +
                     ShapeStr(b));
  }
}

template <typename Fwd, typename Deriv>
Var Unary(Var a, Fwd fwd, Deriv deriv) {
  Tape& t = *a.tape();
  Matrix out = a.value().unaryExpr(fwd);
  const std::size_t ai = a.index();
  return t.Record(std::move(out), {ai}, [ai, deriv](Tape& t, std::size_t self) {
    const Matrix& x = t.value(ai);
    const Matrix& y = t.value(self);
    Matrix d(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      d.data()[i] = deriv(x.data()[i], y.data()[i]);
    }
    t.AccumulateExpr(ai, t.grad(self).cwiseProduct(d));
  });
}

void CheckIndices(std::span<const int> idx, Eigen::Index bound, const char* op) {
  for (int i : idx) {
    if (i < 0 || i >= bound) {
      throw ShapeError(std::string(op) + ": index " + std::to_string(i) +
                       " out of range " + std::to_string(bound));
    }
  }
}

}  // namespace

const Matrix& Var::value() const { return tape_->value(index_); }
const Matrix& Var::grad() const { return tape_->grad(index_); }

void Tape::EnsureGrad(Node& n) {
  if (!n.has_grad) {
    n.grad.setZero(n.value.rows(), n.value.cols());
    n.has_grad = true;
  }
}

const Matrix& Tape::grad(std::size_t i) const {
  Node& n = const_cast<Node&>(nodes_[i]);
  EnsureGrad(n);
  return n.grad;
}

Matrix& Tape::grad_slot(std::size_t i) {
  EnsureGrad(nodes_[i]);
  return nodes_[i].grad;
}

void Tape::Accumulate(std::size_t i, const Matrix& delta) { AccumulateExpr(i, delta); }

Var Tape::Constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::Leaf(Matrix value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::Param(Parameter& p) {
  Node n;
  n.value = p.value;
  n.requires_grad = true;
  n.param = &p;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::Record(Matrix value, std::vector<std::size_t> inputs, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  for (std::size_t i : inputs) n.requires_grad = n.requires_grad || nodes_[i].requires_grad;
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

void Tape::Backward(Var root) {
  if (root.tape() != this) throw std::logic_error("Backward: root from another tape");
  if (backward_done_) {
    throw std::logic_error("Backward: tape already differentiated; rebuild the forward pass");
  }
  const Matrix& rv = value(root.index());
  if (rv.rows() != 1 || rv.cols() != 1) {
    throw ShapeError("Backward: root must be scalar, got " + ShapeStr(rv));
  }
  backward_done_ = true;
  grad_slot(root.index())(0, 0) += 1.0;
  for (std::size_t i = root.index() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.has_grad && n.backward) n.backward(*this, i);
  }
  for (Node& n : nodes_) {
    if (n.param != nullptr && n.has_grad) {
      if (n.param->grad.rows() != n.value.rows() || n.param->grad.cols() != n.value.cols()) {
        n.param->grad.setZero(n.value.rows(), n.value.cols());
      }
      n.param->grad += n.grad;
    }
  }
}

Var Matmul(Var a, Var b) {
  Tape& t = SameTape(a, b, "Matmul");
  if (a.cols() != b.rows()) {
    throw ShapeError("Matmul: inner dimensions differ " + ShapeStr(a.value()) + " x " +
                     ShapeStr(b.value()));
  }
  Matrix out;
  out.noalias() = a.value() * b.value();
  const std::size_t ai = a.index(), bi = b.index();
  return t.Record(std::move(out), {ai, bi}, [ai, bi](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(ai)) t.grad_slot(ai).noalias() += g * t.value(bi).transpose();
    if (t.requires_grad(bi)) t.grad_slot(bi).noalias() += t.value(ai).transpose() * g;
  });
}

Var Add(Var a, Var b) {
  Tape& t = SameTape(a, b, "Add");
  RequireSameShape(a.value(), b.value(), "Add");
  const std::size_t ai = a.index(), bi = b.index();
  return t.Record(a.value() + b.value(), {ai, bi}, [ai, bi](Tape& t, std::size_t self) {
    t.AccumulateExpr(ai, t.grad(self));
    t.AccumulateExpr(bi, t.grad(self));
  });
}

Var Sub(Var a, Var b) {
  Tape& t = SameTape(a, b, "Sub");
  RequireSameShape(a.value(), b.value(), "Sub");
  const std::size_t ai = a.index(), bi = b.index();
  return t.Record(a.value() - b.value(), {ai, bi}, [ai, bi](Tape& t, std::size_t self) {
    t.AccumulateExpr(ai, t.grad(self));
    t.AccumulateExpr(bi, -t.grad(self));
  });
}

Var Mul(Var a, Var b) {
  Tape& t = SameTape(a, b, "Mul");
  RequireSameShape(a.value(), b.value(), "Mul");
  const std::size_t ai = a.index(), bi = b.index();
  return t.Record(a.value().cwiseProduct(b.value()), {ai, bi},
                  [ai, bi](Tape& t, std::size_t self) {
                    const Matrix& g = t.grad(self);
                    t.AccumulateExpr(ai, g.cwiseProduct(t.value(bi)));
                    t.AccumulateExpr(bi, g.cwiseProduct(t.value(ai)));
                  });
}

Var AddRow(Var a, Var row) {
  Tape& t = SameTape(a, row, "AddRow");
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw ShapeError("AddRow: expected a (1," + std::to_string(a.cols()) + ") row, got " +
                     ShapeStr(row.value()));
  }
  Matrix out = a.value().rowwise() + row.value().row(0);
  const std::size_t ai = a.index(), ri = row.index();
  return t.Record(std::move(out), {ai, ri}, [ai, ri](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    t.AccumulateExpr(ai, g);
    if (t.requires_grad(ri)) t.grad_slot(ri) += g.colwise().sum();
  });
}

Var MulRow(Var a, Var row) {
  Tape& t = SameTape(a, row, "MulRow");
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw ShapeError("MulRow: expected a (1," + std::to_string(a.cols()) + ") row, got " +
                     ShapeStr(row.value()));
  }
  Matrix out = a.value().array().rowwise() * row.value().row(0).array();
  const std::size_t ai = a.index(), ri = row.index();
  return t.Record(std::move(out), {ai, ri}, [ai, ri](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(ai)) {
      t.grad_slot(ai).array() += g.array().rowwise() * t.value(ri).row(0).array();
    }
    if (t.requires_grad(ri)) {
      t.grad_slot(ri) += g.cwiseProduct(t.value(ai)).colwise().sum();
    }
  });
}

Var MulCol(Var a, Var col) {
  Tape& t = SameTape(a, col, "MulCol");
  if (col.cols() != 1 || col.rows() != a.rows()) {
    throw ShapeError("MulCol: expected a (" + std::to_string(a.rows()) + ",1) column, got " +
                     ShapeStr(col.value()));
  }
  Matrix out = a.value().array().colwise() * col.value().col(0).array();
  const std::size_t ai = a.index(), ci = col.index();
  return t.Record(std::move(out), {ai, ci}, [ai, ci](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(ai)) {
      t.grad_slot(ai).array() += g.array().colwise() * t.value(ci).col(0).array();
    }
    if (t.requires_grad(ci)) {
      t.grad_slot(ci) += g.cwiseProduct(t.value(ai)).rowwise().sum();
    }
  });
}

Var Transpose(Var a) {
  Tape& t = *a.tape();
  Matrix out = a.value().transpose();
  const std::size_t ai = a.index();
  return t.Record(std::move(out), {ai}, [ai](Tape& t, std::size_t self) {
    t.AccumulateExpr(ai, t.grad(self).transpose());
  });
}

Var Scale(Var a, double s) {
  Tape& t = *a.tape();
  const std::size_t ai = a.index();
  return t.Record(a.value() * s, {ai}, [ai, s](Tape& t, std::size_t self) {
    t.AccumulateExpr(ai, t.grad(self) * s);
  });
}

Var AddScalar(Var a, double s) {
  Tape& t = *a.tape();
  const std::size_t ai = a.index();
  Matrix out = a.value().array() + s;
  return t.Record(std::move(out), {ai}, [ai](Tape& t, std::size_t self) {
    t.AccumulateExpr(ai, t.grad(self));
  });
}

Var ConcatCols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("ConcatCols: no operands");
  Tape& t = *parts[0].tape();
  const Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  std::vector<std::size_t> inputs;
  std::vector<Eigen::Index> widths;
  for (const Var& p : parts) {
    SameTape(parts[0], p, "ConcatCols");
    if (p.rows() != rows) {
      throw ShapeError("ConcatCols: row counts differ " + ShapeStr(parts[0].value()) +
                       " vs " + ShapeStr(p.value()));
    }
    inputs.push_back(p.index());
    widths.push_back(p.cols());
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Eigen::Index off = 0;
  for (const Var& p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    off += p.cols();
  }
  return t.Record(std::move(out), inputs, [inputs, widths](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Eigen::Index off = 0;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      if (t.requires_grad(inputs[k])) t.grad_slot(inputs[k]) += g.middleCols(off, widths[k]);
      off += widths[k];
    }
  });
}

Var BroadcastRows(Var row, Eigen::Index n) {
  if (row.rows() != 1) throw ShapeError("BroadcastRows: expected one row, got " + ShapeStr(row.value()));
  Tape& t = *row.tape();
  Matrix out = row.value().replicate(n, 1);
  const std::size_t ri = row.index();
  return t.Record(std::move(out), {ri}, [ri](Tape& t, std::size_t self) {
    if (t.requires_grad(ri)) t.grad_slot(ri) += t.grad(self).colwise().sum();
  });
}

Var MeanRows(Var a) {
  if (a.rows() == 0) throw ShapeError("MeanRows: empty input");
  Tape& t = *a.tape();
  const std::size_t ai = a.index();
  const double inv = 1.0 / double(a.rows());
  Matrix out = a.value().colwise().mean();
  return t.Record(std::move(out), {ai}, [ai, inv](Tape& t, std::size_t self) {
    if (!t.requires_grad(ai)) return;
    t.grad_slot(ai).rowwise() += t.grad(self).row(0) * inv;
  });
}

Var Sum(Var a) {
  Tape& t = *a.tape();
  const std::size_t ai = a.index();
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return t.Record(std::move(out), {ai}, [ai](Tape& t, std::size_t self) {
    if (t.requires_grad(ai)) t.grad_slot(ai).array() += t.grad(self)(0, 0);
  });
}

Var Mean(Var a) {
  if (a.value().size() == 0) throw ShapeError("Mean: empty input");
  return Scale(Sum(a), 1.0 / double(a.value().size()));
}

Var Softmax(Var a) {
  Tape& t = *a.tape();
  const Matrix& x = a.value();
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mx = x.row(r).maxCoeff();
    y.row(r) = (x.row(r).array() - mx).exp();
    y.row(r) /= y.row(r).sum();
  }
  const std::size_t ai = a.index();
  return t.Record(std::move(y), {ai}, [ai](Tape& t, std::size_t self) {
    if (!t.requires_grad(ai)) return;
    const Matrix& y = t.value(self);
    const Matrix& g = t.grad(self);
    Matrix d(y.rows(), y.cols());
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      const double dot = g.row(r).dot(y.row(r));
      d.row(r) = y.row(r).cwiseProduct((g.row(r).array() - dot).matrix());
    }
    t.grad_slot(ai) += d;
  });
}

Var LeakyRelu(Var a, double slope) {
  return Unary(
      a, [slope](double x) { return x > 0.0 ? x : slope * x; },
      [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Var Relu(Var a) {
  return Unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var Elu(Var a) {
  return Unary(
      a, [](double x) { return x >= 0.0 ? x : std::expm1(x); },
      [](double x, double y) { return x >= 0.0 ? 1.0 : y + 1.0; });
}

Var Exp(Var a) {
  return Unary(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var Log(Var a) {
  return Unary(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var Square(Var a) {
  return Unary(
      a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var Sqrt(Var a) {
  return Unary(
      a, [](double x) { return std::sqrt(x); }, [](double, double y) { return 0.5 / y; });
}

Var Softplus(Var a) {
  return Unary(
      a,
      [](double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); },
      [](double x, double) { return 1.0 / (1.0 + std::exp(-x)); });
}

Var GatherRows(Var a, std::span<const int> idx) {
  CheckIndices(idx, a.rows(), "GatherRows");
  Tape& t = *a.tape();
  const Matrix& x = a.value();
  Matrix out(Eigen::Index(idx.size()), x.cols());
  for (std::size_t e = 0; e < idx.size(); ++e) out.row(e) = x.row(idx[e]);
  const std::size_t ai = a.index();
  std::vector<int> keep(idx.begin(), idx.end());
  return t.Record(std::move(out), {ai}, [ai, keep = std::move(keep)](Tape& t, std::size_t self) {
    if (!t.requires_grad(ai)) return;
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad_slot(ai);
    for (std::size_t e = 0; e < keep.size(); ++e) ga.row(keep[e]) += g.row(e);
  });
}

Var ScatterAddRows(Var a, std::span<const int> seg, Eigen::Index n) {
  if (Eigen::Index(seg.size()) != a.rows()) {
    throw ShapeError("ScatterAddRows: segment list length differs from row count");
  }
  CheckIndices(seg, n, "ScatterAddRows");
  Tape& t = *a.tape();
  const Matrix& x = a.value();
  Matrix out = Matrix::Zero(n, x.cols());
  for (std::size_t e = 0; e < seg.size(); ++e) out.row(seg[e]) += x.row(e);
  const std::size_t ai = a.index();
  std::vector<int> keep(seg.begin(), seg.end());
  return t.Record(std::move(out), {ai}, [ai, keep = std::move(keep)](Tape& t, std::size_t self) {
    if (!t.requires_grad(ai)) return;
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad_slot(ai);
    for (std::size_t e = 0; e < keep.size(); ++e) ga.row(e) += g.row(keep[e]);
  });
}

Var SegmentMeanRows(Var a, std::span<const int> seg, Eigen::Index n) {
  if (Eigen::Index(seg.size()) != a.rows()) {
    throw ShapeError("SegmentMeanRows: segment list length differs from row count");
  }
  CheckIndices(seg, n, "SegmentMeanRows");
  std::vector<double> count(n, 0.0);
  for (int s : seg) count[s] += 1.0;
  for (double c : count) {
    if (c == 0.0) throw ShapeError("SegmentMeanRows: empty segment");
  }
  Tape& t = *a.tape();
  const Matrix& x = a.value();
  Matrix out = Matrix::Zero(n, x.cols());
  for (std::size_t e = 0; e < seg.size(); ++e) out.row(seg[e]) += x.row(e) / count[seg[e]];
  const std::size_t ai = a.index();
  std::vector<int> keep(seg.begin(), seg.end());
  return t.Record(std::move(out), {ai},
                  [ai, keep = std::move(keep), count = std::move(count)](Tape& t, std::size_t self) {
                    if (!t.requires_grad(ai)) return;
                    const Matrix& g = t.grad(self);
                    Matrix& ga = t.grad_slot(ai);
                    for (std::size_t e = 0; e < keep.size(); ++e) {
                      ga.row(e) += g.row(keep[e]) / count[keep[e]];
                    }
                  });
}

Var SegmentSoftmax(Var scores, std::span<const int> seg, Eigen::Index n) {
  if (scores.cols() != 1 || Eigen::Index(seg.size()) != scores.rows()) {
    throw ShapeError("SegmentSoftmax: expected an (E,1) column matching the segment list, got " +
                     ShapeStr(scores.value()));
  }
  CheckIndices(seg, n, "SegmentSoftmax");
  Tape& t = *scores.tape();
  const Matrix& x = scores.value();
  std::vector<double> mx(n, -std::numeric_limits<double>::infinity()), sum(n, 0.0);
  for (std::size_t e = 0; e < seg.size(); ++e) mx[seg[e]] = std::max(mx[seg[e]], x(e, 0));
  Matrix y(x.rows(), 1);
  for (std::size_t e = 0; e < seg.size(); ++e) {
    y(e, 0) = std::exp(x(e, 0) - mx[seg[e]]);
    sum[seg[e]] += y(e, 0);
  }
  for (std::size_t e = 0; e < seg.size(); ++e) y(e, 0) /= sum[seg[e]];
  const std::size_t si = scores.index();
  std::vector<int> keep(seg.begin(), seg.end());
  return t.Record(std::move(y), {si},
                  [si, n, keep = std::move(keep)](Tape& t, std::size_t self) {
                    if (!t.requires_grad(si)) return;
                    const Matrix& y = t.value(self);
                    const Matrix& g = t.grad(self);
                    std::vector<double> dot(n, 0.0);
                    for (std::size_t e = 0; e < keep.size(); ++e) dot[keep[e]] += g(e, 0) * y(e, 0);
                    Matrix& gs = t.grad_slot(si);
                    for (std::size_t e = 0; e < keep.size(); ++e) {
                      gs(e, 0) += y(e, 0) * (g(e, 0) - dot[keep[e]]);
                    }
                  });
}

Var EdgeAttentionLogits(Var q, Var k, Var e, Var we, Var a, std::span<const int> src,
                        std::span<const int> dst, double slope, bool dynamic) {
  const Eigen::Index d = q.cols(), c = e.cols(), edges = e.rows();
  if (k.rows() != q.rows() || k.cols() != d || we.rows() != c || we.cols() != d ||
      a.rows() != d || a.cols() != 1 || Eigen::Index(src.size()) != edges ||
      Eigen::Index(dst.size()) != edges) {
    throw ShapeError("EdgeAttentionLogits: q " + ShapeStr(q.value()) + ", k " +
                     ShapeStr(k.value()) + ", e " + ShapeStr(e.value()) + ", we " +
                     ShapeStr(we.value()) + ", a " + ShapeStr(a.value()));
  }
  CheckIndices(src, q.rows(), "EdgeAttentionLogits");
  CheckIndices(dst, q.rows(), "EdgeAttentionLogits");
  Tape& t = *q.tape();
  const Matrix& Q = q.value();
  const Matrix& K = k.value();
  const Matrix& E = e.value();
  const Matrix& W = we.value();
  const Eigen::VectorXd A = a.value().col(0);
  Matrix out(edges, 1);
  Eigen::RowVectorXd s(d);
  for (Eigen::Index i = 0; i < edges; ++i) {
    s = Q.row(dst[i]) + K.row(src[i]) + E.row(i) * W;
    if (dynamic) {
      double acc = 0.0;
      for (Eigen::Index j = 0; j < d; ++j) acc += A[j] * (s[j] > 0.0 ? s[j] : slope * s[j]);
      out(i, 0) = acc;
    } else {
      const double z = s.dot(A);
      out(i, 0) = z > 0.0 ? z : slope * z;
    }
  }
  const std::size_t qi = q.index(), ki = k.index(), ei = e.index(), wi = we.index(),
                    ai = a.index();
  std::vector<int> s_keep(src.begin(), src.end()), d_keep(dst.begin(), dst.end());
  return t.Record(
      std::move(out), {qi, ki, ei, wi, ai},
      [=, s_keep = std::move(s_keep), d_keep = std::move(d_keep)](Tape& t, std::size_t self) {
        const Matrix& g = t.grad(self);
        const Matrix& Q = t.value(qi);
        const Matrix& K = t.value(ki);
        const Matrix& E = t.value(ei);
        const Matrix& W = t.value(wi);
        const Eigen::VectorXd A = t.value(ai).col(0);
        Matrix dW = Matrix::Zero(W.rows(), W.cols());
        Eigen::VectorXd dA = Eigen::VectorXd::Zero(d);
        Matrix* gq = t.requires_grad(qi) ? &t.grad_slot(qi) : nullptr;
        Matrix* gk = t.requires_grad(ki) ? &t.grad_slot(ki) : nullptr;
        Matrix* ge = t.requires_grad(ei) ? &t.grad_slot(ei) : nullptr;
        Eigen::RowVectorXd s(d), ds(d);
        for (Eigen::Index i = 0; i < Eigen::Index(s_keep.size()); ++i) {
          const double gi = g(i, 0);
          if (gi == 0.0) continue;
          s = Q.row(d_keep[i]) + K.row(s_keep[i]) + E.row(i) * W;
          if (dynamic) {
            for (Eigen::Index j = 0; j < d; ++j) {
              const bool pos = s[j] > 0.0;
              ds[j] = gi * A[j] * (pos ? 1.0 : slope);
              dA[j] += gi * (pos ? s[j] : slope * s[j]);
            }
          } else {
            const double z = s.dot(A);
            const double dz = gi * (z > 0.0 ? 1.0 : slope);
            ds = dz * A.transpose();
            dA += dz * s.transpose();
          }
          if (gq) gq->row(d_keep[i]) += ds;
          if (gk) gk->row(s_keep[i]) += ds;
          if (ge) ge->row(i) += ds * W.transpose();
          dW.noalias() += E.row(i).transpose() * ds;
        }
        t.AccumulateExpr(wi, dW);
        t.AccumulateExpr(ai, dA);
      });
}

Var WeightedAggregate(Var w, Var v, std::span<const int> src, std::span<const int> dst,
                      Eigen::Index n) {
  if (w.cols() != 1 || Eigen::Index(src.size()) != w.rows() ||
      Eigen::Index(dst.size()) != w.rows()) {
    throw ShapeError("WeightedAggregate: weights " + ShapeStr(w.value()) +
                     " do not match the edge list");
  }
  CheckIndices(src, v.rows(), "WeightedAggregate");
  CheckIndices(dst, n, "WeightedAggregate");
  Tape& t = SameTape(w, v, "WeightedAggregate");
  const Matrix& W = w.value();
  const Matrix& V = v.value();
  Matrix out = Matrix::Zero(n, V.cols());
  for (std::size_t e = 0; e < src.size(); ++e) out.row(dst[e]) += W(Eigen::Index(e), 0) * V.row(src[e]);
  const std::size_t wi = w.index(), vi = v.index();
  std::vector<int> s_keep(src.begin(), src.end()), d_keep(dst.begin(), dst.end());
  return t.Record(std::move(out), {wi, vi},
                  [wi, vi, s_keep = std::move(s_keep), d_keep = std::move(d_keep)](
                      Tape& t, std::size_t self) {
                    const Matrix& g = t.grad(self);
                    const Matrix& W = t.value(wi);
                    const Matrix& V = t.value(vi);
                    Matrix* gw = t.requires_grad(wi) ? &t.grad_slot(wi) : nullptr;
                    Matrix* gv = t.requires_grad(vi) ? &t.grad_slot(vi) : nullptr;
                    for (std::size_t e = 0; e < s_keep.size(); ++e) {
                      const Eigen::Index r = Eigen::Index(e);
                      if (gw) (*gw)(r, 0) += g.row(d_keep[e]).dot(V.row(s_keep[e]));
                      if (gv) gv->row(s_keep[e]) += W(r, 0) * g.row(d_keep[e]);
                    }
                  });
}

AdamState MakeAdam(std::span<Parameter* const> params, AdamOptions options) {
  AdamState s;
  s.options = options;
  for (const Parameter* p : params) {
    s.m.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    s.v.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
  return s;
}

void AdamStep(AdamState& state, std::span<Parameter* const> params) {
  if (params.size() != state.m.size()) {
    throw ShapeError("AdamStep: parameter count differs from optimizer state");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Parameter& p = *params[i];
    if (p.value.rows() != state.m[i].rows() || p.value.cols() != state.m[i].cols() ||
        p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols()) {
      throw ShapeError("AdamStep: shape mismatch for parameter '" + p.name + "' " +
                       ShapeStr(p.value) + " vs state " + ShapeStr(state.m[i]));
    }
  }
  const AdamOptions& o = state.options;
  ++state.step;
  const double c1 = 1.0 - std::pow(o.beta1, double(state.step));
  const double c2 = 1.0 - std::pow(o.beta2, double(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    state.m[i] = o.beta1 * state.m[i] + (1.0 - o.beta1) * p.grad;
    state.v[i] = o.beta2 * state.v[i] + (1.0 - o.beta2) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= o.lr * (state.m[i].array() / c1) /
                       ((state.v[i].array() / c2).sqrt() + o.eps);
  }
}

}  // namespace invhls
