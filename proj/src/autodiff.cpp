// Copyright 2026 The pillarrank Authors
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

#include "pillarrank/autodiff.hpp"

#include <stdexcept>

#include "pillarrank/errors.hpp"

namespace pillarrank::ad {

namespace {

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require(bool ok, const char* op, const Matrix& a, const Matrix& b) {
  if (!ok) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape(a) + " vs " +
                                shape(b));
  }
}

}  // namespace

Var Tape::constant(Matrix value) {
  Node n;
  n.owned = std::move(value);
  n.leaf = true;
  nodes_.push_back(std::move(n));
  return {static_cast<int>(nodes_.size() - 1)};
}

Var Tape::parameter(const Matrix& value, std::string name) {
  Node n;
  n.borrowed = &value;
  n.requires_grad = true;
  n.leaf = true;
  n.name = std::move(name);
  nodes_.push_back(std::move(n));
  return {static_cast<int>(nodes_.size() - 1)};
}

Var Tape::variable(Matrix value, std::string name) {
  Node n;
  n.owned = std::move(value);
  n.requires_grad = true;
  n.leaf = true;
  n.name = std::move(name);
  nodes_.push_back(std::move(n));
  return {static_cast<int>(nodes_.size() - 1)};
}

Var Tape::push(Matrix value, bool requires_grad, Backward backward) {
  Node n;
  n.owned = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return {static_cast<int>(nodes_.size() - 1)};
}

const Matrix& Tape::value(Var v) const {
  const Node& n = nodes_.at(static_cast<std::size_t>(v.id));
  return n.borrowed ? *n.borrowed : n.owned;
}

double Tape::scalar(Var v) const {
  const Matrix& m = value(v);
  if (m.size() != 1) throw std::invalid_argument("scalar(): node is " + shape(m));
  return m(0, 0);
}

Matrix Tape::grad(Var v) const {
  const Node& n = nodes_.at(static_cast<std::size_t>(v.id));
  if (n.has_grad) return n.grad;
  const Matrix& val = value(v);
  return Matrix::Zero(val.rows(), val.cols());
}

void Tape::accumulate(Var v, const Matrix& g) {
  Node& n = nodes_[static_cast<std::size_t>(v.id)];
  if (!n.requires_grad) return;
  if (n.has_grad) {
    n.grad += g;
  } else {
    n.grad = g;
    n.has_grad = true;
  }
}

void Tape::backward(Var output) {
  const Matrix& out = value(output);
  if (out.size() != 1) {
    throw std::invalid_argument("backward(): output must be 1x1, got " + shape(out));
  }
  for (auto& n : nodes_) {
    n.has_grad = false;
    n.grad.resize(0, 0);
  }
  accumulate(output, Matrix::Ones(1, 1));
  for (int i = output.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.has_grad || !n.backward) continue;
    // Copy: the closure may push into other nodes' gradient slots.
    const Matrix g = n.grad;
    n.backward(*this, g);
  }
  for (const auto& n : nodes_) {
    if (n.leaf && n.requires_grad && n.has_grad && !n.grad.allFinite()) {
      throw NumericError("non-finite gradient in tensor '" + n.name + "'");
    }
  }
}

Var matmul(Tape& t, Var a, Var b) {
  const Matrix& A = t.value(a);
  const Matrix& B = t.value(b);
  require(A.cols() == B.rows(), "matmul", A, B);
  const bool rg = t.requires_grad(a) || t.requires_grad(b);
  Tape::Backward bw;
  if (rg) {
    bw = [a, b](Tape& tp, const Matrix& g) {
      if (tp.requires_grad(a)) tp.accumulate(a, g * tp.value(b).transpose());
      if (tp.requires_grad(b)) tp.accumulate(b, tp.value(a).transpose() * g);
    };
  }
  return t.push(A * B, rg, std::move(bw));
}

Var matmul_nt(Tape& t, Var a, Var b) {
  const Matrix& A = t.value(a);
  const Matrix& B = t.value(b);
  require(A.cols() == B.cols(), "matmul_nt", A, B);
  const bool rg = t.requires_grad(a) || t.requires_grad(b);
  Tape::Backward bw;
  if (rg) {
    bw = [a, b](Tape& tp, const Matrix& g) {
      if (tp.requires_grad(a)) tp.accumulate(a, g * tp.value(b));
      if (tp.requires_grad(b)) tp.accumulate(b, g.transpose() * tp.value(a));
    };
  }
  return t.push(A * B.transpose(), rg, std::move(bw));
}

Var add(Tape& t, Var a, Var b) {
  const Matrix& A = t.value(a);
  const Matrix& B = t.value(b);
  require(A.rows() == B.rows() && A.cols() == B.cols(), "add", A, B);
  const bool rg = t.requires_grad(a) || t.requires_grad(b);
  Tape::Backward bw;
  if (rg) {
    bw = [a, b](Tape& tp, const Matrix& g) {
      tp.accumulate(a, g);
      tp.accumulate(b, g);
    };
  }
  return t.push(A + B, rg, std::move(bw));
}

Var add_row(Tape& t, Var x, Var row) {
  const Matrix& X = t.value(x);
  const Matrix& R = t.value(row);
  require(R.rows() == 1 && R.cols() == X.cols(), "add_row", X, R);
  const bool rg = t.requires_grad(x) || t.requires_grad(row);
  Tape::Backward bw;
  if (rg) {
    bw = [x, row](Tape& tp, const Matrix& g) {
      tp.accumulate(x, g);
      if (tp.requires_grad(row)) tp.accumulate(row, g.colwise().sum());
    };
  }
  Matrix out = X.rowwise() + R.row(0);
  return t.push(std::move(out), rg, std::move(bw));
}

Var scale(Tape& t, Var x, double s) {
  const bool rg = t.requires_grad(x);
  Tape::Backward bw;
  if (rg) bw = [x, s](Tape& tp, const Matrix& g) { tp.accumulate(x, s * g); };
  return t.push(s * t.value(x), rg, std::move(bw));
}

Var relu(Tape& t, Var x) {
  const Matrix& X = t.value(x);
  const bool rg = t.requires_grad(x);
  Tape::Backward bw;
  if (rg) {
    // Subgradient 0 at the kink.
    bw = [x](Tape& tp, const Matrix& g) {
      const Matrix& in = tp.value(x);
      tp.accumulate(x, (in.array() > 0.0).select(g, 0.0));
    };
  }
  return t.push(X.cwiseMax(0.0), rg, std::move(bw));
}

Var square(Tape& t, Var x) {
  const bool rg = t.requires_grad(x);
  Tape::Backward bw;
  if (rg) {
    bw = [x](Tape& tp, const Matrix& g) {
      tp.accumulate(x, (2.0 * tp.value(x).array() * g.array()).matrix());
    };
  }
  return t.push(t.value(x).array().square().matrix(), rg, std::move(bw));
}

Var sum(Tape& t, Var x) {
  const Matrix& X = t.value(x);
  const bool rg = t.requires_grad(x);
  Tape::Backward bw;
  if (rg) {
    bw = [x](Tape& tp, const Matrix& g) {
      const Matrix& in = tp.value(x);
      tp.accumulate(x, Matrix::Constant(in.rows(), in.cols(), g(0, 0)));
    };
  }
  Matrix out(1, 1);
  out(0, 0) = X.sum();
  return t.push(std::move(out), rg, std::move(bw));
}

Var row_softmax(Tape& t, Var x) {
  const Matrix& X = t.value(x);
  Matrix Y(X.rows(), X.cols());
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    const double m = X.row(r).maxCoeff();
    Y.row(r) = (X.row(r).array() - m).exp().matrix();
    Y.row(r) /= Y.row(r).sum();
  }
  const bool rg = t.requires_grad(x);
  Tape::Backward bw;
  if (rg) {
    bw = [x, Y](Tape& tp, const Matrix& g) {
      Matrix dx(Y.rows(), Y.cols());
      for (Eigen::Index r = 0; r < Y.rows(); ++r) {
        const double dot = g.row(r).dot(Y.row(r));
        dx.row(r) = (Y.row(r).array() * (g.row(r).array() - dot)).matrix();
      }
      tp.accumulate(x, dx);
    };
  }
  return t.push(std::move(Y), rg, std::move(bw));
}

Var cosine_to_first_row(Tape& t, Var x, std::size_t* degenerate) {
  const Matrix& X = t.value(x);
  if (X.rows() < 1) throw std::invalid_argument("cosine_to_first_row: empty matrix");
  const Eigen::Index k = X.rows() - 1;
  Eigen::VectorXd norms = X.rowwise().norm();
  Matrix s(1, k);
  std::size_t bad = 0;
  for (Eigen::Index i = 0; i < k; ++i) {
    const double denom = norms[0] * norms[i + 1];
    if (denom > 0.0) {
      s(0, i) = X.row(0).dot(X.row(i + 1)) / denom;
    } else {
      s(0, i) = -1.0;
      ++bad;
    }
  }
  if (degenerate) *degenerate += bad;
  const bool rg = t.requires_grad(x);
  Tape::Backward bw;
  if (rg) {
    bw = [x, s, norms](Tape& tp, const Matrix& g) {
      const Matrix& in = tp.value(x);
      Matrix dx = Matrix::Zero(in.rows(), in.cols());
      const double n0 = norms[0];
      for (Eigen::Index i = 0; i < s.cols(); ++i) {
        const double ni = norms[i + 1];
        if (!(n0 * ni > 0.0)) continue;
        const double gi = g(0, i);
        const double si = s(0, i);
        dx.row(i + 1) += gi * (in.row(0) / (n0 * ni) - si * in.row(i + 1) / (ni * ni));
        dx.row(0) += gi * (in.row(i + 1) / (n0 * ni) - si * in.row(0) / (n0 * n0));
      }
      tp.accumulate(x, dx);
    };
  }
  return t.push(std::move(s), rg, std::move(bw));
}

}  // namespace pillarrank::ad
