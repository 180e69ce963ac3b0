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

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "pillarrank/types.hpp"

namespace pillarrank::ad {

/// Handle to a node on a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Matrix-valued reverse-mode tape. Nodes are appended in evaluation order
/// and differentiated in reverse. A node tracks gradients only if one of
/// its inputs does, so inference runs build no backward closures.
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Matrix& out_grad)>;

  Var constant(Matrix value);
  /// Leaf that records a gradient. `value` is borrowed and must outlive
  /// the tape.
  Var parameter(const Matrix& value, std::string name);
  /// Owned leaf that records a gradient.
  Var variable(Matrix value, std::string name);

  /// Appends an interior node. `backward` may be empty when no input
  /// requires a gradient.
  Var push(Matrix value, bool requires_grad, Backward backward);

  const Matrix& value(Var v) const;
  double scalar(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  const std::string& name(Var v) const { return nodes_[v.id].name; }

  /// Gradient accumulated at `v` by the last backward(); zero matrix of the
  /// right shape if nothing flowed there.
  Matrix grad(Var v) const;

  /// Adds `g` into the gradient slot of `v` (no-op for untracked nodes).
  void accumulate(Var v, const Matrix& g);

  /// Seeds d(output)/d(output) = 1 for a 1x1 output and propagates. Leaf
  /// gradients are then checked; a non-finite entry raises NumericError
  /// naming the tensor.
  void backward(Var output);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix owned;
    const Matrix* borrowed = nullptr;
    Matrix grad;
    bool has_grad = false;
    bool requires_grad = false;
    bool leaf = false;
    std::string name;
    Backward backward;
  };

  std::vector<Node> nodes_;
};

// Differentiable operations. Shapes follow Eigen conventions; all throw
// std::invalid_argument on mismatched shapes.

Var matmul(Tape& t, Var a, Var b);     // a * b
Var matmul_nt(Tape& t, Var a, Var b);  // a * b^T
Var add(Tape& t, Var a, Var b);
Var add_row(Tape& t, Var x, Var row);  // x + broadcast 1xN row
Var scale(Tape& t, Var x, double s);
Var relu(Tape& t, Var x);
Var square(Tape& t, Var x);
Var sum(Tape& t, Var x);
/// Softmax over each row, max-subtracted.
Var row_softmax(Tape& t, Var x);
/// Cosine of row 0 against rows 1..n-1, as a 1x(n-1) row. A zero-norm row
/// yields -1 with zero gradient; `degenerate` counts such rows.
Var cosine_to_first_row(Tape& t, Var x, std::size_t* degenerate = nullptr);

}  // namespace pillarrank::ad
