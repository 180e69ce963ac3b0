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

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <limits>
#include <random>

#include "pillarrank/autodiff.hpp"
#include "pillarrank/errors.hpp"
#include "test_support.hpp"

namespace pillarrank {
namespace {

using Fn = std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>;

double eval(const Fn& f, const std::vector<Matrix>& inputs) {
  ad::Tape t;
  std::vector<ad::Var> v;
  for (const auto& m : inputs) v.push_back(t.constant(m));
  return t.scalar(f(t, v));
}

// Max relative error between reverse-mode and central differences.
double fd_error(const Fn& f, std::vector<Matrix> inputs, double h = 1e-5) {
  ad::Tape t;
  std::vector<ad::Var> v;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    v.push_back(t.parameter(inputs[i], "x" + std::to_string(i)));
  }
  t.backward(f(t, v));
  double worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Matrix g = t.grad(v[i]);
    for (Eigen::Index k = 0; k < inputs[i].size(); ++k) {
      auto perturbed = inputs;
      perturbed[i].data()[k] += h;
      const double up = eval(f, perturbed);
      perturbed[i].data()[k] -= 2 * h;
      const double down = eval(f, perturbed);
      const double num = (up - down) / (2 * h);
      const double ana = g.data()[k];
      const double err = std::abs(num - ana) / std::max(1.0, std::abs(num) + std::abs(ana));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

TEST(Tape, SquareGradient) {
  ad::Tape t;
  Matrix w(1, 1);
  w(0, 0) = 3.0;
  const auto x = t.parameter(w, "w");
  const auto y = ad::sum(t, ad::square(t, x));
  EXPECT_EQ(t.scalar(y), 9.0);
  t.backward(y);
  EXPECT_EQ(t.grad(x)(0, 0), 6.0);
}

TEST(Tape, FlatRegionHasZeroGradient) {
  ad::Tape t;
  Matrix w = Matrix::Constant(2, 3, -1.0);
  const auto x = t.parameter(w, "w");
  const auto y = ad::sum(t, ad::relu(t, x));
  EXPECT_EQ(t.scalar(y), 0.0);
  t.backward(y);
  EXPECT_EQ(t.grad(x), Matrix::Zero(2, 3));
}

TEST(Tape, ConstantsTrackNothing) {
  ad::Tape t;
  const auto c = t.constant(Matrix::Ones(2, 2));
  const auto y = ad::sum(t, ad::matmul(t, c, c));
  EXPECT_FALSE(t.requires_grad(y));
  EXPECT_EQ(t.scalar(y), 8.0);
}

TEST(Tape, NonFiniteGradientNamesTensor) {
  ad::Tape t;
  Matrix w(1, 2);
  w << 1.0, std::numeric_limits<double>::infinity();
  const auto x = t.parameter(w, "layer0.wq");
  const auto y = ad::sum(t, ad::square(t, x));
  try {
    t.backward(y);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("layer0.wq"), std::string::npos);
  }
}

TEST(Tape, ShapeMismatchRejected) {
  ad::Tape t;
  const auto a = t.constant(Matrix::Ones(2, 3));
  const auto b = t.constant(Matrix::Ones(2, 3));
  EXPECT_THROW(ad::matmul(t, a, b), std::invalid_argument);
  EXPECT_THROW(ad::add(t, a, t.constant(Matrix::Ones(3, 2))), std::invalid_argument);
}

TEST(Ops, RowSoftmaxValues) {
  ad::Tape t;
  Matrix x(2, 2);
  x << std::log(3.0), 0.0, 5.0, 5.0;
  const Matrix& y = t.value(ad::row_softmax(t, t.constant(x)));
  EXPECT_NEAR(y(0, 0), 0.75, 1e-12);
  EXPECT_NEAR(y(0, 1), 0.25, 1e-12);
  EXPECT_NEAR(y(1, 0), 0.5, 1e-12);
}

TEST(Ops, CosineToFirstRow) {
  ad::Tape t;
  Matrix x(4, 2);
  x << 1, 0,  //
      1, 1,   //
      0, 3,   //
      0, 0;
  std::size_t degenerate = 0;
  const Matrix& c = t.value(ad::cosine_to_first_row(t, t.constant(x), &degenerate));
  ASSERT_EQ(c.cols(), 3);
  EXPECT_NEAR(c(0, 0), 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(c(0, 1), 0.0, 1e-12);
  EXPECT_EQ(c(0, 2), -1.0);
  EXPECT_EQ(degenerate, 1u);
}

TEST(Ops, FiniteDifferenceAgreement) {
  std::mt19937_64 rng(17);
  auto r = [&](Eigen::Index a, Eigen::Index b) { return testing::random_matrix(a, b, rng); };
  const Matrix a = r(3, 4), b = r(4, 2), c = r(3, 2), row = r(1, 2), d = r(5, 3);

  EXPECT_LT(fd_error([](ad::Tape& t, const auto& v) {
              return ad::sum(t, ad::square(t, ad::matmul(t, v[0], v[1])));
            }, {a, b}), 1e-6);
  EXPECT_LT(fd_error([](ad::Tape& t, const auto& v) {
              return ad::sum(t, ad::square(t, ad::matmul_nt(t, v[0], v[1])));
            }, {a, r(2, 4)}), 1e-6);
  EXPECT_LT(fd_error([](ad::Tape& t, const auto& v) {
              return ad::sum(t, ad::square(t, ad::add_row(t, ad::add(t, v[0], v[1]), v[2])));
            }, {c, r(3, 2), row}), 1e-6);
  EXPECT_LT(fd_error([](ad::Tape& t, const auto& v) {
              return ad::sum(t, ad::scale(t, ad::relu(t, v[0]), -2.5));
            }, {c}), 1e-6);
  EXPECT_LT(fd_error([](ad::Tape& t, const auto& v) {
              const auto s = ad::row_softmax(t, v[0]);
              return ad::sum(t, ad::square(t, ad::matmul(t, s, v[1])));
            }, {r(3, 3), r(3, 2)}), 1e-6);
  EXPECT_LT(fd_error([](ad::Tape& t, const auto& v) {
              return ad::sum(t, ad::square(t, ad::cosine_to_first_row(t, v[0])));
            }, {d}), 1e-6);
}

}  // namespace
}  // namespace pillarrank
