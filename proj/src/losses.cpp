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

#include "pillarrank/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "pillarrank/errors.hpp"

namespace pillarrank {

namespace {

std::span<const double> row_span(const Matrix& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}

void check_mask(std::span<const double> s, const std::vector<bool>& positive) {
  if (s.size() != positive.size()) {
    throw std::invalid_argument("positive mask length does not match score count");
  }
}

// log sum exp over the selected entries (all when `mask` is null).
double log_sum_exp(std::span<const double> s, double tau, const std::vector<bool>* mask) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!mask || (*mask)[i]) m = std::max(m, s[i] / tau);
  }
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!mask || (*mask)[i]) acc += std::exp(s[i] / tau - m);
  }
  return m + std::log(acc);
}

// Index of the lowest-scoring positive, first on ties. -1 if none.
std::ptrdiff_t hardest_positive(std::span<const double> s, const std::vector<bool>& positive) {
  std::ptrdiff_t h = -1;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (positive[i] && (h < 0 || s[i] < s[static_cast<std::size_t>(h)])) {
      h = static_cast<std::ptrdiff_t>(i);
    }
  }
  return h;
}

}  // namespace

std::vector<double> softmax(std::span<const double> x, double tau) {
  std::vector<double> out(x.size());
  if (x.empty()) return out;
  double m = -std::numeric_limits<double>::infinity();
  for (double v : x) m = std::max(m, v / tau);
  double z = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = std::exp(x[i] / tau - m);
    z += out[i];
  }
  for (double& v : out) v /= z;
  return out;
}

double contrastive_loss(std::span<const double> scores, const std::vector<bool>& positive,
                        double tau) {
  check_mask(scores, positive);
  if (std::none_of(positive.begin(), positive.end(), [](bool b) { return b; })) {
    throw InputError("contrastive loss needs at least one positive");
  }
  const double all = log_sum_exp(scores, tau, nullptr);
  const double pos = log_sum_exp(scores, tau, &positive);
  return std::max(0.0, all - pos);
}

double triplet_loss(std::span<const double> scores, const std::vector<bool>& positive,
                    double margin) {
  check_mask(scores, positive);
  const auto h = hardest_positive(scores, positive);
  if (h < 0) throw InputError("triplet loss needs at least one positive");
  const double anchor = scores[static_cast<std::size_t>(h)];
  double loss = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!positive[i]) loss += std::max(0.0, margin - anchor + scores[i]);
  }
  return loss;
}

double alignment_loss(std::span<const double> query_scores,
                      std::span<const double> mirrored_scores, double tau) {
  if (query_scores.size() != mirrored_scores.size()) {
    throw std::invalid_argument("alignment loss: score sequences differ in length");
  }
  const double lp = log_sum_exp(query_scores, tau, nullptr);
  const double lq = log_sum_exp(mirrored_scores, tau, nullptr);
  double kl = 0.0;
  for (std::size_t i = 0; i < query_scores.size(); ++i) {
    const double log_p = query_scores[i] / tau - lp;
    const double log_q = mirrored_scores[i] / tau - lq;
    kl += std::exp(log_p) * (log_p - log_q);
  }
  return std::max(0.0, kl);
}

namespace ad {

Var contrastive_loss(Tape& t, Var scores, const std::vector<bool>& positive, double tau) {
  const Matrix& s = t.value(scores);
  Matrix out(1, 1);
  out(0, 0) = pillarrank::contrastive_loss(row_span(s), positive, tau);
  const bool rg = t.requires_grad(scores);
  Tape::Backward bw;
  if (rg) {
    bw = [scores, positive, tau](Tape& tp, const Matrix& g) {
      const auto sv = row_span(tp.value(scores));
      const double all = log_sum_exp(sv, tau, nullptr);
      const double pos = log_sum_exp(sv, tau, &positive);
      Matrix d(1, static_cast<Eigen::Index>(sv.size()));
      for (std::size_t j = 0; j < sv.size(); ++j) {
        const double p_all = std::exp(sv[j] / tau - all);
        const double p_pos = positive[j] ? std::exp(sv[j] / tau - pos) : 0.0;
        d(0, static_cast<Eigen::Index>(j)) = g(0, 0) * (p_all - p_pos) / tau;
      }
      tp.accumulate(scores, d);
    };
  }
  return t.push(std::move(out), rg, std::move(bw));
}

Var triplet_loss(Tape& t, Var scores, const std::vector<bool>& positive, double margin) {
  const Matrix& s = t.value(scores);
  Matrix out(1, 1);
  out(0, 0) = pillarrank::triplet_loss(row_span(s), positive, margin);
  const bool rg = t.requires_grad(scores);
  Tape::Backward bw;
  if (rg) {
    bw = [scores, positive, margin](Tape& tp, const Matrix& g) {
      const auto sv = row_span(tp.value(scores));
      const auto h = static_cast<std::size_t>(hardest_positive(sv, positive));
      Matrix d = Matrix::Zero(1, static_cast<Eigen::Index>(sv.size()));
      for (std::size_t i = 0; i < sv.size(); ++i) {
        // Hinge subgradient is 0 at the kink.
        if (!positive[i] && margin - sv[h] + sv[i] > 0.0) {
          d(0, static_cast<Eigen::Index>(i)) += g(0, 0);
          d(0, static_cast<Eigen::Index>(h)) -= g(0, 0);
        }
      }
      tp.accumulate(scores, d);
    };
  }
  return t.push(std::move(out), rg, std::move(bw));
}

Var alignment_loss(Tape& t, Var query_scores, Var mirrored_scores, double tau) {
  const Matrix& a = t.value(query_scores);
  const Matrix& b = t.value(mirrored_scores);
  if (a.size() != b.size()) {
    throw std::invalid_argument("alignment loss: score rows differ in length");
  }
  Matrix out(1, 1);
  out(0, 0) = pillarrank::alignment_loss(row_span(a), row_span(b), tau);
  const bool rg = t.requires_grad(query_scores) || t.requires_grad(mirrored_scores);
  Tape::Backward bw;
  if (rg) {
    bw = [query_scores, mirrored_scores, tau](Tape& tp, const Matrix& g) {
      const auto av = row_span(tp.value(query_scores));
      const auto bv = row_span(tp.value(mirrored_scores));
      const double lp = log_sum_exp(av, tau, nullptr);
      const double lq = log_sum_exp(bv, tau, nullptr);
      const auto n = static_cast<Eigen::Index>(av.size());
      Matrix log_p(1, n), log_q(1, n);
      for (Eigen::Index i = 0; i < n; ++i) {
        log_p(0, i) = av[static_cast<std::size_t>(i)] / tau - lp;
        log_q(0, i) = bv[static_cast<std::size_t>(i)] / tau - lq;
      }
      const Matrix p = log_p.array().exp().matrix();
      const Matrix q = log_q.array().exp().matrix();
      const double kl = (p.array() * (log_p - log_q).array()).sum();
      if (tp.requires_grad(query_scores)) {
        tp.accumulate(query_scores,
                      (g(0, 0) / tau) * (p.array() * (log_p - log_q).array() - p.array() * kl)
                                            .matrix());
      }
      if (tp.requires_grad(mirrored_scores)) {
        tp.accumulate(mirrored_scores, (g(0, 0) / tau) * (q - p));
      }
    };
  }
  return t.push(std::move(out), rg, std::move(bw));
}

}  // namespace ad
}  // namespace pillarrank
