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

#include "pillarrank/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <omp.h>

#include "pillarrank/errors.hpp"

namespace pillarrank {

void set_thread_count(int threads) {
  if (threads > 0) omp_set_num_threads(threads);
}

int thread_count() { return omp_get_max_threads(); }

std::vector<std::uint32_t> top_indices(std::span<const double> scores, std::size_t depth) {
  depth = std::min(depth, scores.size());
  std::vector<std::uint32_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0u);
  auto better = [&](std::uint32_t a, std::uint32_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(depth), idx.end(),
                    better);
  idx.resize(depth);
  return idx;
}

RankIndex::RankIndex(const SimilarityStore& store, std::size_t depth, Exec exec)
    : requested_(depth) {
  for (Modality target : {Modality::Image, Modality::Text}) {
    width_[static_cast<int>(target)] = std::min(depth, store.size(target));
  }
  for (Modality q : {Modality::Image, Modality::Text}) {
    for (Modality target : {Modality::Image, Modality::Text}) {
      const std::size_t width = width_[static_cast<int>(target)];
      auto& list = lists_[static_cast<int>(q)][static_cast<int>(target)];
      list.assign(store.size(q) * width, 0);
      kernels::for_each_index(store.size(q), exec, [&](std::size_t i) {
        const EntityId e{q, static_cast<std::uint32_t>(i)};
        const auto top = top_indices(store.scores(e, target), width);
        std::copy(top.begin(), top.end(), list.begin() + static_cast<std::ptrdiff_t>(i * width));
      });
    }
  }
}

std::span<const std::uint32_t> RankIndex::top(EntityId e, Modality target) const {
  const std::size_t width = width_[static_cast<int>(target)];
  const auto& list = lists_[static_cast<int>(e.modality)][static_cast<int>(target)];
  return {list.data() + static_cast<std::size_t>(e.index) * width, width};
}

namespace kernels {

Matrix cosine(const Matrix& a, const Matrix& b, Exec exec) {
  if (a.cols() != b.cols()) {
    throw InputError("cosine: dimension mismatch (" + std::to_string(a.cols()) + " vs " +
                     std::to_string(b.cols()) + ")");
  }
  auto norms = [](const Matrix& m, const char* side) {
    Eigen::VectorXd n = m.rowwise().norm();
    for (Eigen::Index i = 0; i < n.size(); ++i) {
      if (!(n[i] > 0.0)) {
        throw InputError(std::string("degenerate embedding: zero-norm row ") + std::to_string(i) +
                         " in " + side + " set");
      }
    }
    return n;
  };
  const Eigen::VectorXd na = norms(a, "left");
  const Eigen::VectorXd nb = norms(b, "right");
  Matrix out(a.rows(), b.rows());
  for_each_index(static_cast<std::size_t>(a.rows()), exec, [&](std::size_t i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      const double c = a.row(r).dot(b.row(j)) / (na[r] * nb[j]);
      out(r, j) = std::clamp(c, -1.0, 1.0);
    }
  });
  return out;
}

}  // namespace kernels

Matrix cosine_similarity_matrix(const EmbeddingSet& a, const EmbeddingSet& b, Exec exec) {
  return kernels::cosine(a.rows, b.rows, exec);
}

}  // namespace pillarrank
