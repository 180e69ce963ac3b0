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

#include <cstddef>
#include <cstdint>
#include <exception>
#include <span>
#include <vector>

#include "pillarrank/data_model.hpp"

namespace pillarrank {

/// Worker cap for the Parallel policy; 0 leaves the OpenMP default.
void set_thread_count(int threads);
int thread_count();

/// Indices of the `depth` highest scores, descending, ties by ascending
/// index. Equivalent to the first `depth` items of rank_row.
std::vector<std::uint32_t> top_indices(std::span<const double> scores, std::size_t depth);

/// Precomputed top-`depth` lists of every entity in all four directions
/// (I->I, I->T, T->T, T->I). Immutable once built.
class RankIndex {
 public:
  RankIndex() = default;
  RankIndex(const SimilarityStore& store, std::size_t depth, Exec exec = Exec::Parallel);

  /// First min(depth, |target|) items of the ranking of `e` over `target`.
  std::span<const std::uint32_t> top(EntityId e, Modality target) const;

  std::size_t depth(Modality target) const {
    return width_[static_cast<int>(target)];
  }
  /// Depth requested at construction, before truncation to database sizes.
  std::size_t requested_depth() const { return requested_; }

  friend bool operator==(const RankIndex&, const RankIndex&) = default;

 private:
  // lists_[query modality][target modality], row-major with width_[target].
  std::vector<std::uint32_t> lists_[2][2];
  std::size_t width_[2] = {0, 0};
  std::size_t requested_ = 0;
};

namespace kernels {

/// Row-parallel cosine matrix. The Serial path is the reference.
Matrix cosine(const Matrix& a, const Matrix& b, Exec exec);

/// Runs `body(i)` for i in [0, n). Each index must write only its own slot.
/// An exception from the lowest failing index is rethrown after the loop,
/// matching what the serial path would have thrown first.
template <typename Body>
void for_each_index(std::size_t n, Exec exec, Body&& body) {
  if (exec == Exec::Serial) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  const auto count = static_cast<std::int64_t>(n);
  std::exception_ptr first;
  std::int64_t first_index = count;
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(pillarrank_for_each_index)
      if (i < first_index) {
        first_index = i;
        first = std::current_exception();
      }
    }
  }
  if (first) std::rethrow_exception(first);
}

}  // namespace kernels
}  // namespace pillarrank
