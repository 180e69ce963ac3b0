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

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "pillarrank/data_model.hpp"
#include "pillarrank/kernels.hpp"

namespace pillarrank::testing {

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng,
                            double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

/// Store whose similarities are cosines of random embeddings, so the intra
/// tables are symmetric with unit diagonal.
inline SimilarityStore random_store(std::size_t images, std::size_t texts, std::uint64_t seed,
                                    Eigen::Index dim = 6) {
  std::mt19937_64 rng(seed);
  const Matrix a = random_matrix(static_cast<Eigen::Index>(images), dim, rng);
  const Matrix b = random_matrix(static_cast<Eigen::Index>(texts), dim, rng);
  Matrix ii = kernels::cosine(a, a, Exec::Serial);
  Matrix tt = kernels::cosine(b, b, Exec::Serial);
  for (Eigen::Index i = 0; i < ii.rows(); ++i)
    for (Eigen::Index j = 0; j < i; ++j) ii(i, j) = ii(j, i);
  for (Eigen::Index i = 0; i < tt.rows(); ++i)
    for (Eigen::Index j = 0; j < i; ++j) tt(i, j) = tt(j, i);
  return SimilarityStore(kernels::cosine(a, b, Exec::Serial), ii, tt, "random");
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() /
           ("pillarrank_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace pillarrank::testing
