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
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "pillarrank/data_model.hpp"

namespace pillarrank {

struct RecallResult {
  double percent = 0.0;
  std::size_t evaluated = 0;
  /// Queries without any relevant item in the ground truth; not counted.
  std::size_t excluded = 0;
};

/// Percentage of queries with at least one relevant item in the top k.
RecallResult recall_at_k(std::span<const RankingList> rankings, const GroundTruth& truth,
                         std::size_t k);

struct DirectionReport {
  double r1 = 0.0;
  double r5 = 0.0;
  double r10 = 0.0;
  std::size_t evaluated = 0;
  std::size_t excluded = 0;
};

DirectionReport evaluate_direction(std::span<const RankingList> rankings,
                                   const GroundTruth& truth);

double rsum(double i2t_r1, double i2t_r5, double i2t_r10, double t2i_r1, double t2i_r5,
            double t2i_r10);

struct EvalReport {
  DirectionReport i2t;
  DirectionReport t2i;
  double rsum = 0.0;

  static EvalReport from(const DirectionReport& i2t, const DirectionReport& t2i);

  /// Flat key=value block, full precision.
  std::string to_key_values() const;
  nlohmann::json to_json() const;
  /// Human-readable table, one decimal place.
  std::string to_table(const std::string& label) const;
};

/// Side-by-side table of two reports with per-metric deltas.
std::string comparison_table(const EvalReport& base, const EvalReport& refined);

}  // namespace pillarrank
