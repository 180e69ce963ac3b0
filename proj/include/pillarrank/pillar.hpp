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
#include <span>
#include <string_view>
#include <vector>

#include "pillarrank/data_model.hpp"
#include "pillarrank/kernels.hpp"

namespace pillarrank {

enum class PillarStrategy { TopRanked, BottomRanked, Random, InterOnly, IntraOnly };

std::string_view to_string(PillarStrategy s);
PillarStrategy parse_pillar_strategy(std::string_view s);

/// Reference entities that span a query's pillar space. `inter` holds
/// entities of the opposite modality, `intra` of the query's own modality.
/// InterOnly/IntraOnly leave the other block empty; it encodes as zeros so
/// the width stays 2L.
struct PillarSet {
  std::vector<EntityId> inter;
  std::vector<EntityId> intra;
  PillarStrategy strategy = PillarStrategy::TopRanked;
  std::size_t per_block = 0;

  std::size_t width() const { return 2 * per_block; }
};

/// Picks L pillars per block from the query's rankings. `index` is an
/// optional shortcut for TopRanked/InterOnly/IntraOnly (must have depth
/// >= L); without it the rankings are computed from the store.
PillarSet select_pillars(EntityId query, const SimilarityStore& store, std::size_t per_block,
                         PillarStrategy strategy, std::uint64_t seed = 0,
                         const RankIndex* index = nullptr);

/// Similarities of `e` to every pillar: cross-modal score when the
/// modalities differ, intra-modal otherwise. Missing blocks are zero.
std::vector<double> encode_entity(EntityId e, const PillarSet& pillars,
                                  const SimilarityStore& store);

/// Stacked encodings of the query (row 0) and its neighbors. Every column
/// refers to the same pillar in every row.
struct PillarFeatureMatrix {
  Matrix rows;
  PillarSet axis;
};

PillarFeatureMatrix build_feature_matrix(EntityId query, std::span<const EntityId> neighbors,
                                         const PillarSet& pillars, const SimilarityStore& store);

}  // namespace pillarrank
