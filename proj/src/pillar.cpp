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

#include "pillarrank/pillar.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "pillarrank/errors.hpp"
#include "pillarrank/random.hpp"

namespace pillarrank {

std::string_view to_string(PillarStrategy s) {
  switch (s) {
    case PillarStrategy::TopRanked: return "top";
    case PillarStrategy::BottomRanked: return "bottom";
    case PillarStrategy::Random: return "random";
    case PillarStrategy::InterOnly: return "inter-only";
    case PillarStrategy::IntraOnly: return "intra-only";
  }
  return "?";
}

PillarStrategy parse_pillar_strategy(std::string_view s) {
  for (auto v : {PillarStrategy::TopRanked, PillarStrategy::BottomRanked, PillarStrategy::Random,
                 PillarStrategy::InterOnly, PillarStrategy::IntraOnly}) {
    if (s == to_string(v)) return v;
  }
  throw ConfigError("unknown pillar strategy '" + std::string(s) +
                    "' (top, bottom, random, inter-only, intra-only)");
}

namespace {

std::vector<EntityId> as_ids(Modality m, std::span<const std::uint32_t> idx) {
  std::vector<EntityId> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back({m, i});
  return out;
}

std::vector<EntityId> top_block(EntityId query, Modality target, std::size_t count,
                                const SimilarityStore& store, const RankIndex* index) {
  if (index && index->depth(target) >= count) {
    return as_ids(target, index->top(query, target).first(count));
  }
  return as_ids(target, top_indices(store.scores(query, target), count));
}

std::vector<EntityId> bottom_block(EntityId query, Modality target, std::size_t count,
                                   const SimilarityStore& store) {
  const auto full = top_indices(store.scores(query, target), store.size(target));
  return as_ids(target, std::span(full).last(count));
}

std::vector<EntityId> random_block(EntityId query, Modality target, std::size_t count,
                                   const SimilarityStore& store, std::uint64_t seed) {
  std::vector<std::uint32_t> population(store.size(target));
  std::iota(population.begin(), population.end(), 0u);
  std::vector<std::uint32_t> picked;
  picked.reserve(count);
  std::mt19937_64 rng(mix_seed(seed, key(query), static_cast<std::uint64_t>(target)));
  std::sample(population.begin(), population.end(), std::back_inserter(picked), count, rng);
  return as_ids(target, picked);
}

}  // namespace

PillarSet select_pillars(EntityId query, const SimilarityStore& store, std::size_t per_block,
                         PillarStrategy strategy, std::uint64_t seed, const RankIndex* index) {
  store.check(query);
  const Modality same = query.modality;
  const Modality cross = other(same);
  if (per_block == 0) throw ConfigError("pillar count L must be positive");
  if (per_block > store.size(same) || per_block > store.size(cross)) {
    throw ConfigError("pillar count L=" + std::to_string(per_block) +
                      " exceeds a database size (" + std::to_string(store.num_images()) +
                      " images, " + std::to_string(store.num_texts()) + " texts)");
  }
  PillarSet p;
  p.strategy = strategy;
  p.per_block = per_block;
  switch (strategy) {
    case PillarStrategy::TopRanked:
      p.inter = top_block(query, cross, per_block, store, index);
      p.intra = top_block(query, same, per_block, store, index);
      break;
    case PillarStrategy::InterOnly:
      p.inter = top_block(query, cross, per_block, store, index);
      break;
    case PillarStrategy::IntraOnly:
      p.intra = top_block(query, same, per_block, store, index);
      break;
    case PillarStrategy::BottomRanked:
      p.inter = bottom_block(query, cross, per_block, store);
      p.intra = bottom_block(query, same, per_block, store);
      break;
    case PillarStrategy::Random:
      p.inter = random_block(query, cross, per_block, store, seed);
      p.intra = random_block(query, same, per_block, store, seed);
      break;
  }
  return p;
}

std::vector<double> encode_entity(EntityId e, const PillarSet& pillars,
                                  const SimilarityStore& store) {
  store.check(e);
  std::vector<double> v(pillars.width(), 0.0);
  for (std::size_t i = 0; i < pillars.inter.size(); ++i) {
    v[i] = store.similarity(e, pillars.inter[i]);
  }
  for (std::size_t j = 0; j < pillars.intra.size(); ++j) {
    v[pillars.per_block + j] = store.similarity(e, pillars.intra[j]);
  }
  return v;
}

PillarFeatureMatrix build_feature_matrix(EntityId query, std::span<const EntityId> neighbors,
                                         const PillarSet& pillars, const SimilarityStore& store) {
  PillarFeatureMatrix f;
  f.axis = pillars;
  f.rows.resize(static_cast<Eigen::Index>(neighbors.size() + 1),
                static_cast<Eigen::Index>(pillars.width()));
  auto put = [&](Eigen::Index r, EntityId e) {
    const auto v = encode_entity(e, pillars, store);
    for (std::size_t c = 0; c < v.size(); ++c) f.rows(r, static_cast<Eigen::Index>(c)) = v[c];
  };
  put(0, query);
  for (std::size_t k = 0; k < neighbors.size(); ++k) {
    put(static_cast<Eigen::Index>(k + 1), neighbors[k]);
  }
  return f;
}

}  // namespace pillarrank
