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
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "pillarrank/autodiff.hpp"
#include "pillarrank/data_model.hpp"
#include "pillarrank/kernels.hpp"
#include "pillarrank/pillar.hpp"

namespace pillarrank {

/// Hyperparameters of the re-ranker plus the ablation switches that change
/// its structure or objective. Defaults are the published settings.
struct ModelConfig {
  std::size_t pillars = 64;  // L, per block
  std::size_t k_i2t = 32;
  std::size_t k_t2i = 8;
  std::size_t top_c = 10;  // depth of each merged neighbor set
  double sparse_factor = 0.8;
  std::size_t layers = 2;
  std::size_t hidden = 768;
  std::size_t mlp_hidden = 0;  // 0: same as hidden
  double temperature = 1.0;
  double margin = 0.2;
  double lr = 0.01;
  double momentum = 0.9;
  std::size_t batch = 512;
  std::size_t epochs = 30;

  PillarStrategy pillar_strategy = PillarStrategy::TopRanked;
  bool neighbor_affinity = true;
  bool learned_affinity = true;
  bool contrastive = true;
  bool triplet = true;
  bool mma = true;
  bool train_i2t = true;
  bool train_t2i = true;

  std::size_t k(Direction d) const { return d == Direction::I2T ? k_i2t : k_t2i; }
  std::size_t width() const { return 2 * pillars; }
  std::size_t g_hidden() const { return mlp_hidden == 0 ? hidden : mlp_hidden; }
  bool trains(Direction d) const { return d == Direction::I2T ? train_i2t : train_t2i; }

  /// Throws ConfigError on non-positive sizes, lambda outside [0, 1+K], or
  /// sizes that exceed the store's databases (when given).
  void validate(const SimilarityStore* store = nullptr) const;

  std::map<std::string, std::string> to_key_values() const;
  /// Unknown keys raise ConfigError.
  static ModelConfig from_key_values(const std::map<std::string, std::string>& kv);
};

/// Weights of one propagation layer: f_Q, f_K, f_V (2L -> H) and the
/// two-layer perceptron g (H -> H_mid -> 2L). Biases are 1xN rows.
struct LayerParams {
  Matrix wq, bq;
  Matrix wk, bk;
  Matrix wv, bv;
  Matrix w1, b1;
  Matrix w2, b2;
};

/// Parameters of one direction's submodel.
struct ReRankerParams {
  std::vector<LayerParams> layers;

  /// Uniform fan-in initialization U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for
  /// weights, zeros for biases.
  static ReRankerParams init(const ModelConfig& cfg, std::uint64_t seed);
  static ReRankerParams zeros_like(const ReRankerParams& p);

  /// Visits tensors in a fixed order with names like "layer0.wq".
  void for_each(const std::function<void(const std::string&, Matrix&)>& fn);
  void for_each(const std::function<void(const std::string&, const Matrix&)>& fn) const;

  bool operator==(const ReRankerParams& o) const;
};

/// Both submodels. Tensor names are prefixed "i2t." and "t2i.".
struct ModelParams {
  ReRankerParams i2t;
  ReRankerParams t2i;

  static ModelParams init(const ModelConfig& cfg, std::uint64_t seed);
  static ModelParams zeros_like(const ModelParams& p);

  ReRankerParams& at(Direction d) { return d == Direction::I2T ? i2t : t2i; }
  const ReRankerParams& at(Direction d) const { return d == Direction::I2T ? i2t : t2i; }

  void for_each(const std::function<void(const std::string&, Matrix&)>& fn);
  void for_each(const std::function<void(const std::string&, const Matrix&)>& fn) const;

  bool operator==(const ModelParams& o) const = default;
};

/// Union of the top-C intra-modal and top-C cross-modal neighbors of
/// `node`, as sorted entity keys. C is truncated to the database size.
std::vector<std::uint64_t> merged_neighbor_set(EntityId node, const RankIndex& index,
                                               std::size_t top_c);

/// Row-stochastic common-neighbor affinity with sparsification threshold
/// lambda / n (n = number of nodes). Rows zeroed entirely fall back to a
/// self-loop.
Matrix neighbor_affinity(std::span<const std::vector<std::uint64_t>> sets, double lambda);

/// Row softmax of (F Wq + bq)(F Wk + bk)^T.
Matrix learned_affinity(const Matrix& features, const LayerParams& layer);

/// One query's re-ranking graph: the query plus K neighbors, their pillar
/// features and the neighbor-based affinity (feature independent).
struct Neighborhood {
  EntityId query;
  std::vector<EntityId> neighbors;
  Matrix features;
  Matrix affinity;
};

/// Immutable context for building neighborhoods: store, rank index and
/// configuration. Safe to share across threads.
class PillarSpace {
 public:
  PillarSpace(const SimilarityStore& store, const ModelConfig& cfg, std::uint64_t seed = 0,
              Exec exec = Exec::Parallel);

  const SimilarityStore& store() const { return *store_; }
  const RankIndex& index() const { return index_; }
  const ModelConfig& config() const { return cfg_; }
  std::uint64_t seed() const { return seed_; }

  /// Neighborhood over an explicit neighbor list (possibly repeated ids).
  Neighborhood build(EntityId query, std::span<const EntityId> neighbors) const;
  /// Neighborhood over the query's top-K cross-modal items.
  Neighborhood build(EntityId query) const;

  std::vector<EntityId> top_k(EntityId query) const;

 private:
  const SimilarityStore* store_;
  ModelConfig cfg_;
  std::uint64_t seed_;
  RankIndex index_;
};

/// Tape handles for one submodel's tensors.
struct ParamVars {
  struct Layer {
    ad::Var wq, bq, wk, bk, wv, bv, w1, b1, w2, b2;
  };
  std::vector<Layer> layers;
};

/// Registers the tensors on the tape. With `track` false they are
/// constants (inference).
ParamVars bind(ad::Tape& tape, const ReRankerParams& params, const std::string& prefix,
               bool track);

/// Propagation through every layer; returns the refined feature node.
ad::Var propagate(ad::Tape& tape, const Neighborhood& nb, const ParamVars& params,
                  const ModelConfig& cfg);

/// Refined features for a neighborhood (no gradients).
Matrix propagate(const Neighborhood& nb, const ReRankerParams& params, const ModelConfig& cfg);

/// Cosine of refined row 0 against each neighbor row. Zero-norm rows score
/// -1 and are counted in `degenerate`.
std::vector<double> refined_scores(const Matrix& refined, std::size_t* degenerate = nullptr);

/// Re-ranks the top-K window of the query's full ranking by refined score;
/// the tail is left exactly as in the base ranking.
RankingList rerank_query(EntityId query, const PillarSpace& space, const ReRankerParams& params);

/// Re-ranks many queries; Serial is the reference path.
std::vector<RankingList> rerank_queries(std::span<const EntityId> queries,
                                        const PillarSpace& space, const ModelParams& params,
                                        Exec exec = Exec::Parallel);

/// Base rankings (full) for many queries in one direction.
std::vector<RankingList> base_rankings(std::span<const EntityId> queries,
                                       const SimilarityStore& store, Exec exec = Exec::Parallel);

std::vector<EntityId> query_ids(const std::vector<std::uint32_t>& indices, Modality m);

}  // namespace pillarrank
