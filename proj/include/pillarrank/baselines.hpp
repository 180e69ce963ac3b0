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
#include "pillarrank/metrics.hpp"

namespace pillarrank {

using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

enum class QEVariant { AQE, AQEwD, AlphaQE };
std::string_view to_string(QEVariant v);
QEVariant parse_qe_variant(std::string_view s);

struct QEConfig {
  std::size_t n_expand = 0;
  double alpha = 3.0;
  QEVariant variant = QEVariant::AQE;

  void validate() const;
};

/// Weighted mean of `q` (weight 1) and the first n_expand rows of
/// `neighbors`, renormalized. Weights: AQE 1; AQEwD (n-i)/n for the i-th
/// neighbor; AlphaQE max(score, 0)^alpha. n_expand = 0 gives q/|q|.
RowVector expand_query(const RowVector& q, const Matrix& neighbors,
                       std::span<const double> scores, const QEConfig& cfg);

enum class DBAPipeline { Sequential, Joint };
std::string_view to_string(DBAPipeline p);
DBAPipeline parse_dba_pipeline(std::string_view s);

/// Database-side augmentation. The QE variant doubles as the DBA variant
/// (AQE -> ADBA, AQEwD -> ADBAwD, AlphaQE -> AlphaDBA).
struct DBAMode {
  QEVariant variant = QEVariant::AQE;
  DBAPipeline pipeline = DBAPipeline::Sequential;
};

struct Augmented {
  Matrix queries;
  Matrix database;
};

/// Expands every vector with its top-n neighbors (itself excluded).
/// Sequential: the database is augmented among itself, then queries expand
/// against the augmented database. Joint: queries and database form one
/// pool and are expanded together in a single pass.
Augmented dba_augment(const Matrix& queries, const Matrix& database, const DBAMode& mode,
                      const QEConfig& cfg, Exec exec = Exec::Parallel);

/// Full ranking of each query row against each database row by cosine.
std::vector<RankingList> cosine_rankings(std::span<const EntityId> queries,
                                         const Matrix& query_rows, const Matrix& database,
                                         Modality target, Exec exec = Exec::Parallel);

/// Embedding-cosine rankings (the reference point for QE/DBA).
std::vector<RankingList> embedding_rankings(const DatasetBundle& bundle,
                                            std::span<const EntityId> queries,
                                            Exec exec = Exec::Parallel);

/// Query expansion against the raw database embeddings.
std::vector<RankingList> qe_rankings(const DatasetBundle& bundle,
                                     std::span<const EntityId> queries, const QEConfig& cfg,
                                     Exec exec = Exec::Parallel);

std::vector<RankingList> dba_rankings(const DatasetBundle& bundle,
                                      std::span<const EntityId> queries, const DBAMode& mode,
                                      const QEConfig& cfg, Exec exec = Exec::Parallel);

/// 1 - |a n b| / |a u b| over sorted keys; 1 when both are empty.
double jaccard_distance(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b);

/// { x in top-k1(e) over `target` : e in top-k1(x) over e's modality },
/// as sorted keys. Needs an index of depth >= k1.
std::vector<std::uint64_t> reciprocal_set(EntityId e, Modality target, const RankIndex& index,
                                          std::size_t k1);

struct KReciprocalConfig {
  std::size_t k1 = 20;
  double blend = 0.3;
  std::size_t window_i2t = 32;
  std::size_t window_t2i = 8;

  std::size_t window(Direction d) const { return d == Direction::I2T ? window_i2t : window_t2i; }
  void validate() const;
};

/// Re-ranks the top window of each query's base ranking by
/// (1-blend) d_J + blend (1 - min-max normalized score). The query side
/// uses its cross-modal reciprocal set, the item side its intra-modal one,
/// so both live in the item modality.
std::vector<RankingList> k_reciprocal_rerank(std::span<const EntityId> queries,
                                             const SimilarityStore& store,
                                             const KReciprocalConfig& cfg,
                                             Exec exec = Exec::Parallel);

struct SweepRow {
  std::size_t n_expand = 0;
  EvalReport report;
};

/// QE (or DBA when `mode` is given) evaluated on `split` for each n_expand.
std::vector<SweepRow> qe_sweep(const DatasetBundle& bundle, Split split, QEConfig cfg,
                               std::span<const std::size_t> n_values,
                               const DBAMode* mode = nullptr, Exec exec = Exec::Parallel);

/// Evaluates any per-direction ranking function over a split.
template <typename Fn>
EvalReport evaluate_rankings(const DatasetBundle& bundle, Split split, Fn&& rank) {
  auto run = [&](Direction d) {
    const Modality qm = query_modality(d);
    std::vector<EntityId> q;
    for (auto i : bundle.splits.at(split, qm)) q.push_back({qm, i});
    return evaluate_direction(rank(std::span<const EntityId>(q)), bundle.truth);
  };
  return EvalReport::from(run(Direction::I2T), run(Direction::T2I));
}

}  // namespace pillarrank
