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

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pillarrank/types.hpp"

namespace pillarrank {

/// The four similarity views the engine consumes: cross-modal scores from
/// the base backbone (images x texts) and the two intra-modal tables.
///
/// Immutable after construction. Construction validates shapes, rejects
/// non-finite entries and requires symmetric intra-modal tables.
class SimilarityStore {
 public:
  SimilarityStore() = default;
  SimilarityStore(Matrix cross, Matrix intra_image, Matrix intra_text,
                  std::string source_tag = {});

  std::size_t num_images() const { return static_cast<std::size_t>(cross_.rows()); }
  std::size_t num_texts() const { return static_cast<std::size_t>(cross_.cols()); }
  std::size_t size(Modality m) const {
    return m == Modality::Image ? num_images() : num_texts();
  }

  const Matrix& cross() const { return cross_; }
  const Matrix& intra_image() const { return intra_image_; }
  const Matrix& intra_text() const { return intra_text_; }
  const std::string& source_tag() const { return source_tag_; }

  /// Cross-modal score when the modalities differ, intra-modal otherwise.
  double similarity(EntityId a, EntityId b) const;

  /// Contiguous scores of `query` against every entity of `target`.
  std::span<const double> scores(EntityId query, Modality target) const;

  bool contains(EntityId e) const { return e.index < size(e.modality); }
  void check(EntityId e) const;

 private:
  Matrix cross_;
  Matrix cross_by_text_;
  Matrix intra_image_;
  Matrix intra_text_;
  std::string source_tag_;
};

struct EmbeddingSet {
  Modality modality = Modality::Image;
  Matrix rows;

  std::size_t dim() const { return static_cast<std::size_t>(rows.cols()); }
  std::size_t size() const { return static_cast<std::size_t>(rows.rows()); }
};

/// Ranked items for one query. `window` is the number of leading positions
/// that were re-scored by a re-ranker; scores are non-increasing inside the
/// window and inside the tail independently. Base rankings have window 0.
struct RankingList {
  EntityId query;
  std::vector<EntityId> items;
  std::vector<double> scores;
  std::size_t window = 0;

  std::size_t size() const { return items.size(); }
};

/// Relevance pairs between images and texts, many-to-many.
class GroundTruth {
 public:
  GroundTruth() = default;
  GroundTruth(std::size_t num_images, std::size_t num_texts);

  void add(std::uint32_t image_index, std::uint32_t text_index);

  std::span<const std::uint32_t> positives(EntityId e) const;
  bool relevant(EntityId a, EntityId b) const;

  std::size_t num_images() const { return by_image_.size(); }
  std::size_t num_texts() const { return by_text_.size(); }
  std::size_t num_pairs() const { return pairs_; }

  /// All pairs in (image, text) ascending order.
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs() const;

 private:
  std::vector<std::vector<std::uint32_t>> by_image_;
  std::vector<std::vector<std::uint32_t>> by_text_;
  std::size_t pairs_ = 0;
};

enum class Split { Train = 0, Val = 1, Test = 2 };
std::string_view to_string(Split s);
Split parse_split(std::string_view s);

/// Query index lists per split and per query modality.
struct Splits {
  std::array<std::array<std::vector<std::uint32_t>, 2>, 3> queries;

  std::vector<std::uint32_t>& at(Split s, Modality m) {
    return queries[static_cast<int>(s)][static_cast<int>(m)];
  }
  const std::vector<std::uint32_t>& at(Split s, Modality m) const {
    return queries[static_cast<int>(s)][static_cast<int>(m)];
  }
};

struct DatasetBundle {
  SimilarityStore store;
  GroundTruth truth;
  Splits splits;
  std::optional<EmbeddingSet> image_embeddings;
  std::optional<EmbeddingSet> text_embeddings;
  /// Free-form provenance entries (e.g. the generator config), written to
  /// the manifest verbatim.
  std::map<std::string, std::string> provenance;

  const std::optional<EmbeddingSet>& embeddings(Modality m) const {
    return m == Modality::Image ? image_embeddings : text_embeddings;
  }

  /// Checks split disjointness, id ranges and embedding row counts.
  void validate() const;
};

/// Sorts `scores` descending with ties broken by ascending item index.
/// Throws InputError on NaN.
RankingList rank_row(std::span<const double> scores, std::span<const EntityId> ids,
                     EntityId query = {});

/// Full ranking of `query` against the whole `target` database.
RankingList rank_all(const SimilarityStore& store, EntityId query, Modality target);

/// Pairwise cosine similarities between the rows of `a` and `b`.
/// Throws InputError naming the first zero-norm row.
Matrix cosine_similarity_matrix(const EmbeddingSet& a, const EmbeddingSet& b,
                                Exec exec = Exec::Parallel);

}  // namespace pillarrank
