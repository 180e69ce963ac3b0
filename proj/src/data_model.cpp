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

#include "pillarrank/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "pillarrank/errors.hpp"

namespace pillarrank {

std::string_view to_string(Modality m) { return m == Modality::Image ? "img" : "txt"; }

std::string to_string(EntityId e) {
  return std::string(to_string(e.modality)) + std::to_string(e.index);
}

std::string_view to_string(Direction d) { return d == Direction::I2T ? "i2t" : "t2i"; }

Direction parse_direction(std::string_view s) {
  if (s == "i2t") return Direction::I2T;
  if (s == "t2i") return Direction::T2I;
  throw ConfigError("unknown direction '" + std::string(s) + "' (expected i2t or t2i)");
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw ConfigError("unknown split '" + std::string(s) + "'");
}

namespace {

void require_finite(const Matrix& m, const char* name) {
  if (!m.allFinite()) {
    throw InputError(std::string("non-finite value in similarity matrix '") + name + "'");
  }
}

void require_symmetric(const Matrix& m, const char* name) {
  const Eigen::Index n = m.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (std::abs(m(i, j) - m(j, i)) > 1e-6) {
        throw InputError(std::string("intra-modal matrix '") + name + "' is not symmetric at (" +
                         std::to_string(i) + "," + std::to_string(j) + ")");
      }
    }
  }
}

}  // namespace

SimilarityStore::SimilarityStore(Matrix cross, Matrix intra_image, Matrix intra_text,
                                 std::string source_tag)
    : cross_(std::move(cross)),
      intra_image_(std::move(intra_image)),
      intra_text_(std::move(intra_text)),
      source_tag_(std::move(source_tag)) {
  const auto m = cross_.rows();
  const auto n = cross_.cols();
  if (intra_image_.rows() != m || intra_image_.cols() != m) {
    throw InputError("intra_image must be " + std::to_string(m) + "x" + std::to_string(m));
  }
  if (intra_text_.rows() != n || intra_text_.cols() != n) {
    throw InputError("intra_text must be " + std::to_string(n) + "x" + std::to_string(n));
  }
  require_finite(cross_, "cross");
  require_finite(intra_image_, "intra_image");
  require_finite(intra_text_, "intra_text");
  require_symmetric(intra_image_, "intra_image");
  require_symmetric(intra_text_, "intra_text");
  cross_by_text_ = cross_.transpose();
}

double SimilarityStore::similarity(EntityId a, EntityId b) const {
  if (a.modality == b.modality) {
    return a.modality == Modality::Image ? intra_image_(a.index, b.index)
                                         : intra_text_(a.index, b.index);
  }
  return a.modality == Modality::Image ? cross_(a.index, b.index) : cross_(b.index, a.index);
}

std::span<const double> SimilarityStore::scores(EntityId query, Modality target) const {
  const Matrix* table = nullptr;
  if (query.modality == Modality::Image) {
    table = target == Modality::Image ? &intra_image_ : &cross_;
  } else {
    table = target == Modality::Text ? &intra_text_ : &cross_by_text_;
  }
  return {table->data() + static_cast<std::size_t>(query.index) * table->cols(),
          static_cast<std::size_t>(table->cols())};
}

void SimilarityStore::check(EntityId e) const {
  if (!contains(e)) {
    throw InputError("entity " + to_string(e) + " out of range (database size " +
                     std::to_string(size(e.modality)) + ")");
  }
}

GroundTruth::GroundTruth(std::size_t num_images, std::size_t num_texts)
    : by_image_(num_images), by_text_(num_texts) {}

void GroundTruth::add(std::uint32_t image_index, std::uint32_t text_index) {
  if (image_index >= by_image_.size() || text_index >= by_text_.size()) {
    throw InputError("ground-truth pair (img " + std::to_string(image_index) + ", txt " +
                     std::to_string(text_index) + ") out of range");
  }
  auto& row = by_image_[image_index];
  auto it = std::lower_bound(row.begin(), row.end(), text_index);
  if (it != row.end() && *it == text_index) return;
  row.insert(it, text_index);
  auto& col = by_text_[text_index];
  col.insert(std::lower_bound(col.begin(), col.end(), image_index), image_index);
  ++pairs_;
}

std::span<const std::uint32_t> GroundTruth::positives(EntityId e) const {
  const auto& table = e.modality == Modality::Image ? by_image_ : by_text_;
  if (e.index >= table.size()) return {};
  return table[e.index];
}

bool GroundTruth::relevant(EntityId a, EntityId b) const {
  if (a.modality == b.modality) return false;
  const auto pos = positives(a);
  return std::binary_search(pos.begin(), pos.end(), b.index);
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> GroundTruth::pairs() const {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
  out.reserve(pairs_);
  for (std::uint32_t i = 0; i < by_image_.size(); ++i) {
    for (auto t : by_image_[i]) out.emplace_back(i, t);
  }
  return out;
}

void DatasetBundle::validate() const {
  if (truth.num_images() != store.num_images() || truth.num_texts() != store.num_texts()) {
    throw InputError("ground truth dimensions do not match the similarity store");
  }
  for (Modality m : {Modality::Image, Modality::Text}) {
    std::set<std::uint32_t> seen;
    for (Split s : {Split::Train, Split::Val, Split::Test}) {
      for (auto q : splits.at(s, m)) {
        if (q >= store.size(m)) {
          throw InputError("split " + std::string(to_string(s)) + " references " +
                           to_string(EntityId{m, q}) + " which is out of range");
        }
        if (!seen.insert(q).second) {
          throw InputError("query " + to_string(EntityId{m, q}) +
                           " appears in more than one split");
        }
      }
    }
    if (const auto& emb = embeddings(m); emb && emb->size() != store.size(m)) {
      throw InputError(std::string(to_string(m)) + " embeddings have " +
                       std::to_string(emb->size()) + " rows, database has " +
                       std::to_string(store.size(m)));
    }
  }
}

RankingList rank_row(std::span<const double> scores, std::span<const EntityId> ids,
                     EntityId query) {
  if (scores.size() != ids.size()) {
    throw InputError("rank_row: scores and ids differ in length");
  }
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (std::isnan(scores[i])) {
      throw InputError("rank_row: NaN score for " + to_string(ids[i]));
    }
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return ids[a].index < ids[b].index;
  });
  RankingList out;
  out.query = query;
  out.items.reserve(order.size());
  out.scores.reserve(order.size());
  for (auto i : order) {
    out.items.push_back(ids[i]);
    out.scores.push_back(scores[i]);
  }
  return out;
}

RankingList rank_all(const SimilarityStore& store, EntityId query, Modality target) {
  store.check(query);
  const auto row = store.scores(query, target);
  std::vector<EntityId> ids(row.size());
  for (std::uint32_t i = 0; i < ids.size(); ++i) ids[i] = {target, i};
  return rank_row(row, ids, query);
}

}  // namespace pillarrank
