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

#include "pillarrank/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "pillarrank/errors.hpp"

namespace pillarrank {

std::string_view to_string(QEVariant v) {
  switch (v) {
    case QEVariant::AQE: return "aqe";
    case QEVariant::AQEwD: return "aqewd";
    case QEVariant::AlphaQE: return "alpha-qe";
  }
  return "?";
}

QEVariant parse_qe_variant(std::string_view s) {
  if (s == "aqe") return QEVariant::AQE;
  if (s == "aqewd") return QEVariant::AQEwD;
  if (s == "alpha-qe" || s == "alphaqe") return QEVariant::AlphaQE;
  throw ConfigError("unknown query expansion variant '" + std::string(s) +
                    "' (expected aqe, aqewd, alpha-qe)");
}

std::string_view to_string(DBAPipeline p) {
  return p == DBAPipeline::Sequential ? "sequential" : "joint";
}

DBAPipeline parse_dba_pipeline(std::string_view s) {
  if (s == "sequential") return DBAPipeline::Sequential;
  if (s == "joint") return DBAPipeline::Joint;
  throw ConfigError("unknown DBA pipeline '" + std::string(s) + "' (expected sequential, joint)");
}

void QEConfig::validate() const {
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be non-negative");
}

void KReciprocalConfig::validate() const {
  if (k1 == 0) throw ConfigError("k1 must be positive");
  if (!(blend >= 0.0 && blend <= 1.0)) throw ConfigError("blend must be in [0, 1]");
  if (window_i2t == 0 || window_t2i == 0) throw ConfigError("re-rank window must be positive");
}

RowVector expand_query(const RowVector& q, const Matrix& neighbors,
                       std::span<const double> scores, const QEConfig& cfg) {
  const double qn = q.norm();
  if (!(qn > 0.0)) throw InputError("query expansion needs a non-zero query vector");
  const std::size_t n =
      std::min({cfg.n_expand, static_cast<std::size_t>(neighbors.rows()), scores.size()});
  if (n == 0) return q / qn;
  if (neighbors.cols() != q.cols()) {
    throw InputError("query and neighbor embeddings differ in dimension");
  }
  RowVector acc = q;
  double total = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    double w = 1.0;
    if (cfg.variant == QEVariant::AQEwD) {
      w = static_cast<double>(n - i) / static_cast<double>(n);
    } else if (cfg.variant == QEVariant::AlphaQE) {
      w = std::pow(std::max(scores[i], 0.0), cfg.alpha);
    }
    acc += w * neighbors.row(static_cast<Eigen::Index>(i));
    total += w;
  }
  acc /= total;
  const double an = acc.norm();
  // Neighbors that cancel the query exactly leave nothing to normalize.
  if (!(an > 0.0)) return q / qn;
  return acc / an;
}

namespace {

const Matrix& require_embeddings(const DatasetBundle& bundle, Modality m) {
  const auto& e = bundle.embeddings(m);
  if (!e) {
    throw InputError("query expansion and DBA require " + std::string(to_string(m)) +
                     " embeddings (two-tower inputs); the bundle has none");
  }
  return e->rows;
}

// Each row of `x` expanded with its top-n rows of `pool` by cosine. With
// `self_offset` >= 0, row i of x is pool row i + self_offset and is skipped.
Matrix expand_rows(const Matrix& x, const Matrix& pool, std::ptrdiff_t self_offset,
                   const QEConfig& cfg, Exec exec) {
  const Matrix sims = kernels::cosine(x, pool, exec);
  Matrix out(x.rows(), x.cols());
  kernels::for_each_index(static_cast<std::size_t>(x.rows()), exec, [&](std::size_t i) {
    const auto r = static_cast<Eigen::Index>(i);
    std::vector<double> row(sims.row(r).data(), sims.row(r).data() + sims.cols());
    if (self_offset >= 0) {
      row[i + static_cast<std::size_t>(self_offset)] = -std::numeric_limits<double>::max();
    }
    const std::size_t avail = row.size() - (self_offset >= 0 ? 1 : 0);
    const auto top = top_indices(row, std::min(cfg.n_expand, avail));
    Matrix nb(static_cast<Eigen::Index>(top.size()), x.cols());
    std::vector<double> sc(top.size());
    for (std::size_t j = 0; j < top.size(); ++j) {
      nb.row(static_cast<Eigen::Index>(j)) = pool.row(top[j]);
      sc[j] = row[top[j]];
    }
    out.row(r) = expand_query(x.row(r), nb, sc, cfg);
  });
  return out;
}

Matrix gather_rows(const Matrix& m, std::span<const EntityId> ids) {
  Matrix out(static_cast<Eigen::Index>(ids.size()), m.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i].index >= static_cast<std::size_t>(m.rows())) {
      throw InputError("query " + to_string(ids[i]) + " is outside the embedding table");
    }
    out.row(static_cast<Eigen::Index>(i)) = m.row(ids[i].index);
  }
  return out;
}

Modality common_modality(std::span<const EntityId> queries) {
  if (queries.empty()) return Modality::Image;
  const Modality m = queries.front().modality;
  for (const auto& q : queries) {
    if (q.modality != m) throw InputError("baseline queries must share one modality");
  }
  return m;
}

}  // namespace

Augmented dba_augment(const Matrix& queries, const Matrix& database, const DBAMode& mode,
                      const QEConfig& cfg, Exec exec) {
  cfg.validate();
  if (queries.rows() > 0 && queries.cols() != database.cols()) {
    throw InputError("query and database embeddings differ in dimension");
  }
  QEConfig c = cfg;
  c.variant = mode.variant;
  Augmented out;
  if (mode.pipeline == DBAPipeline::Sequential) {
    out.database = expand_rows(database, database, 0, c, exec);
    out.queries = expand_rows(queries, out.database, -1, c, exec);
    return out;
  }
  Matrix pool(queries.rows() + database.rows(), database.cols());
  pool << queries, database;
  const Matrix expanded = expand_rows(pool, pool, 0, c, exec);
  out.queries = expanded.topRows(queries.rows());
  out.database = expanded.bottomRows(database.rows());
  return out;
}

std::vector<RankingList> cosine_rankings(std::span<const EntityId> queries,
                                         const Matrix& query_rows, const Matrix& database,
                                         Modality target, Exec exec) {
  const Matrix sims = kernels::cosine(query_rows, database, exec);
  std::vector<EntityId> ids(static_cast<std::size_t>(database.rows()));
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = {target, static_cast<std::uint32_t>(i)};
  std::vector<RankingList> out(queries.size());
  kernels::for_each_index(queries.size(), exec, [&](std::size_t i) {
    const auto r = static_cast<Eigen::Index>(i);
    out[i] = rank_row({sims.row(r).data(), static_cast<std::size_t>(sims.cols())}, ids,
                      queries[i]);
  });
  return out;
}

std::vector<RankingList> embedding_rankings(const DatasetBundle& bundle,
                                            std::span<const EntityId> queries, Exec exec) {
  const Modality qm = common_modality(queries);
  const Matrix& q = require_embeddings(bundle, qm);
  const Matrix& db = require_embeddings(bundle, other(qm));
  return cosine_rankings(queries, gather_rows(q, queries), db, other(qm), exec);
}

std::vector<RankingList> qe_rankings(const DatasetBundle& bundle,
                                     std::span<const EntityId> queries, const QEConfig& cfg,
                                     Exec exec) {
  cfg.validate();
  const Modality qm = common_modality(queries);
  const Matrix& db = require_embeddings(bundle, other(qm));
  const Matrix q = gather_rows(require_embeddings(bundle, qm), queries);
  if (q.rows() > 0 && q.cols() != db.cols()) {
    throw InputError("image and text embeddings differ in dimension");
  }
  const Matrix expanded = expand_rows(q, db, -1, cfg, exec);
  return cosine_rankings(queries, expanded, db, other(qm), exec);
}

std::vector<RankingList> dba_rankings(const DatasetBundle& bundle,
                                      std::span<const EntityId> queries, const DBAMode& mode,
                                      const QEConfig& cfg, Exec exec) {
  const Modality qm = common_modality(queries);
  const Matrix& db = require_embeddings(bundle, other(qm));
  const Matrix q = gather_rows(require_embeddings(bundle, qm), queries);
  const Augmented aug = dba_augment(q, db, mode, cfg, exec);
  return cosine_rankings(queries, aug.queries, aug.database, other(qm), exec);
}

double jaccard_distance(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b) {
  std::size_t common = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) ++i;
    else if (*j < *i) ++j;
    else {
      ++common;
      ++i;
      ++j;
    }
  }
  const std::size_t uni = a.size() + b.size() - common;
  if (uni == 0) return 1.0;
  return 1.0 - static_cast<double>(common) / static_cast<double>(uni);
}

std::vector<std::uint64_t> reciprocal_set(EntityId e, Modality target, const RankIndex& index,
                                          std::size_t k1) {
  if (index.requested_depth() < k1) {
    throw std::invalid_argument("reciprocal_set: index depth " +
                                std::to_string(index.requested_depth()) + " < k1=" +
                                std::to_string(k1));
  }
  auto head = [k1](std::span<const std::uint32_t> s) { return s.first(std::min(k1, s.size())); };
  const auto fwd = index.top(e, target);
  std::vector<std::uint64_t> out;
  for (auto x : head(fwd)) {
    const EntityId xe{target, x};
    const auto back = head(index.top(xe, e.modality));
    if (std::find(back.begin(), back.end(), e.index) != back.end()) out.push_back(key(xe));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<RankingList> k_reciprocal_rerank(std::span<const EntityId> queries,
                                             const SimilarityStore& store,
                                             const KReciprocalConfig& cfg, Exec exec) {
  cfg.validate();
  const RankIndex index(store, cfg.k1, exec);
  std::vector<RankingList> out(queries.size());
  kernels::for_each_index(queries.size(), exec, [&](std::size_t qi) {
    const EntityId q = queries[qi];
    const Direction d = direction_from(q.modality);
    const Modality target = item_modality(d);
    RankingList list = rank_all(store, q, target);
    const std::size_t w = std::min(cfg.window(d), list.items.size());
    const auto rq = reciprocal_set(q, target, index, cfg.k1);

    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = 0; i < w; ++i) {
      lo = std::min(lo, list.scores[i]);
      hi = std::max(hi, list.scores[i]);
    }
    std::vector<double> dist(w);
    for (std::size_t i = 0; i < w; ++i) {
      const auto ri = reciprocal_set(list.items[i], target, index, cfg.k1);
      const double norm = hi > lo ? (list.scores[i] - lo) / (hi - lo) : 1.0;
      dist[i] = (1.0 - cfg.blend) * jaccard_distance(rq, ri) + cfg.blend * (1.0 - norm);
    }
    std::vector<std::size_t> order(w);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
    std::vector<EntityId> items(list.items.begin(), list.items.begin() + static_cast<std::ptrdiff_t>(w));
    for (std::size_t i = 0; i < w; ++i) {
      list.items[i] = items[order[i]];
      list.scores[i] = 1.0 - dist[order[i]];
    }
    list.window = w;
    out[qi] = std::move(list);
  });
  return out;
}

std::vector<SweepRow> qe_sweep(const DatasetBundle& bundle, Split split, QEConfig cfg,
                               std::span<const std::size_t> n_values, const DBAMode* mode,
                               Exec exec) {
  std::vector<SweepRow> rows;
  for (std::size_t n : n_values) {
    cfg.n_expand = n;
    rows.push_back({n, evaluate_rankings(bundle, split, [&](std::span<const EntityId> q) {
                      return mode ? dba_rankings(bundle, q, *mode, cfg, exec)
                                  : qe_rankings(bundle, q, cfg, exec);
                    })});
  }
  return rows;
}

}  // namespace pillarrank
