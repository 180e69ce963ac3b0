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

#include "pillarrank/reasoner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <iostream>
#include <mutex>
#include <numeric>
#include <random>

#include "config_values.hpp"
#include "pillarrank/errors.hpp"
#include "pillarrank/random.hpp"

namespace pillarrank {

// ---------------------------------------------------------------------------
// ModelConfig

void ModelConfig::validate(const SimilarityStore* store) const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(pillars, "pillars");
  positive(k_i2t, "k_i2t");
  positive(k_t2i, "k_t2i");
  positive(top_c, "top_c");
  positive(layers, "layers");
  positive(hidden, "hidden");
  positive(batch, "batch");
  if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
  if (!(margin >= 0.0)) throw ConfigError("margin must be non-negative");
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0, 1)");
  const double max_lambda = 1.0 + static_cast<double>(std::min(k_i2t, k_t2i));
  if (!(sparse_factor >= 0.0 && sparse_factor <= max_lambda)) {
    throw ConfigError("sparse_factor must be in [0, 1+K]");
  }
  if (!train_i2t && !train_t2i) throw ConfigError("at least one direction must be enabled");
  if (store) {
    if (pillars > store->num_images() || pillars > store->num_texts()) {
      throw ConfigError("pillars=" + std::to_string(pillars) + " exceeds a database size");
    }
    if (k_i2t > store->num_texts()) throw ConfigError("k_i2t exceeds the text database size");
    if (k_t2i > store->num_images()) throw ConfigError("k_t2i exceeds the image database size");
  }
}

using detail::fmt_double;
using detail::parse_bool;
using detail::parse_real;
using detail::parse_size;

std::map<std::string, std::string> ModelConfig::to_key_values() const {
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  return {
      {"pillars", std::to_string(pillars)},
      {"k_i2t", std::to_string(k_i2t)},
      {"k_t2i", std::to_string(k_t2i)},
      {"top_c", std::to_string(top_c)},
      {"sparse_factor", fmt_double(sparse_factor)},
      {"layers", std::to_string(layers)},
      {"hidden", std::to_string(hidden)},
      {"mlp_hidden", std::to_string(mlp_hidden)},
      {"temperature", fmt_double(temperature)},
      {"margin", fmt_double(margin)},
      {"lr", fmt_double(lr)},
      {"momentum", fmt_double(momentum)},
      {"batch", std::to_string(batch)},
      {"epochs", std::to_string(epochs)},
      {"pillar_strategy", std::string(to_string(pillar_strategy))},
      {"neighbor_affinity", b(neighbor_affinity)},
      {"learned_affinity", b(learned_affinity)},
      {"contrastive", b(contrastive)},
      {"triplet", b(triplet)},
      {"mma", b(mma)},
      {"train_i2t", b(train_i2t)},
      {"train_t2i", b(train_t2i)},
  };
}

ModelConfig ModelConfig::from_key_values(const std::map<std::string, std::string>& kv) {
  ModelConfig c;
  for (const auto& [k, v] : kv) {
    if (k == "pillars") c.pillars = parse_size(k, v);
    else if (k == "k_i2t") c.k_i2t = parse_size(k, v);
    else if (k == "k_t2i") c.k_t2i = parse_size(k, v);
    else if (k == "top_c") c.top_c = parse_size(k, v);
    else if (k == "sparse_factor") c.sparse_factor = parse_real(k, v);
    else if (k == "layers") c.layers = parse_size(k, v);
    else if (k == "hidden") c.hidden = parse_size(k, v);
    else if (k == "mlp_hidden") c.mlp_hidden = parse_size(k, v);
    else if (k == "temperature") c.temperature = parse_real(k, v);
    else if (k == "margin") c.margin = parse_real(k, v);
    else if (k == "lr") c.lr = parse_real(k, v);
    else if (k == "momentum") c.momentum = parse_real(k, v);
    else if (k == "batch") c.batch = parse_size(k, v);
    else if (k == "epochs") c.epochs = parse_size(k, v);
    else if (k == "pillar_strategy") c.pillar_strategy = parse_pillar_strategy(v);
    else if (k == "neighbor_affinity") c.neighbor_affinity = parse_bool(k, v);
    else if (k == "learned_affinity") c.learned_affinity = parse_bool(k, v);
    else if (k == "contrastive") c.contrastive = parse_bool(k, v);
    else if (k == "triplet") c.triplet = parse_bool(k, v);
    else if (k == "mma") c.mma = parse_bool(k, v);
    else if (k == "train_i2t") c.train_i2t = parse_bool(k, v);
    else if (k == "train_t2i") c.train_t2i = parse_bool(k, v);
    else throw ConfigError("unknown model config key '" + k + "'");
  }
  return c;
}

// ---------------------------------------------------------------------------
// Parameters

namespace {

Matrix uniform_fan_in(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

Matrix zero_row(std::size_t n) { return Matrix::Zero(1, static_cast<Eigen::Index>(n)); }

template <typename Layer, typename Fn>
void visit_layer(Layer& l, const std::string& p, Fn&& fn) {
  fn(p + "wq", l.wq);
  fn(p + "bq", l.bq);
  fn(p + "wk", l.wk);
  fn(p + "bk", l.bk);
  fn(p + "wv", l.wv);
  fn(p + "bv", l.bv);
  fn(p + "w1", l.w1);
  fn(p + "b1", l.b1);
  fn(p + "w2", l.w2);
  fn(p + "b2", l.b2);
}

}  // namespace

ReRankerParams ReRankerParams::init(const ModelConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::size_t w = cfg.width();
  const std::size_t h = cfg.hidden;
  const std::size_t m = cfg.g_hidden();
  ReRankerParams p;
  p.layers.resize(cfg.layers);
  for (auto& l : p.layers) {
    l.wq = uniform_fan_in(w, h, rng);
    l.bq = zero_row(h);
    l.wk = uniform_fan_in(w, h, rng);
    l.bk = zero_row(h);
    l.wv = uniform_fan_in(w, h, rng);
    l.bv = zero_row(h);
    l.w1 = uniform_fan_in(h, m, rng);
    l.b1 = zero_row(m);
    l.w2 = uniform_fan_in(m, w, rng);
    l.b2 = zero_row(w);
  }
  return p;
}

ReRankerParams ReRankerParams::zeros_like(const ReRankerParams& p) {
  ReRankerParams z = p;
  z.for_each([](const std::string&, Matrix& m) { m.setZero(); });
  return z;
}

void ReRankerParams::for_each(const std::function<void(const std::string&, Matrix&)>& fn) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    visit_layer(layers[i], "layer" + std::to_string(i) + ".", fn);
  }
}

void ReRankerParams::for_each(
    const std::function<void(const std::string&, const Matrix&)>& fn) const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    visit_layer(layers[i], "layer" + std::to_string(i) + ".", fn);
  }
}

bool ReRankerParams::operator==(const ReRankerParams& o) const {
  if (layers.size() != o.layers.size()) return false;
  std::vector<const Matrix*> mine, theirs;
  for_each([&](const std::string&, const Matrix& m) { mine.push_back(&m); });
  o.for_each([&](const std::string&, const Matrix& m) { theirs.push_back(&m); });
  for (std::size_t i = 0; i < mine.size(); ++i) {
    const Matrix& a = *mine[i];
    const Matrix& b = *theirs[i];
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    if (std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) != 0) {
      return false;
    }
  }
  return true;
}

ModelParams ModelParams::init(const ModelConfig& cfg, std::uint64_t seed) {
  return {ReRankerParams::init(cfg, mix_seed(seed, 0x1217)),
          ReRankerParams::init(cfg, mix_seed(seed, 0x7121))};
}

ModelParams ModelParams::zeros_like(const ModelParams& p) {
  return {ReRankerParams::zeros_like(p.i2t), ReRankerParams::zeros_like(p.t2i)};
}

void ModelParams::for_each(const std::function<void(const std::string&, Matrix&)>& fn) {
  i2t.for_each([&](const std::string& n, Matrix& m) { fn("i2t." + n, m); });
  t2i.for_each([&](const std::string& n, Matrix& m) { fn("t2i." + n, m); });
}

void ModelParams::for_each(
    const std::function<void(const std::string&, const Matrix&)>& fn) const {
  i2t.for_each([&](const std::string& n, const Matrix& m) { fn("i2t." + n, m); });
  t2i.for_each([&](const std::string& n, const Matrix& m) { fn("t2i." + n, m); });
}

// ---------------------------------------------------------------------------
// Affinities

std::vector<std::uint64_t> merged_neighbor_set(EntityId node, const RankIndex& index,
                                               std::size_t top_c) {
  if (top_c == 0) throw ConfigError("top_c must be positive");
  std::vector<std::uint64_t> out;
  for (Modality target : {node.modality, other(node.modality)}) {
    const auto list = index.top(node, target);
    if (list.size() < top_c) {
      static std::once_flag warned;
      std::call_once(warned, [&] {
        std::cerr << "warning: neighbor-set depth C=" << top_c << " truncated to "
                  << list.size() << " available items\n";
      });
    }
    const std::size_t n = std::min(top_c, list.size());
    for (std::size_t i = 0; i < n; ++i) out.push_back(key(EntityId{target, list[i]}));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

namespace {

std::size_t intersection_size(const std::vector<std::uint64_t>& a,
                              const std::vector<std::uint64_t>& b) {
  std::size_t n = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++n;
      ++i;
      ++j;
    }
  }
  return n;
}

}  // namespace

Matrix neighbor_affinity(std::span<const std::vector<std::uint64_t>> sets, double lambda) {
  const auto n = static_cast<Eigen::Index>(sets.size());
  Matrix counts(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      const auto c = static_cast<double>(intersection_size(sets[i], sets[j]));
      counts(i, j) = c;
      counts(j, i) = c;
    }
  }
  const double threshold = lambda / static_cast<double>(n);
  Matrix a = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double denom = counts.row(i).sum();
    double kept = 0.0;
    if (denom > 0.0) {
      for (Eigen::Index j = 0; j < n; ++j) {
        const double c = counts(i, j) / denom;
        if (c > threshold) {
          a(i, j) = c;
          kept += c;
        }
      }
    }
    if (kept > 0.0) {
      a.row(i) /= kept;
    } else {
      a(i, i) = 1.0;
    }
  }
  return a;
}

Matrix learned_affinity(const Matrix& features, const LayerParams& layer) {
  ad::Tape tape;
  const ad::Var f = tape.constant(features);
  auto fc = [&](const Matrix& w, const Matrix& b) {
    return ad::add_row(tape, ad::matmul(tape, f, tape.constant(w)), tape.constant(b));
  };
  const ad::Var q = fc(layer.wq, layer.bq);
  const ad::Var k = fc(layer.wk, layer.bk);
  return tape.value(ad::row_softmax(tape, ad::matmul_nt(tape, q, k)));
}

// ---------------------------------------------------------------------------
// Neighborhoods

PillarSpace::PillarSpace(const SimilarityStore& store, const ModelConfig& cfg,
                         std::uint64_t seed, Exec exec)
    : store_(&store), cfg_(cfg), seed_(seed) {
  cfg_.validate(&store);
  const std::size_t depth = std::max({cfg_.pillars, cfg_.top_c, cfg_.k_i2t, cfg_.k_t2i});
  index_ = RankIndex(store, depth, exec);
}

std::vector<EntityId> PillarSpace::top_k(EntityId query) const {
  const Modality target = other(query.modality);
  const auto list = index_.top(query, target).first(cfg_.k(direction_from(query.modality)));
  std::vector<EntityId> out;
  out.reserve(list.size());
  for (auto i : list) out.push_back({target, i});
  return out;
}

Neighborhood PillarSpace::build(EntityId query, std::span<const EntityId> neighbors) const {
  const PillarSet pillars =
      select_pillars(query, *store_, cfg_.pillars, cfg_.pillar_strategy, seed_, &index_);
  Neighborhood nb;
  nb.query = query;
  nb.neighbors.assign(neighbors.begin(), neighbors.end());
  nb.features = build_feature_matrix(query, neighbors, pillars, *store_).rows;
  std::vector<std::vector<std::uint64_t>> sets;
  sets.reserve(neighbors.size() + 1);
  sets.push_back(merged_neighbor_set(query, index_, cfg_.top_c));
  for (const auto& e : neighbors) sets.push_back(merged_neighbor_set(e, index_, cfg_.top_c));
  nb.affinity = neighbor_affinity(sets, cfg_.sparse_factor);
  return nb;
}

Neighborhood PillarSpace::build(EntityId query) const {
  const auto neighbors = top_k(query);
  return build(query, neighbors);
}

// ---------------------------------------------------------------------------
// Propagation

ParamVars bind(ad::Tape& tape, const ReRankerParams& params, const std::string& prefix,
               bool track) {
  ParamVars vars;
  vars.layers.reserve(params.layers.size());
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const LayerParams& l = params.layers[i];
    const std::string p = prefix + "layer" + std::to_string(i) + ".";
    auto leaf = [&](const Matrix& m, const char* name) {
      return track ? tape.parameter(m, p + name) : tape.constant(m);
    };
    vars.layers.push_back({leaf(l.wq, "wq"), leaf(l.bq, "bq"), leaf(l.wk, "wk"),
                           leaf(l.bk, "bk"), leaf(l.wv, "wv"), leaf(l.bv, "bv"),
                           leaf(l.w1, "w1"), leaf(l.b1, "b1"), leaf(l.w2, "w2"),
                           leaf(l.b2, "b2")});
  }
  return vars;
}

ad::Var propagate(ad::Tape& tape, const Neighborhood& nb, const ParamVars& params,
                  const ModelConfig& cfg) {
  const auto& f0 = nb.features;
  if (static_cast<std::size_t>(f0.cols()) != cfg.width()) {
    throw ConfigError("feature width " + std::to_string(f0.cols()) +
                      " does not match 2L=" + std::to_string(cfg.width()));
  }
  for (const auto& layer : params.layers) {
    if (static_cast<std::size_t>(tape.value(layer.wq).rows()) != cfg.width()) {
      throw ConfigError("parameter shape does not match the configured pillar width");
    }
  }
  const auto n = f0.rows();
  ad::Var f = tape.constant(f0);
  const ad::Var neighbor = tape.constant(nb.affinity);
  for (const auto& layer : params.layers) {
    auto fc = [&](ad::Var w, ad::Var b) {
      return ad::add_row(tape, ad::matmul(tape, f, w), b);
    };
    ad::Var a;
    if (cfg.learned_affinity) {
      const ad::Var logits = ad::matmul_nt(tape, fc(layer.wq, layer.bq), fc(layer.wk, layer.bk));
      const ad::Var learned = ad::row_softmax(tape, logits);
      a = cfg.neighbor_affinity ? ad::scale(tape, ad::add(tape, neighbor, learned), 0.5) : learned;
    } else {
      a = cfg.neighbor_affinity ? neighbor : tape.constant(Matrix::Identity(n, n));
    }
    const ad::Var mixed = ad::matmul(tape, a, fc(layer.wv, layer.bv));
    const ad::Var hidden =
        ad::relu(tape, ad::add_row(tape, ad::matmul(tape, mixed, layer.w1), layer.b1));
    const ad::Var out = ad::add_row(tape, ad::matmul(tape, hidden, layer.w2), layer.b2);
    f = ad::add(tape, out, f);
  }
  return f;
}

Matrix propagate(const Neighborhood& nb, const ReRankerParams& params, const ModelConfig& cfg) {
  ad::Tape tape;
  const ParamVars vars = bind(tape, params, "", false);
  return tape.value(propagate(tape, nb, vars, cfg));
}

std::vector<double> refined_scores(const Matrix& refined, std::size_t* degenerate) {
  ad::Tape tape;
  const Matrix& s = tape.value(ad::cosine_to_first_row(tape, tape.constant(refined), degenerate));
  return {s.data(), s.data() + s.size()};
}

RankingList rerank_query(EntityId query, const PillarSpace& space, const ReRankerParams& params) {
  const SimilarityStore& store = space.store();
  RankingList base = rank_all(store, query, other(query.modality));
  const std::size_t k = std::min(space.config().k(direction_from(query.modality)), base.size());
  if (k == 0) return base;

  const std::vector<EntityId> window(base.items.begin(),
                                     base.items.begin() + static_cast<std::ptrdiff_t>(k));
  const Neighborhood nb = space.build(query, window);
  const auto scores = refined_scores(propagate(nb, params, space.config()));

  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return window[a].index < window[b].index;
  });
  for (std::size_t i = 0; i < k; ++i) {
    base.items[i] = window[order[i]];
    base.scores[i] = scores[order[i]];
  }
  base.window = k;
  return base;
}

std::vector<RankingList> rerank_queries(std::span<const EntityId> queries,
                                        const PillarSpace& space, const ModelParams& params,
                                        Exec exec) {
  std::vector<RankingList> out(queries.size());
  kernels::for_each_index(queries.size(), exec, [&](std::size_t i) {
    const Direction d = direction_from(queries[i].modality);
    // A direction left out of training keeps its base ranking.
    out[i] = space.config().trains(d) ? rerank_query(queries[i], space, params.at(d))
                                      : rank_all(space.store(), queries[i], item_modality(d));
  });
  return out;
}

std::vector<RankingList> base_rankings(std::span<const EntityId> queries,
                                       const SimilarityStore& store, Exec exec) {
  std::vector<RankingList> out(queries.size());
  kernels::for_each_index(queries.size(), exec, [&](std::size_t i) {
    out[i] = rank_all(store, queries[i], other(queries[i].modality));
  });
  return out;
}

std::vector<EntityId> query_ids(const std::vector<std::uint32_t>& indices, Modality m) {
  std::vector<EntityId> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back({m, i});
  return out;
}

}  // namespace pillarrank
