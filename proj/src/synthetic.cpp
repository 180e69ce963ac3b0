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

#include "pillarrank/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "config_values.hpp"
#include "pillarrank/errors.hpp"
#include "pillarrank/kernels.hpp"
#include "pillarrank/random.hpp"

namespace pillarrank {

void SynthConfig::validate() const {
  if (concepts == 0 || images_per_concept == 0 || texts_per_image == 0) {
    throw ConfigError("synthetic counts must be positive");
  }
  if (dim < 2) throw ConfigError("synthetic dim must be at least 2, got " + std::to_string(dim));
  if (!(noise_sigma >= 0.0) || !(cross_noise_sigma >= 0.0)) {
    throw ConfigError("synthetic noise sigmas must be non-negative");
  }
}

std::map<std::string, std::string> SynthConfig::to_key_values() const {
  return {
      {"concepts", std::to_string(concepts)},
      {"images_per_concept", std::to_string(images_per_concept)},
      {"texts_per_image", std::to_string(texts_per_image)},
      {"dim", std::to_string(dim)},
      {"noise_sigma", detail::fmt_double(noise_sigma)},
      {"cross_noise_sigma", detail::fmt_double(cross_noise_sigma)},
      {"seed", std::to_string(seed)},
  };
}

SynthConfig SynthConfig::from_key_values(const std::map<std::string, std::string>& kv) {
  SynthConfig c;
  for (const auto& [k, v] : kv) {
    if (k == "concepts") c.concepts = detail::parse_size(k, v);
    else if (k == "images_per_concept") c.images_per_concept = detail::parse_size(k, v);
    else if (k == "texts_per_image") c.texts_per_image = detail::parse_size(k, v);
    else if (k == "dim") c.dim = detail::parse_size(k, v);
    else if (k == "noise_sigma") c.noise_sigma = detail::parse_real(k, v);
    else if (k == "cross_noise_sigma") c.cross_noise_sigma = detail::parse_real(k, v);
    else if (k == "seed") c.seed = detail::parse_uint<std::uint64_t>(k, v);
    else throw ConfigError("unknown synthetic config key '" + k + "'");
  }
  return c;
}

namespace {

void normalize_rows(Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double n = m.row(i).norm();
    if (n > 0.0) m.row(i) /= n;
  }
}

void round_to_float(Matrix& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = static_cast<double>(static_cast<float>(m.data()[i]));
  }
}

Matrix symmetric_cosine(const Matrix& e) {
  Matrix s = kernels::cosine(e, e, Exec::Serial);
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    s(i, i) = 1.0;
    for (Eigen::Index j = 0; j < i; ++j) s(i, j) = s(j, i);
  }
  round_to_float(s);
  return s;
}

}  // namespace

DatasetBundle generate(const SynthConfig& cfg) {
  cfg.validate();
  const auto dim = static_cast<Eigen::Index>(cfg.dim);
  const auto m = static_cast<Eigen::Index>(cfg.num_images());
  const auto n = static_cast<Eigen::Index>(cfg.num_texts());
  const auto tpi = static_cast<Eigen::Index>(cfg.texts_per_image);

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  auto noise = [&](double sigma) { return sigma > 0.0 ? sigma * unit(rng) : 0.0; };

  Matrix centroids(static_cast<Eigen::Index>(cfg.concepts), dim);
  // A zero draw is practically impossible; redraw keeps the sphere sample valid.
  for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
    do {
      for (Eigen::Index d = 0; d < dim; ++d) centroids(c, d) = unit(rng);
    } while (centroids.row(c).norm() == 0.0);
  }
  normalize_rows(centroids);

  Matrix images(m, dim);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto c = i / static_cast<Eigen::Index>(cfg.images_per_concept);
    for (Eigen::Index d = 0; d < dim; ++d) images(i, d) = centroids(c, d) + noise(cfg.noise_sigma);
  }
  normalize_rows(images);
  round_to_float(images);

  Matrix texts(n, dim);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto src = j / tpi;
    for (Eigen::Index d = 0; d < dim; ++d) texts(j, d) = images(src, d) + noise(cfg.noise_sigma);
  }
  normalize_rows(texts);
  round_to_float(texts);

  Matrix cross = kernels::cosine(images, texts, Exec::Serial);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) cross(i, j) += noise(cfg.cross_noise_sigma);
  }
  round_to_float(cross);

  DatasetBundle b;
  b.store = SimilarityStore(std::move(cross), symmetric_cosine(images), symmetric_cosine(texts),
                            "synthetic");
  b.truth = GroundTruth(cfg.num_images(), cfg.num_texts());
  for (Eigen::Index j = 0; j < n; ++j) {
    b.truth.add(static_cast<std::uint32_t>(j / tpi), static_cast<std::uint32_t>(j));
  }

  std::vector<std::uint32_t> perm(cfg.num_images());
  std::iota(perm.begin(), perm.end(), 0u);
  std::mt19937_64 split_rng(mix_seed(cfg.seed, 0x5b1));
  std::shuffle(perm.begin(), perm.end(), split_rng);
  const auto total = perm.size();
  const auto n_train = static_cast<std::size_t>(std::llround(0.7 * static_cast<double>(total)));
  const auto n_val = static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(total)));
  for (std::size_t p = 0; p < total; ++p) {
    const Split s = p < n_train ? Split::Train : p < n_train + n_val ? Split::Val : Split::Test;
    b.splits.at(s, Modality::Image).push_back(perm[p]);
  }
  for (Split s : {Split::Train, Split::Val, Split::Test}) {
    auto& imgs = b.splits.at(s, Modality::Image);
    std::sort(imgs.begin(), imgs.end());
    auto& txts = b.splits.at(s, Modality::Text);
    for (auto i : imgs) {
      for (std::size_t t = 0; t < cfg.texts_per_image; ++t) {
        txts.push_back(static_cast<std::uint32_t>(i * cfg.texts_per_image + t));
      }
    }
  }

  b.image_embeddings = EmbeddingSet{Modality::Image, std::move(images)};
  b.text_embeddings = EmbeddingSet{Modality::Text, std::move(texts)};
  b.provenance["generator"] = "pillarrank-synthetic";
  for (const auto& [k, v] : cfg.to_key_values()) b.provenance["synthetic." + k] = v;
  b.validate();
  return b;
}

}  // namespace pillarrank
