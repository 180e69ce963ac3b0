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
#include <map>
#include <string>

#include "pillarrank/data_model.hpp"

namespace pillarrank {

/// Planted-structure generator settings. Images are indexed concept-major;
/// text j belongs to image j / texts_per_image.
struct SynthConfig {
  std::size_t concepts = 50;
  std::size_t images_per_concept = 4;
  std::size_t texts_per_image = 5;
  std::size_t dim = 32;
  double noise_sigma = 0.25;
  double cross_noise_sigma = 0.15;
  std::uint64_t seed = 7;

  /// The pinned reference bundle.
  static SynthConfig s1() { return {}; }

  std::size_t num_images() const { return concepts * images_per_concept; }
  std::size_t num_texts() const { return num_images() * texts_per_image; }

  /// Throws ConfigError on zero counts, dim < 2 or negative sigmas.
  void validate() const;

  std::map<std::string, std::string> to_key_values() const;
  /// Unknown keys raise ConfigError.
  static SynthConfig from_key_values(const std::map<std::string, std::string>& kv);
};

/// Deterministic bundle: embeddings, exact intra-modal cosines, noisy
/// cross-modal cosines, ground truth and 70/10/20 image splits (texts
/// follow their source image). Values are rounded to float precision so a
/// saved bundle reloads bit-identically.
DatasetBundle generate(const SynthConfig& cfg);

}  // namespace pillarrank
