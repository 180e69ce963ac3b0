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
#include <initializer_list>

namespace pillarrank {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a base seed and a tuple of
/// coordinates (epoch, sample position, entity key, ...). Used wherever a
/// parallel loop needs per-item randomness that does not depend on
/// scheduling.
template <typename... Ts>
constexpr std::uint64_t mix_seed(std::uint64_t seed, Ts... parts) {
  std::uint64_t h = splitmix64(seed);
  for (std::uint64_t p : std::initializer_list<std::uint64_t>{static_cast<std::uint64_t>(parts)...}) {
    h = splitmix64(h ^ p);
  }
  return h;
}

}  // namespace pillarrank
