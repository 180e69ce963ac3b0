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

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace pillarrank {

/// Dense row-major matrix used for every similarity table, feature matrix,
/// and parameter tensor. Row-major keeps per-entity rows contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Modality : std::uint8_t { Image = 0, Text = 1 };

constexpr Modality other(Modality m) {
  return m == Modality::Image ? Modality::Text : Modality::Image;
}

std::string_view to_string(Modality m);

/// An entity in one of the two databases. Image and text indices live in
/// separate namespaces, so (modality, index) is the identity.
struct EntityId {
  Modality modality = Modality::Image;
  std::uint32_t index = 0;

  auto operator<=>(const EntityId&) const = default;
};

constexpr EntityId image(std::uint32_t i) { return {Modality::Image, i}; }
constexpr EntityId text(std::uint32_t i) { return {Modality::Text, i}; }

/// Packs an id into a single integer that orders images before texts.
constexpr std::uint64_t key(EntityId e) {
  return (static_cast<std::uint64_t>(e.modality) << 32) | e.index;
}

std::string to_string(EntityId e);

enum class Direction { I2T, T2I };

constexpr Modality query_modality(Direction d) {
  return d == Direction::I2T ? Modality::Image : Modality::Text;
}
constexpr Modality item_modality(Direction d) { return other(query_modality(d)); }
constexpr Direction opposite(Direction d) {
  return d == Direction::I2T ? Direction::T2I : Direction::I2T;
}
constexpr Direction direction_from(Modality query) {
  return query == Modality::Image ? Direction::I2T : Direction::T2I;
}

std::string_view to_string(Direction d);
Direction parse_direction(std::string_view s);

/// Execution policy for the data-parallel kernels. Serial is the reference
/// path; Parallel must produce bit-identical results.
enum class Exec { Serial, Parallel };

}  // namespace pillarrank
