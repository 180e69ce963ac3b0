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
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "pillarrank/data_model.hpp"

namespace pillarrank::io {

// Matrix record layout (all integers little-endian):
//   "LPRR" | u32 version | u8 dtype | u64 rows | u64 cols | row-major payload
inline constexpr char kMatrixMagic[4] = {'L', 'P', 'R', 'R'};
inline constexpr std::uint32_t kMatrixVersion = 1;

enum class Dtype : std::uint8_t { F32 = 0, F64 = 1 };

/// Writes one matrix record. F32 narrows each entry; similarity dumps use
/// it, checkpoints use F64 so parameters survive a round trip exactly.
void write_matrix(std::ostream& out, const Matrix& m, Dtype dtype = Dtype::F32);

/// Reads one matrix record from the current stream position, widening to
/// double. `source` names the stream in diagnostics.
Matrix read_matrix(std::istream& in, const std::string& source = "<stream>");

void save_matrix(const std::filesystem::path& path, const Matrix& m, Dtype dtype = Dtype::F32);
/// Loads a single-record matrix file; trailing bytes are an error.
Matrix load_matrix(const std::filesystem::path& path);

/// Ground truth: one "img <index> txt <index>" pair per line.
void save_ground_truth(const std::filesystem::path& path, const GroundTruth& truth);
GroundTruth load_ground_truth(const std::filesystem::path& path, std::size_t num_images,
                              std::size_t num_texts);

/// One non-negative integer per line.
void save_index_list(const std::filesystem::path& path, const std::vector<std::uint32_t>& v);
std::vector<std::uint32_t> load_index_list(const std::filesystem::path& path);

using KeyValues = std::map<std::string, std::string>;

/// key=value text; blank lines and lines starting with '#' are skipped.
KeyValues read_key_values(const std::filesystem::path& path);
KeyValues parse_key_values(const std::string& text, const std::string& source);
void write_key_values(const std::filesystem::path& path, const KeyValues& kv,
                      const std::string& header_comment = {});

inline constexpr const char* kBundleManifest = "bundle.manifest";

/// Writes the bundle as a directory of matrix/text files plus a manifest.
void save_bundle(const DatasetBundle& bundle, const std::filesystem::path& dir);

/// Accepts either the bundle directory or the manifest path. Missing
/// intra-modal tables are derived from embeddings by cosine; if neither is
/// present the load fails.
DatasetBundle load_bundle(const std::filesystem::path& path);

/// Rankings file: "direction=<d>" header, then one line per query:
/// "<query index>\t<item> <item> ...".
void save_rankings(const std::filesystem::path& path, Direction direction,
                   const std::vector<RankingList>& rankings);
std::vector<RankingList> load_rankings(const std::filesystem::path& path, Direction* direction);

}  // namespace pillarrank::io
