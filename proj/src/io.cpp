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

#include "pillarrank/io.hpp"

#include <array>
#include <charconv>
#include <cstring>
#include <optional>
#include <fstream>
#include <limits>
#include <sstream>

#include "pillarrank/errors.hpp"

namespace pillarrank::io {

namespace fs = std::filesystem;
using Kind = FormatError::Kind;

namespace {

template <typename U>
void put_le(std::ostream& out, U value) {
  std::array<char, sizeof(U)> bytes{};
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  }
  out.write(bytes.data(), bytes.size());
}

template <typename U>
U get_le(std::istream& in, const std::string& source, const char* field) {
  std::array<unsigned char, sizeof(U)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw FormatError(Kind::Truncated, source + ": truncated header (" + field + ")");
  }
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
  return value;
}

// Bytes left between the current position and the end, when seekable.
std::optional<std::uint64_t> remaining_bytes(std::istream& in) {
  const auto here = in.tellg();
  if (here < 0) return std::nullopt;
  in.seekg(0, std::ios::end);
  const auto end = in.tellg();
  in.seekg(here);
  if (end < 0 || !in) {
    in.clear();
    in.seekg(here);
    return std::nullopt;
  }
  return static_cast<std::uint64_t>(end - here);
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, mode);
  if (!out) throw FormatError(Kind::Io, "cannot open '" + path.string() + "' for writing");
  return out;
}

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw FormatError(Kind::Io, "cannot open '" + path.string() + "' for reading");
  return in;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(std::string_view s, const std::string& where) {
  T value{};
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw FormatError(Kind::Parse, where + ": cannot parse number '" + std::string(s) + "'");
  }
  return value;
}

}  // namespace

void write_matrix(std::ostream& out, const Matrix& m, Dtype dtype) {
  out.write(kMatrixMagic, 4);
  put_le<std::uint32_t>(out, kMatrixVersion);
  put_le<std::uint8_t>(out, static_cast<std::uint8_t>(dtype));
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
  const double* data = m.data();
  const auto count = static_cast<std::size_t>(m.size());
  if (dtype == Dtype::F32) {
    for (std::size_t i = 0; i < count; ++i) {
      const auto f = static_cast<float>(data[i]);
      std::uint32_t bits = 0;
      std::memcpy(&bits, &f, sizeof bits);
      put_le(out, bits);
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      std::uint64_t bits = 0;
      std::memcpy(&bits, &data[i], sizeof bits);
      put_le(out, bits);
    }
  }
  if (!out) throw FormatError(Kind::Io, "write failed");
}

Matrix read_matrix(std::istream& in, const std::string& source) {
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4) throw FormatError(Kind::Truncated, source + ": truncated header (magic)");
  if (std::memcmp(magic, kMatrixMagic, 4) != 0) {
    throw FormatError(Kind::BadMagic, source + ": bad magic bytes (expected \"LPRR\")");
  }
  const auto version = get_le<std::uint32_t>(in, source, "version");
  if (version != kMatrixVersion) {
    throw FormatError(Kind::VersionMismatch, source + ": format version " +
                                                 std::to_string(version) + ", expected " +
                                                 std::to_string(kMatrixVersion));
  }
  const auto tag = get_le<std::uint8_t>(in, source, "dtype");
  if (tag > 1) {
    throw FormatError(Kind::UnsupportedDtype,
                      source + ": unsupported dtype tag " + std::to_string(tag));
  }
  const auto dtype = static_cast<Dtype>(tag);
  const auto rows = get_le<std::uint64_t>(in, source, "rows");
  const auto cols = get_le<std::uint64_t>(in, source, "cols");
  const std::uint64_t elem = dtype == Dtype::F32 ? 4 : 8;

  std::uint64_t count = 0;
  std::uint64_t bytes = 0;
  constexpr auto kMaxIndex = static_cast<std::uint64_t>(std::numeric_limits<Eigen::Index>::max());
  if (__builtin_mul_overflow(rows, cols, &count) || __builtin_mul_overflow(count, elem, &bytes) ||
      rows > kMaxIndex || cols > kMaxIndex || bytes > kMaxIndex) {
    throw FormatError(Kind::DimensionOverflow, source + ": dimensions " + std::to_string(rows) +
                                                   "x" + std::to_string(cols) + " overflow");
  }
  if (auto left = remaining_bytes(in); left && *left < bytes) {
    throw FormatError(Kind::Truncated, source + ": payload declares " + std::to_string(count) +
                                           " values but only " + std::to_string(*left / elem) +
                                           " are present");
  }

  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  double* data = m.data();
  std::vector<unsigned char> buffer(static_cast<std::size_t>(bytes));
  in.read(reinterpret_cast<char*>(buffer.data()), static_cast<std::streamsize>(bytes));
  if (static_cast<std::uint64_t>(in.gcount()) != bytes) {
    throw FormatError(Kind::Truncated, source + ": payload truncated");
  }
  for (std::uint64_t i = 0; i < count; ++i) {
    const unsigned char* p = buffer.data() + i * elem;
    if (dtype == Dtype::F32) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(p[b]) << (8 * b);
      float f = 0;
      std::memcpy(&f, &bits, sizeof f);
      data[i] = f;
    } else {
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(p[b]) << (8 * b);
      std::memcpy(&data[i], &bits, sizeof bits);
    }
  }
  return m;
}

void save_matrix(const fs::path& path, const Matrix& m, Dtype dtype) {
  auto out = open_out(path, std::ios::out | std::ios::binary);
  write_matrix(out, m, dtype);
}

Matrix load_matrix(const fs::path& path) {
  auto in = open_in(path, std::ios::in | std::ios::binary);
  Matrix m = read_matrix(in, path.string());
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError(Kind::TrailingData, path.string() + ": trailing bytes after payload");
  }
  return m;
}

void save_ground_truth(const fs::path& path, const GroundTruth& truth) {
  auto out = open_out(path);
  for (const auto& [i, t] : truth.pairs()) out << "img " << i << " txt " << t << '\n';
  if (!out) throw FormatError(Kind::Io, "write failed: " + path.string());
}

GroundTruth load_ground_truth(const fs::path& path, std::size_t num_images,
                              std::size_t num_texts) {
  auto in = open_in(path);
  GroundTruth truth(num_images, num_texts);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::istringstream ss(t);
    std::string img_tag, txt_tag, rest;
    long long i = -1, j = -1;
    ss >> img_tag >> i >> txt_tag >> j;
    if (!ss || img_tag != "img" || txt_tag != "txt" || i < 0 || j < 0 || (ss >> rest)) {
      throw FormatError(Kind::Parse, path.string() + ":" + std::to_string(lineno) +
                                         ": expected 'img <index> txt <index>'");
    }
    if (static_cast<std::size_t>(i) >= num_images || static_cast<std::size_t>(j) >= num_texts) {
      throw FormatError(Kind::Parse, path.string() + ":" + std::to_string(lineno) +
                                         ": index out of range");
    }
    truth.add(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j));
  }
  return truth;
}

void save_index_list(const fs::path& path, const std::vector<std::uint32_t>& v) {
  auto out = open_out(path);
  for (auto x : v) out << x << '\n';
  if (!out) throw FormatError(Kind::Io, "write failed: " + path.string());
}

std::vector<std::uint32_t> load_index_list(const fs::path& path) {
  auto in = open_in(path);
  std::vector<std::uint32_t> v;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    v.push_back(parse_number<std::uint32_t>(t, path.string() + ":" + std::to_string(lineno)));
  }
  return v;
}

KeyValues parse_key_values(const std::string& text, const std::string& source) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw FormatError(Kind::Parse,
                        source + ":" + std::to_string(lineno) + ": expected key=value");
    }
    kv[trim(std::string_view(t).substr(0, eq))] = trim(std::string_view(t).substr(eq + 1));
  }
  return kv;
}

KeyValues read_key_values(const fs::path& path) {
  auto in = open_in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str(), path.string());
}

void write_key_values(const fs::path& path, const KeyValues& kv,
                      const std::string& header_comment) {
  auto out = open_out(path);
  if (!header_comment.empty()) out << "# " << header_comment << '\n';
  for (const auto& [k, v] : kv) out << k << '=' << v << '\n';
  if (!out) throw FormatError(Kind::Io, "write failed: " + path.string());
}

void save_bundle(const DatasetBundle& bundle, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw FormatError(Kind::Io, "cannot create '" + dir.string() + "': " + ec.message());

  KeyValues kv;
  kv["format"] = "pillarrank-bundle";
  kv["version"] = "1";
  kv["source_tag"] = bundle.store.source_tag();
  kv["num_images"] = std::to_string(bundle.store.num_images());
  kv["num_texts"] = std::to_string(bundle.store.num_texts());

  save_matrix(dir / "cross.lprr", bundle.store.cross());
  kv["cross"] = "cross.lprr";
  save_matrix(dir / "intra_image.lprr", bundle.store.intra_image());
  kv["intra_image"] = "intra_image.lprr";
  save_matrix(dir / "intra_text.lprr", bundle.store.intra_text());
  kv["intra_text"] = "intra_text.lprr";
  if (bundle.image_embeddings) {
    save_matrix(dir / "image_embeddings.lprr", bundle.image_embeddings->rows);
    kv["image_embeddings"] = "image_embeddings.lprr";
  }
  if (bundle.text_embeddings) {
    save_matrix(dir / "text_embeddings.lprr", bundle.text_embeddings->rows);
    kv["text_embeddings"] = "text_embeddings.lprr";
  }
  save_ground_truth(dir / "truth.txt", bundle.truth);
  kv["truth"] = "truth.txt";
  for (Split s : {Split::Train, Split::Val, Split::Test}) {
    for (Modality m : {Modality::Image, Modality::Text}) {
      const std::string name = std::string(to_string(s)) + "_" +
                               (m == Modality::Image ? "image" : "text") + ".txt";
      save_index_list(dir / "splits" / name, bundle.splits.at(s, m));
      kv["split." + std::string(to_string(s)) + "." +
         (m == Modality::Image ? "image" : "text")] = "splits/" + name;
    }
  }
  for (const auto& [k, v] : bundle.provenance) kv["provenance." + k] = v;
  write_key_values(dir / kBundleManifest, kv, "pillarrank dataset bundle");
}

DatasetBundle load_bundle(const fs::path& path) {
  const fs::path manifest = fs::is_directory(path) ? path / kBundleManifest : path;
  const fs::path dir = manifest.parent_path();
  const KeyValues kv = read_key_values(manifest);
  auto get = [&](const std::string& key) -> std::optional<fs::path> {
    auto it = kv.find(key);
    if (it == kv.end() || it->second.empty()) return std::nullopt;
    return dir / it->second;
  };
  if (auto it = kv.find("format"); it == kv.end() || it->second != "pillarrank-bundle") {
    throw FormatError(Kind::BadMagic, manifest.string() + ": not a pillarrank bundle manifest");
  }
  if (auto it = kv.find("version"); it == kv.end() || it->second != "1") {
    throw FormatError(Kind::VersionMismatch, manifest.string() + ": unsupported bundle version");
  }

  DatasetBundle bundle;
  const auto cross_path = get("cross");
  if (!cross_path) throw FormatError(Kind::Parse, manifest.string() + ": missing 'cross'");
  Matrix cross = load_matrix(*cross_path);

  if (auto p = get("image_embeddings")) {
    bundle.image_embeddings = EmbeddingSet{Modality::Image, load_matrix(*p)};
  }
  if (auto p = get("text_embeddings")) {
    bundle.text_embeddings = EmbeddingSet{Modality::Text, load_matrix(*p)};
  }
  auto intra = [&](const char* key, const std::optional<EmbeddingSet>& emb) -> Matrix {
    if (auto p = get(key)) return load_matrix(*p);
    if (emb) return cosine_similarity_matrix(*emb, *emb);
    throw FormatError(Kind::Parse, manifest.string() + ": neither '" + key +
                                       "' nor matching embeddings are present");
  };
  Matrix intra_image = intra("intra_image", bundle.image_embeddings);
  Matrix intra_text = intra("intra_text", bundle.text_embeddings);
  const auto tag_it = kv.find("source_tag");
  bundle.store = SimilarityStore(std::move(cross), std::move(intra_image), std::move(intra_text),
                                 tag_it == kv.end() ? std::string{} : tag_it->second);

  const auto truth_path = get("truth");
  if (!truth_path) throw FormatError(Kind::Parse, manifest.string() + ": missing 'truth'");
  bundle.truth =
      load_ground_truth(*truth_path, bundle.store.num_images(), bundle.store.num_texts());
  for (Split s : {Split::Train, Split::Val, Split::Test}) {
    for (Modality m : {Modality::Image, Modality::Text}) {
      const std::string key = "split." + std::string(to_string(s)) + "." +
                              (m == Modality::Image ? "image" : "text");
      if (auto p = get(key)) bundle.splits.at(s, m) = load_index_list(*p);
    }
  }
  constexpr std::string_view kProv = "provenance.";
  for (const auto& [k, v] : kv) {
    if (k.starts_with(kProv)) bundle.provenance[k.substr(kProv.size())] = v;
  }
  bundle.validate();
  return bundle;
}

void save_rankings(const fs::path& path, Direction direction,
                   const std::vector<RankingList>& rankings) {
  auto out = open_out(path);
  out << "direction=" << to_string(direction) << '\n';
  for (const auto& r : rankings) {
    out << r.query.index << '\t';
    for (std::size_t i = 0; i < r.items.size(); ++i) {
      if (i) out << ' ';
      out << r.items[i].index;
    }
    out << '\n';
  }
  if (!out) throw FormatError(Kind::Io, "write failed: " + path.string());
}

std::vector<RankingList> load_rankings(const fs::path& path, Direction* direction) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || !line.starts_with("direction=")) {
    throw FormatError(Kind::Parse, path.string() + ": missing 'direction=' header");
  }
  Direction d = parse_direction(trim(line.substr(10)));
  if (direction) *direction = d;
  std::vector<RankingList> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty()) continue;
    const auto tab = t.find('\t');
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (tab == std::string::npos) throw FormatError(Kind::Parse, where + ": missing tab");
    RankingList r;
    r.query = {query_modality(d), parse_number<std::uint32_t>(t.substr(0, tab), where)};
    std::istringstream ss(t.substr(tab + 1));
    std::string tok;
    while (ss >> tok) {
      r.items.push_back({item_modality(d), parse_number<std::uint32_t>(tok, where)});
    }
    r.scores.assign(r.items.size(), 0.0);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace pillarrank::io
