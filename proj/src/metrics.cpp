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

#include "pillarrank/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "pillarrank/errors.hpp"

namespace pillarrank {

RecallResult recall_at_k(std::span<const RankingList> rankings, const GroundTruth& truth,
                         std::size_t k) {
  if (k == 0) throw ConfigError("recall_at_k: k must be >= 1");
  RecallResult result;
  std::size_t hits = 0;
  for (const auto& r : rankings) {
    if (truth.positives(r.query).empty()) {
      ++result.excluded;
      continue;
    }
    ++result.evaluated;
    const std::size_t depth = std::min(k, r.items.size());
    for (std::size_t i = 0; i < depth; ++i) {
      if (truth.relevant(r.query, r.items[i])) {
        ++hits;
        break;
      }
    }
  }
  if (result.evaluated > 0) {
    result.percent = 100.0 * static_cast<double>(hits) / static_cast<double>(result.evaluated);
  }
  return result;
}

DirectionReport evaluate_direction(std::span<const RankingList> rankings,
                                   const GroundTruth& truth) {
  DirectionReport d;
  const auto r1 = recall_at_k(rankings, truth, 1);
  d.r1 = r1.percent;
  d.r5 = recall_at_k(rankings, truth, 5).percent;
  d.r10 = recall_at_k(rankings, truth, 10).percent;
  d.evaluated = r1.evaluated;
  d.excluded = r1.excluded;
  return d;
}

double rsum(double i2t_r1, double i2t_r5, double i2t_r10, double t2i_r1, double t2i_r5,
            double t2i_r10) {
  return i2t_r1 + i2t_r5 + i2t_r10 + t2i_r1 + t2i_r5 + t2i_r10;
}

EvalReport EvalReport::from(const DirectionReport& i2t, const DirectionReport& t2i) {
  EvalReport r;
  r.i2t = i2t;
  r.t2i = t2i;
  r.rsum = pillarrank::rsum(i2t.r1, i2t.r5, i2t.r10, t2i.r1, t2i.r5, t2i.r10);
  return r;
}

namespace {

std::string full(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string one_decimal(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

}  // namespace

std::string EvalReport::to_key_values() const {
  std::ostringstream out;
  auto emit = [&](const char* dir, const DirectionReport& d) {
    out << dir << ".r1=" << full(d.r1) << '\n'
        << dir << ".r5=" << full(d.r5) << '\n'
        << dir << ".r10=" << full(d.r10) << '\n'
        << dir << ".evaluated=" << d.evaluated << '\n'
        << dir << ".excluded=" << d.excluded << '\n';
  };
  emit("i2t", i2t);
  emit("t2i", t2i);
  out << "rsum=" << full(rsum) << '\n';
  return out.str();
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  auto emit = [&](const char* dir, const DirectionReport& d) {
    const std::string p(dir);
    j[p + ".r1"] = d.r1;
    j[p + ".r5"] = d.r5;
    j[p + ".r10"] = d.r10;
    j[p + ".evaluated"] = d.evaluated;
    j[p + ".excluded"] = d.excluded;
  };
  emit("i2t", i2t);
  emit("t2i", t2i);
  j["rsum"] = rsum;
  return j;
}

std::string EvalReport::to_table(const std::string& label) const {
  std::ostringstream out;
  out << label << "\n"
      << "  I2T  R@1 " << one_decimal(i2t.r1) << "  R@5 " << one_decimal(i2t.r5) << "  R@10 "
      << one_decimal(i2t.r10) << "  (" << i2t.evaluated << " queries)\n"
      << "  T2I  R@1 " << one_decimal(t2i.r1) << "  R@5 " << one_decimal(t2i.r5) << "  R@10 "
      << one_decimal(t2i.r10) << "  (" << t2i.evaluated << " queries)\n"
      << "  rSum " << one_decimal(rsum) << '\n';
  return out.str();
}

std::string comparison_table(const EvalReport& base, const EvalReport& refined) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-10s %10s %10s %10s\n", "metric", "base", "reranked",
                "delta");
  out << line;
  auto row = [&](const char* name, double a, double b) {
    std::snprintf(line, sizeof line, "%-10s %10.1f %10.1f %+10.1f\n", name, a, b, b - a);
    out << line;
  };
  row("i2t.R@1", base.i2t.r1, refined.i2t.r1);
  row("i2t.R@5", base.i2t.r5, refined.i2t.r5);
  row("i2t.R@10", base.i2t.r10, refined.i2t.r10);
  row("t2i.R@1", base.t2i.r1, refined.t2i.r1);
  row("t2i.R@5", base.t2i.r5, refined.t2i.r5);
  row("t2i.R@10", base.t2i.r10, refined.t2i.r10);
  row("rSum", base.rsum, refined.rsum);
  return out.str();
}

}  // namespace pillarrank
