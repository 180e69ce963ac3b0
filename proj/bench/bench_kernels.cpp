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

// Serial vs parallel timings for the hot kernels. Arg 0 = serial, 1 = parallel.

#include <benchmark/benchmark.h>

#include <random>

#include "pillarrank/kernels.hpp"
#include "pillarrank/reasoner.hpp"
#include "pillarrank/synthetic.hpp"
#include "pillarrank/training.hpp"

namespace {

using namespace pillarrank;

Exec exec_of(const benchmark::State& state) {
  return state.range(0) == 0 ? Exec::Serial : Exec::Parallel;
}

const DatasetBundle& s1() {
  static const DatasetBundle b = generate(SynthConfig::s1());
  return b;
}

ModelConfig model() {
  ModelConfig c;
  c.pillars = 16;
  c.hidden = 64;
  c.layers = 2;
  c.k_i2t = 10;
  c.k_t2i = 5;
  return c;
}

void BM_Cosine(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  Matrix a(400, 64), b(1000, 64);
  for (auto* m : {&a, &b})
    for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = n(rng);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::cosine(a, b, exec_of(state)));
}
BENCHMARK(BM_Cosine)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_RankIndex(benchmark::State& state) {
  const auto& store = s1().store;
  for (auto _ : state) benchmark::DoNotOptimize(RankIndex(store, 32, exec_of(state)));
}
BENCHMARK(BM_RankIndex)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_RerankQueries(benchmark::State& state) {
  const auto& b = s1();
  const auto cfg = model();
  const PillarSpace space(b.store, cfg, 1, exec_of(state));
  const auto params = ModelParams::init(cfg, 1);
  const auto qs = query_ids(b.splits.at(Split::Test, Modality::Text), Modality::Text);
  for (auto _ : state) benchmark::DoNotOptimize(rerank_queries(qs, space, params, exec_of(state)));
}
BENCHMARK(BM_RerankQueries)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_BatchGradients(benchmark::State& state) {
  const auto& b = s1();
  const auto cfg = model();
  const PillarSpace space(b.store, cfg, 1, Exec::Serial);
  const auto params = ModelParams::init(cfg, 1);
  std::vector<NeighborhoodSample> samples;
  for (auto i : b.splits.at(Split::Train, Modality::Image)) {
    NeighborhoodSample s;
    s.graph = space.build(image(i));
    s.positive = positive_mask(s.graph, b.truth);
    s.direction = Direction::I2T;
    if (s.has_positive()) samples.push_back(std::move(s));
    if (samples.size() == 16) break;
  }
  std::vector<const NeighborhoodSample*> batch;
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    batch.push_back(&samples[i]);
    seeds.push_back(i);
  }
  for (auto _ : state)
    benchmark::DoNotOptimize(batch_gradients(batch, seeds, space, b.truth, params, exec_of(state)));
}
BENCHMARK(BM_BatchGradients)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
