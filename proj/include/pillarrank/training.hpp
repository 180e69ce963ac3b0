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
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pillarrank/data_model.hpp"
#include "pillarrank/metrics.hpp"
#include "pillarrank/reasoner.hpp"

namespace pillarrank {

/// A training neighborhood with its P/N split over the K neighbors.
struct NeighborhoodSample {
  Neighborhood graph;
  std::vector<bool> positive;
  Direction direction = Direction::I2T;

  bool has_positive() const;
};

std::vector<bool> positive_mask(const Neighborhood& nb, const GroundTruth& truth);

/// Uniformly picks one cross-modal ground-truth match of `e`; nullopt when
/// `e` has none.
std::optional<EntityId> sample_positive(EntityId e, const GroundTruth& truth,
                                        std::mt19937_64& rng);

struct LossTerms {
  double contrastive = 0.0;
  double triplet = 0.0;
  double alignment = 0.0;

  double total() const { return contrastive + triplet + alignment; }
  LossTerms& operator+=(const LossTerms& o);
};

struct SampleResult {
  LossTerms loss;
  /// The alignment term was dropped because a positive could not be drawn.
  bool alignment_skipped = false;
};

/// Loss of one sample: contrastive + triplet on its own submodel, plus the
/// KL alignment against the opposite submodel scoring the mirrored
/// neighborhood (sampled positives of the query and of every neighbor).
/// When `grad` is non-null the sample's gradients are added into it.
/// `stream_seed` drives positive sampling.
SampleResult sample_loss(const NeighborhoodSample& sample, const PillarSpace& space,
                         const GroundTruth& truth, const ModelParams& params,
                         std::uint64_t stream_seed, ModelParams* grad = nullptr);

struct BatchResult {
  LossTerms mean_loss;
  ModelParams mean_grad;
  std::size_t count = 0;
  std::size_t alignment_skipped = 0;
};

/// Mean loss and gradient over a batch. Samples are reduced in fixed-size
/// chunks in index order, so the result is bit-identical for any thread
/// count and for Serial vs Parallel. Returns nullopt for an empty batch.
std::optional<BatchResult> batch_gradients(std::span<const NeighborhoodSample* const> batch,
                                           std::span<const std::uint64_t> stream_seeds,
                                           const PillarSpace& space, const GroundTruth& truth,
                                           const ModelParams& params, Exec exec);

/// Mean total loss of a batch without gradients; nullopt when empty.
std::optional<double> total_loss(std::span<const NeighborhoodSample* const> batch,
                                 std::span<const std::uint64_t> stream_seeds,
                                 const PillarSpace& space, const GroundTruth& truth,
                                 const ModelParams& params);

struct OptimizerState {
  ModelParams velocity;
  std::size_t step = 0;
  double lr = 0.01;
  double momentum = 0.9;

  static OptimizerState for_params(const ModelParams& params, double lr, double momentum);
};

/// v <- momentum * v + g;  w <- w - lr * v
void sgd_update(Matrix& weight, const Matrix& grad, Matrix& velocity, double lr,
                double momentum);
void sgd_step(ModelParams& params, const ModelParams& grads, OptimizerState& state);

struct Checkpoint {
  ModelConfig config;
  ModelParams params;
  double best_rsum = 0.0;
  std::size_t epoch = 0;
  std::uint64_t seed = 0;
};

/// Directory with manifest.txt (config, tensor names and shapes, run
/// metadata) and tensors.lprr (one F64 matrix record per tensor).
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

struct EpochLog {
  std::size_t epoch = 0;
  LossTerms mean_loss;
  double val_rsum = 0.0;
  std::size_t processed = 0;
  std::size_t skipped = 0;
  std::size_t alignment_skipped = 0;
  bool improved = false;

  std::string to_line() const;
};

struct TrainOptions {
  Exec exec = Exec::Parallel;
  std::function<void(const EpochLog&)> on_epoch;
};

struct TrainResult {
  Checkpoint best;
  std::vector<EpochLog> log;
  /// Best validation rSum after each evaluation (epoch 0 = initialization).
  std::vector<double> best_history;
  bool aborted = false;
  std::string abort_reason;
};

/// Trains both submodels jointly with SGD + momentum and keeps the
/// parameters with the highest validation rSum. Deterministic for a given
/// seed regardless of thread count.
TrainResult train(const DatasetBundle& bundle, const ModelConfig& cfg, std::uint64_t seed,
                  const TrainOptions& options = {});

/// Evaluates one split. With `params` null the base rankings are scored.
EvalReport evaluate_split(const PillarSpace& space, const GroundTruth& truth,
                          const Splits& splits, Split split, const ModelParams* params,
                          Exec exec = Exec::Parallel);

}  // namespace pillarrank
