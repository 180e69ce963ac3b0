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

#include "pillarrank/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "pillarrank/errors.hpp"
#include "pillarrank/io.hpp"
#include "pillarrank/kernels.hpp"
#include "pillarrank/losses.hpp"
#include "pillarrank/random.hpp"

namespace pillarrank {

namespace {

// Samples reduced together before chunk results are combined. Fixed so the
// floating-point summation order never depends on the thread count.
constexpr std::size_t kChunk = 16;

std::string prefix_of(Direction d) { return d == Direction::I2T ? "i2t." : "t2i."; }

void add_grads(const ad::Tape& tape, const ParamVars& vars, ReRankerParams& out) {
  for (std::size_t i = 0; i < vars.layers.size(); ++i) {
    const auto& v = vars.layers[i];
    auto& g = out.layers[i];
    g.wq += tape.grad(v.wq);
    g.bq += tape.grad(v.bq);
    g.wk += tape.grad(v.wk);
    g.bk += tape.grad(v.bk);
    g.wv += tape.grad(v.wv);
    g.bv += tape.grad(v.bv);
    g.w1 += tape.grad(v.w1);
    g.b1 += tape.grad(v.b1);
    g.w2 += tape.grad(v.w2);
    g.b2 += tape.grad(v.b2);
  }
}

void add_into(ModelParams& acc, const ModelParams& x) {
  std::vector<const Matrix*> src;
  x.for_each([&](const std::string&, const Matrix& m) { src.push_back(&m); });
  std::size_t i = 0;
  acc.for_each([&](const std::string&, Matrix& m) { m += *src[i++]; });
}

void scale_params(ModelParams& p, double s) {
  p.for_each([&](const std::string&, Matrix& m) { m *= s; });
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

bool alignment_enabled(const ModelConfig& cfg) {
  return cfg.mma && cfg.train_i2t && cfg.train_t2i;
}

struct Accumulator {
  LossTerms loss;
  ModelParams grad;
  std::size_t skipped = 0;
};

}  // namespace

bool NeighborhoodSample::has_positive() const {
  return std::any_of(positive.begin(), positive.end(), [](bool b) { return b; });
}

std::vector<bool> positive_mask(const Neighborhood& nb, const GroundTruth& truth) {
  std::vector<bool> mask(nb.neighbors.size());
  for (std::size_t i = 0; i < nb.neighbors.size(); ++i) {
    mask[i] = truth.relevant(nb.query, nb.neighbors[i]);
  }
  return mask;
}

std::optional<EntityId> sample_positive(EntityId e, const GroundTruth& truth,
                                        std::mt19937_64& rng) {
  const auto pos = truth.positives(e);
  if (pos.empty()) return std::nullopt;
  std::uniform_int_distribution<std::size_t> pick(0, pos.size() - 1);
  return EntityId{other(e.modality), pos[pick(rng)]};
}

LossTerms& LossTerms::operator+=(const LossTerms& o) {
  contrastive += o.contrastive;
  triplet += o.triplet;
  alignment += o.alignment;
  return *this;
}

SampleResult sample_loss(const NeighborhoodSample& sample, const PillarSpace& space,
                         const GroundTruth& truth, const ModelParams& params,
                         std::uint64_t stream_seed, ModelParams* grad) {
  const ModelConfig& cfg = space.config();
  const Direction d = sample.direction;
  const bool track = grad != nullptr;

  ad::Tape tape;
  const ParamVars own = pillarrank::bind(tape, params.at(d), prefix_of(d), track);
  const ad::Var refined = propagate(tape, sample.graph, own, cfg);
  const ad::Var scores = ad::cosine_to_first_row(tape, refined);

  SampleResult result;
  std::vector<ad::Var> terms;
  if (cfg.contrastive) {
    terms.push_back(ad::contrastive_loss(tape, scores, sample.positive, cfg.temperature));
    result.loss.contrastive = tape.scalar(terms.back());
  }
  if (cfg.triplet) {
    terms.push_back(ad::triplet_loss(tape, scores, sample.positive, cfg.margin));
    result.loss.triplet = tape.scalar(terms.back());
  }

  std::optional<ParamVars> mirror_vars;
  if (alignment_enabled(cfg)) {
    std::mt19937_64 rng(stream_seed);
    const auto mq = sample_positive(sample.graph.query, truth, rng);
    std::vector<EntityId> mn;
    mn.reserve(sample.graph.neighbors.size());
    bool ok = mq.has_value();
    for (const auto& n : sample.graph.neighbors) {
      if (!ok) break;
      const auto p = sample_positive(n, truth, rng);
      if (!p) {
        ok = false;
        break;
      }
      mn.push_back(*p);
    }
    if (ok) {
      const Neighborhood mirror = space.build(*mq, mn);
      const Direction od = opposite(d);
      mirror_vars = pillarrank::bind(tape, params.at(od), prefix_of(od), track);
      const ad::Var mrefined = propagate(tape, mirror, *mirror_vars, cfg);
      const ad::Var mscores = ad::cosine_to_first_row(tape, mrefined);
      terms.push_back(ad::alignment_loss(tape, scores, mscores, cfg.temperature));
      result.loss.alignment = tape.scalar(terms.back());
    } else {
      result.alignment_skipped = true;
    }
  }

  if (!track || terms.empty()) return result;
  ad::Var total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) total = ad::add(tape, total, terms[i]);
  tape.backward(total);
  add_grads(tape, own, grad->at(d));
  if (mirror_vars) add_grads(tape, *mirror_vars, grad->at(opposite(d)));
  return result;
}

std::optional<BatchResult> batch_gradients(std::span<const NeighborhoodSample* const> batch,
                                           std::span<const std::uint64_t> stream_seeds,
                                           const PillarSpace& space, const GroundTruth& truth,
                                           const ModelParams& params, Exec exec) {
  if (batch.size() != stream_seeds.size()) {
    throw std::invalid_argument("batch and seed counts differ");
  }
  if (batch.empty()) return std::nullopt;

  const std::size_t chunks = (batch.size() + kChunk - 1) / kChunk;
  // Chunks are evaluated in waves so only a bounded number of gradient
  // accumulators is alive; they are folded into the total in chunk order.
  const std::size_t wave =
      exec == Exec::Serial ? 1 : std::max<std::size_t>(1, thread_count());

  BatchResult out;
  out.mean_grad = ModelParams::zeros_like(params);
  std::vector<Accumulator> acc(std::min(wave, chunks));
  for (std::size_t begin = 0; begin < chunks; begin += wave) {
    const std::size_t n = std::min(wave, chunks - begin);
    kernels::for_each_index(n, exec, [&](std::size_t w) {
      Accumulator& a = acc[w];
      a.loss = {};
      a.skipped = 0;
      if (a.grad.i2t.layers.empty()) a.grad = ModelParams::zeros_like(params);
      else a.grad.for_each([](const std::string&, Matrix& m) { m.setZero(); });
      const std::size_t c = begin + w;
      const std::size_t lo = c * kChunk;
      const std::size_t hi = std::min(batch.size(), lo + kChunk);
      for (std::size_t i = lo; i < hi; ++i) {
        const auto r = sample_loss(*batch[i], space, truth, params, stream_seeds[i], &a.grad);
        a.loss += r.loss;
        a.skipped += r.alignment_skipped ? 1 : 0;
      }
    });
    for (std::size_t w = 0; w < n; ++w) {
      out.mean_loss += acc[w].loss;
      out.alignment_skipped += acc[w].skipped;
      add_into(out.mean_grad, acc[w].grad);
    }
  }
  out.count = batch.size();
  const double inv = 1.0 / static_cast<double>(out.count);
  out.mean_loss.contrastive *= inv;
  out.mean_loss.triplet *= inv;
  out.mean_loss.alignment *= inv;
  scale_params(out.mean_grad, inv);
  return out;
}

std::optional<double> total_loss(std::span<const NeighborhoodSample* const> batch,
                                 std::span<const std::uint64_t> stream_seeds,
                                 const PillarSpace& space, const GroundTruth& truth,
                                 const ModelParams& params) {
  if (batch.size() != stream_seeds.size()) {
    throw std::invalid_argument("batch and seed counts differ");
  }
  if (batch.empty()) return std::nullopt;
  double sum = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    sum += sample_loss(*batch[i], space, truth, params, stream_seeds[i]).loss.total();
  }
  return sum / static_cast<double>(batch.size());
}

OptimizerState OptimizerState::for_params(const ModelParams& params, double lr,
                                          double momentum) {
  OptimizerState s;
  s.velocity = ModelParams::zeros_like(params);
  s.lr = lr;
  s.momentum = momentum;
  return s;
}

void sgd_update(Matrix& weight, const Matrix& grad, Matrix& velocity, double lr,
                double momentum) {
  if (weight.rows() != grad.rows() || weight.cols() != grad.cols() ||
      weight.rows() != velocity.rows() || weight.cols() != velocity.cols()) {
    throw std::invalid_argument("sgd_update: shape mismatch");
  }
  velocity = momentum * velocity + grad;
  weight -= lr * velocity;
}

void sgd_step(ModelParams& params, const ModelParams& grads, OptimizerState& state) {
  std::vector<const Matrix*> g;
  grads.for_each([&](const std::string&, const Matrix& m) { g.push_back(&m); });
  std::vector<Matrix*> v;
  state.velocity.for_each([&](const std::string&, Matrix& m) { v.push_back(&m); });
  std::size_t i = 0;
  params.for_each([&](const std::string& name, Matrix& w) {
    if (i >= g.size() || i >= v.size()) {
      throw std::invalid_argument("sgd_step: gradient missing for " + name);
    }
    sgd_update(w, *g[i], *v[i], state.lr, state.momentum);
    ++i;
  });
  ++state.step;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw FormatError(FormatError::Kind::Io,
                      "cannot create checkpoint directory " + dir.string() + ": " + ec.message());
  }
  io::KeyValues kv;
  kv["format"] = "pillarrank-checkpoint";
  kv["version"] = "1";
  kv["seed"] = std::to_string(ckpt.seed);
  kv["epoch"] = std::to_string(ckpt.epoch);
  kv["best_rsum"] = fmt(ckpt.best_rsum);
  for (const auto& [k, v] : ckpt.config.to_key_values()) kv["config." + k] = v;

  const auto tensor_path = dir / "tensors.lprr";
  std::ofstream out(tensor_path, std::ios::binary);
  if (!out) {
    throw FormatError(FormatError::Kind::Io, "cannot write " + tensor_path.string());
  }
  std::size_t count = 0;
  ckpt.params.for_each([&](const std::string& name, const Matrix& m) {
    char key[32];
    std::snprintf(key, sizeof key, "tensor.%04zu", count++);
    kv[key] = name + " " + std::to_string(m.rows()) + " " + std::to_string(m.cols());
    io::write_matrix(out, m, io::Dtype::F64);
  });
  kv["tensors"] = std::to_string(count);
  out.close();
  if (!out) throw FormatError(FormatError::Kind::Io, "failed writing " + tensor_path.string());
  io::write_key_values(dir / "manifest.txt", kv, "pillarrank checkpoint");
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  const auto kv = io::read_key_values(dir / "manifest.txt");
  auto get = [&](const std::string& k) -> const std::string& {
    auto it = kv.find(k);
    if (it == kv.end()) {
      throw FormatError(FormatError::Kind::Parse, "checkpoint manifest lacks '" + k + "'");
    }
    return it->second;
  };
  if (get("format") != "pillarrank-checkpoint") {
    throw FormatError(FormatError::Kind::BadMagic, dir.string() + " is not a checkpoint");
  }
  if (get("version") != "1") {
    throw FormatError(FormatError::Kind::VersionMismatch,
                      "unsupported checkpoint version " + get("version"));
  }

  Checkpoint ckpt;
  std::map<std::string, std::string> cfg_kv;
  for (const auto& [k, v] : kv) {
    if (k.rfind("config.", 0) == 0) cfg_kv[k.substr(7)] = v;
  }
  try {
    ckpt.config = ModelConfig::from_key_values(cfg_kv);
    ckpt.seed = std::stoull(get("seed"));
    ckpt.epoch = std::stoull(get("epoch"));
    ckpt.best_rsum = std::stod(get("best_rsum"));
  } catch (const std::logic_error& e) {
    throw FormatError(FormatError::Kind::Parse,
                      "bad checkpoint manifest value: " + std::string(e.what()));
  }

  // Shapes come from the config; initialization values are overwritten.
  ckpt.params = ModelParams::init(ckpt.config, 0);
  std::size_t expected = 0;
  ckpt.params.for_each([&](const std::string&, const Matrix&) { ++expected; });
  if (get("tensors") != std::to_string(expected)) {
    throw FormatError(FormatError::Kind::Parse, "checkpoint holds " + get("tensors") +
                                                    " tensors, config implies " +
                                                    std::to_string(expected));
  }

  const auto tensor_path = dir / "tensors.lprr";
  std::ifstream in(tensor_path, std::ios::binary);
  if (!in) throw FormatError(FormatError::Kind::Io, "cannot open " + tensor_path.string());
  std::size_t i = 0;
  ckpt.params.for_each([&](const std::string& name, Matrix& m) {
    char key[32];
    std::snprintf(key, sizeof key, "tensor.%04zu", i++);
    std::istringstream meta(get(key));
    std::string stored;
    long long rows = -1, cols = -1;
    meta >> stored >> rows >> cols;
    if (stored != name || rows != m.rows() || cols != m.cols()) {
      throw FormatError(FormatError::Kind::Parse,
                        "checkpoint tensor " + std::string(key) + " is '" + get(key) +
                            "', expected " + name + " " + std::to_string(m.rows()) + " " +
                            std::to_string(m.cols()));
    }
    Matrix loaded = io::read_matrix(in, tensor_path.string());
    if (loaded.rows() != m.rows() || loaded.cols() != m.cols()) {
      throw FormatError(FormatError::Kind::Parse, "tensor " + name + " has wrong shape");
    }
    m = std::move(loaded);
  });
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError(FormatError::Kind::TrailingData,
                      "trailing bytes after last tensor in " + tensor_path.string());
  }
  return ckpt;
}

std::string EpochLog::to_line() const {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "epoch=%zu loss_c=%.6f loss_t=%.6f loss_a=%.6f val_rsum=%.4f processed=%zu "
                "skipped=%zu mma_skipped=%zu%s",
                epoch, mean_loss.contrastive, mean_loss.triplet, mean_loss.alignment, val_rsum,
                processed, skipped, alignment_skipped, improved ? " best" : "");
  return buf;
}

EvalReport evaluate_split(const PillarSpace& space, const GroundTruth& truth,
                          const Splits& splits, Split split, const ModelParams* params,
                          Exec exec) {
  auto run = [&](Direction d) {
    const Modality qm = query_modality(d);
    const auto queries = query_ids(splits.at(split, qm), qm);
    const auto rankings = params ? rerank_queries(queries, space, *params, exec)
                                 : base_rankings(queries, space.store(), exec);
    return evaluate_direction(rankings, truth);
  };
  return EvalReport::from(run(Direction::I2T), run(Direction::T2I));
}

TrainResult train(const DatasetBundle& bundle, const ModelConfig& cfg, std::uint64_t seed,
                  const TrainOptions& options) {
  cfg.validate(&bundle.store);
  const Exec exec = options.exec;
  const PillarSpace space(bundle.store, cfg, seed, exec);

  // Neighborhoods of the training queries do not depend on the parameters,
  // so they are built once.
  std::vector<NeighborhoodSample> pool[2];
  std::size_t skipped = 0;
  for (Direction d : {Direction::I2T, Direction::T2I}) {
    if (!cfg.trains(d)) continue;
    const Modality qm = query_modality(d);
    const auto queries = query_ids(bundle.splits.at(Split::Train, qm), qm);
    std::vector<NeighborhoodSample> built(queries.size());
    kernels::for_each_index(queries.size(), exec, [&](std::size_t i) {
      built[i].graph = space.build(queries[i]);
      built[i].positive = positive_mask(built[i].graph, bundle.truth);
      built[i].direction = d;
    });
    auto& keep = pool[static_cast<int>(d)];
    for (auto& s : built) {
      if (s.has_positive()) keep.push_back(std::move(s));
      else ++skipped;
    }
  }

  TrainResult result;
  ModelParams params = ModelParams::init(cfg, seed);
  OptimizerState opt = OptimizerState::for_params(params, cfg.lr, cfg.momentum);

  const auto validate = [&](const ModelParams& p) {
    return evaluate_split(space, bundle.truth, bundle.splits, Split::Val, &p, exec).rsum;
  };

  result.best = {cfg, params, validate(params), 0, seed};
  result.best_history.push_back(result.best.best_rsum);
  {
    EpochLog log;
    log.val_rsum = result.best.best_rsum;
    log.skipped = skipped;
    log.improved = true;
    result.log.push_back(log);
    if (options.on_epoch) options.on_epoch(log);
  }

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<const NeighborhoodSample*> lists[2];
    for (int d = 0; d < 2; ++d) {
      for (const auto& s : pool[d]) lists[d].push_back(&s);
      std::mt19937_64 rng(mix_seed(seed, epoch, d + 1));
      std::shuffle(lists[d].begin(), lists[d].end(), rng);
    }
    // Alternate the two directions one-to-one; leftovers go last.
    std::vector<const NeighborhoodSample*> order;
    order.reserve(lists[0].size() + lists[1].size());
    for (std::size_t i = 0; i < std::max(lists[0].size(), lists[1].size()); ++i) {
      if (i < lists[0].size()) order.push_back(lists[0][i]);
      if (i < lists[1].size()) order.push_back(lists[1][i]);
    }
    std::vector<std::uint64_t> seeds(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) seeds[i] = mix_seed(seed, epoch, i, 0xa11);

    EpochLog log;
    log.epoch = epoch;
    log.skipped = skipped;
    for (std::size_t lo = 0; lo < order.size(); lo += cfg.batch) {
      const std::size_t n = std::min(cfg.batch, order.size() - lo);
      std::optional<BatchResult> br;
      try {
        br = batch_gradients(std::span(order).subspan(lo, n), std::span(seeds).subspan(lo, n),
                             space, bundle.truth, params, exec);
      } catch (const NumericError& e) {
        result.aborted = true;
        result.abort_reason = "epoch " + std::to_string(epoch) + ": " + e.what();
        return result;
      }
      if (!br) continue;
      if (!std::isfinite(br->mean_loss.total())) {
        result.aborted = true;
        result.abort_reason = "epoch " + std::to_string(epoch) + ": non-finite loss";
        return result;
      }
      sgd_step(params, br->mean_grad, opt);
      const double w = static_cast<double>(br->count);
      log.mean_loss.contrastive += w * br->mean_loss.contrastive;
      log.mean_loss.triplet += w * br->mean_loss.triplet;
      log.mean_loss.alignment += w * br->mean_loss.alignment;
      log.processed += br->count;
      log.alignment_skipped += br->alignment_skipped;
    }
    if (log.processed > 0) {
      const double inv = 1.0 / static_cast<double>(log.processed);
      log.mean_loss.contrastive *= inv;
      log.mean_loss.triplet *= inv;
      log.mean_loss.alignment *= inv;
    }
    log.val_rsum = validate(params);
    if (log.val_rsum > result.best.best_rsum) {
      result.best = {cfg, params, log.val_rsum, epoch, seed};
      log.improved = true;
    }
    result.best_history.push_back(result.best.best_rsum);
    result.log.push_back(log);
    if (options.on_epoch) options.on_epoch(log);
  }
  return result;
}

}  // namespace pillarrank
