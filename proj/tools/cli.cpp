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

#include "cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pillarrank/baselines.hpp"
#include "pillarrank/errors.hpp"
#include "pillarrank/io.hpp"
#include "pillarrank/kernels.hpp"
#include "pillarrank/metrics.hpp"
#include "pillarrank/reasoner.hpp"
#include "pillarrank/synthetic.hpp"
#include "pillarrank/training.hpp"

namespace pillarrank::cli {

namespace fs = std::filesystem;

namespace {

struct Common {
  std::string bundle;
  std::uint64_t seed = 0;
  std::string out;
  int threads = 0;
  std::string direction = "both";
  std::string split = "test";
};

struct Ablations {
  std::string pillar_strategy = "top";
  bool no_neighbor_affinity = false;
  bool no_learned_affinity = false;
  bool no_contrastive = false;
  bool no_triplet = false;
  bool no_mma = false;
};

struct BaselineOpts {
  std::string method = "aqe";
  std::size_t n_expand = 1;
  double alpha = 3.0;
  std::string pipeline = "sequential";
  std::size_t k1 = 20;
  double blend = 0.3;
  std::size_t window_i2t = 32;
  std::size_t window_t2i = 8;
  std::vector<std::size_t> sweep;
};

struct EvalOpts {
  std::string checkpoint;
  std::vector<std::string> rankings;
};

std::vector<Direction> directions(const std::string& d) {
  if (d == "both") return {Direction::I2T, Direction::T2I};
  return {parse_direction(d)};
}

void apply_threads(int threads) {
  if (threads > 0) set_thread_count(threads);
}

void print_resolved(std::ostream& out, const std::string& command, const io::KeyValues& kv) {
  out << "# resolved configuration (" << command << ")\n";
  for (const auto& [k, v] : kv) out << k << "=" << v << "\n";
}

fs::path prepare_out(const std::string& out) {
  if (out.empty()) throw ConfigError("--out is required");
  const fs::path p(out);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw FormatError(FormatError::Kind::Io, "cannot create " + out + ": " + ec.message());
  return p;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw FormatError(FormatError::Kind::Io, "cannot write " + path.string());
  f << text;
  if (!f) throw FormatError(FormatError::Kind::Io, "failed writing " + path.string());
}

void write_report(const fs::path& dir, const std::string& stem, const EvalReport& r,
                  const std::string& label) {
  write_text(dir / (stem + ".txt"), r.to_table(label));
  write_text(dir / (stem + ".json"), r.to_json().dump(2) + "\n");
}

io::KeyValues common_kv(const Common& c) {
  return {{"bundle", c.bundle},
          {"seed", std::to_string(c.seed)},
          {"out", c.out},
          {"threads", std::to_string(c.threads)},
          {"direction", c.direction},
          {"split", c.split}};
}

void add_common(CLI::App* sub, Common& c, bool with_bundle = true) {
  if (with_bundle) sub->add_option("--bundle", c.bundle, "Bundle directory or manifest")->required();
  sub->add_option("--seed", c.seed, "Random seed");
  sub->add_option("--out", c.out, "Output directory")->required();
  sub->add_option("--threads", c.threads, "Worker thread cap (0 = OpenMP default)")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--direction", c.direction, "Directions to run")
      ->check(CLI::IsMember({"i2t", "t2i", "both"}));
}

void add_model(CLI::App* sub, ModelConfig& m, Ablations& a) {
  sub->add_option("--pillars", m.pillars, "Pillars per block (L)");
  sub->add_option("--k-i2t", m.k_i2t, "Re-rank window for image queries");
  sub->add_option("--k-t2i", m.k_t2i, "Re-rank window for text queries");
  sub->add_option("--top-c", m.top_c, "Depth of the merged neighbor sets");
  sub->add_option("--sparse-factor", m.sparse_factor, "Neighbor affinity threshold factor");
  sub->add_option("--layers", m.layers, "Propagation layers");
  sub->add_option("--hidden", m.hidden, "Hidden width (H)");
  sub->add_option("--mlp-hidden", m.mlp_hidden, "Inner width of g (0 = hidden)");
  sub->add_option("--temperature", m.temperature, "Softmax temperature");
  sub->add_option("--margin", m.margin, "Triplet margin");
  sub->add_option("--lr", m.lr, "Learning rate");
  sub->add_option("--momentum", m.momentum, "SGD momentum");
  sub->add_option("--batch", m.batch, "Batch size");
  sub->add_option("--epochs", m.epochs, "Training epochs");
  sub->add_option("--pillar-strategy", a.pillar_strategy, "top, bottom, random, inter-only, intra-only");
  sub->add_flag("--disable-neighbor-affinity", a.no_neighbor_affinity, "Drop the neighbor-based affinity");
  sub->add_flag("--disable-learned-affinity", a.no_learned_affinity, "Drop the learned affinity");
  sub->add_flag("--disable-contrastive", a.no_contrastive, "Drop the contrastive loss");
  sub->add_flag("--disable-triplet", a.no_triplet, "Drop the triplet loss");
  sub->add_flag("--disable-mma", a.no_mma, "Drop the modality alignment loss");
}

ModelConfig resolve_model(ModelConfig m, const Ablations& a, const std::string& direction) {
  m.pillar_strategy = parse_pillar_strategy(a.pillar_strategy);
  m.neighbor_affinity = !a.no_neighbor_affinity;
  m.learned_affinity = !a.no_learned_affinity;
  m.contrastive = !a.no_contrastive;
  m.triplet = !a.no_triplet;
  m.mma = !a.no_mma;
  m.train_i2t = direction != "t2i";
  m.train_t2i = direction != "i2t";
  return m;
}

// ---------------------------------------------------------------------------

int cmd_gen(const Common& c, const SynthConfig& s, std::ostream& out) {
  s.validate();
  io::KeyValues kv = {{"out", c.out}};
  for (const auto& [k, v] : s.to_key_values()) kv["synthetic." + k] = v;
  print_resolved(out, "gen", kv);
  const fs::path dir = prepare_out(c.out);
  const DatasetBundle b = generate(s);
  io::save_bundle(b, dir);
  io::write_key_values(dir / "resolved_config.txt", kv, "pillarrank gen");
  out << "wrote bundle: " << b.store.num_images() << " images, " << b.store.num_texts()
      << " texts -> " << dir.string() << "\n";
  return kOk;
}

int cmd_train(const Common& c, const ModelConfig& model, std::ostream& out,
              std::ostream& err) {
  io::KeyValues kv = common_kv(c);
  for (const auto& [k, v] : model.to_key_values()) kv["model." + k] = v;
  print_resolved(out, "train", kv);
  model.validate();
  apply_threads(c.threads);
  const DatasetBundle bundle = io::load_bundle(c.bundle);
  const fs::path dir = prepare_out(c.out);
  io::write_key_values(dir / "resolved_config.txt", kv, "pillarrank train");

  std::ofstream log(dir / "train_log.txt");
  if (!log) throw FormatError(FormatError::Kind::Io, "cannot write train_log.txt");
  TrainOptions opts;
  opts.on_epoch = [&](const EpochLog& e) {
    out << e.to_line() << "\n";
    log << e.to_line() << "\n";
    log.flush();
  };
  const TrainResult r = train(bundle, model, c.seed, opts);
  save_checkpoint(r.best, dir / "checkpoint");
  out << "best epoch " << r.best.epoch << " val_rsum " << r.best.best_rsum << " -> "
      << (dir / "checkpoint").string() << "\n";
  if (r.aborted) {
    log << "aborted: " << r.abort_reason << "\n";
    err << "training aborted: " << r.abort_reason << " (last good checkpoint saved)\n";
    return kNumericAbort;
  }
  return kOk;
}

std::vector<RankingList> rerank_direction(const DatasetBundle& bundle, const PillarSpace& space,
                                          const ModelParams& params, Direction d, Split split) {
  const Modality qm = query_modality(d);
  const auto q = query_ids(bundle.splits.at(split, qm), qm);
  return rerank_queries(q, space, params);
}

Checkpoint require_checkpoint(const std::string& path) {
  if (path.empty()) throw ConfigError("--checkpoint is required");
  if (!fs::exists(fs::path(path) / "manifest.txt")) {
    throw FormatError(FormatError::Kind::Io, "no checkpoint at " + path);
  }
  return load_checkpoint(path);
}

int cmd_rerank(const Common& c, const std::string& ckpt_path, std::ostream& out) {
  io::KeyValues kv = common_kv(c);
  kv["checkpoint"] = ckpt_path;
  print_resolved(out, "rerank", kv);
  apply_threads(c.threads);
  const Checkpoint ckpt = require_checkpoint(ckpt_path);
  const DatasetBundle bundle = io::load_bundle(c.bundle);
  ckpt.config.validate(&bundle.store);
  const Split split = parse_split(c.split);
  const fs::path dir = prepare_out(c.out);
  io::write_key_values(dir / "resolved_config.txt", kv, "pillarrank rerank");
  const PillarSpace space(bundle.store, ckpt.config, ckpt.seed);
  for (Direction d : directions(c.direction)) {
    const auto lists = rerank_direction(bundle, space, ckpt.params, d, split);
    const fs::path file = dir / ("rankings_" + std::string(to_string(d)) + ".txt");
    io::save_rankings(file, d, lists);
    out << "wrote " << lists.size() << " rankings -> " << file.string() << "\n";
  }
  return kOk;
}

int cmd_eval(const Common& c, const EvalOpts& e, std::ostream& out) {
  io::KeyValues kv = common_kv(c);
  kv["checkpoint"] = e.checkpoint;
  for (std::size_t i = 0; i < e.rankings.size(); ++i) {
    kv["rankings." + std::to_string(i)] = e.rankings[i];
  }
  print_resolved(out, "eval", kv);
  if (!e.checkpoint.empty() && !e.rankings.empty()) {
    throw ConfigError("give either --checkpoint or --rankings, not both");
  }
  apply_threads(c.threads);
  const DatasetBundle bundle = io::load_bundle(c.bundle);
  const Split split = parse_split(c.split);
  const fs::path dir = prepare_out(c.out);
  io::write_key_values(dir / "resolved_config.txt", kv, "pillarrank eval");

  // Base ranking of each direction from the bundle's cross-modal scores.
  std::map<Direction, std::vector<RankingList>> base;
  for (Direction d : {Direction::I2T, Direction::T2I}) {
    const Modality qm = query_modality(d);
    const auto q = query_ids(bundle.splits.at(split, qm), qm);
    base[d] = base_rankings(q, bundle.store);
  }
  const EvalReport base_report = EvalReport::from(evaluate_direction(base[Direction::I2T], bundle.truth),
                                                  evaluate_direction(base[Direction::T2I], bundle.truth));
  write_report(dir, "report_base", base_report, "base");

  std::optional<EvalReport> refined;
  if (!e.checkpoint.empty()) {
    const Checkpoint ckpt = require_checkpoint(e.checkpoint);
    ckpt.config.validate(&bundle.store);
    const PillarSpace space(bundle.store, ckpt.config, ckpt.seed);
    refined = evaluate_split(space, bundle.truth, bundle.splits, split, &ckpt.params);
  } else if (!e.rankings.empty()) {
    auto lists = base;
    for (const auto& file : e.rankings) {
      Direction d{};
      auto loaded = io::load_rankings(file, &d);
      lists[d] = std::move(loaded);
    }
    refined = EvalReport::from(evaluate_direction(lists[Direction::I2T], bundle.truth),
                               evaluate_direction(lists[Direction::T2I], bundle.truth));
  }

  if (refined) {
    write_report(dir, "report_refined", *refined, "re-ranked");
    const std::string table = comparison_table(base_report, *refined);
    write_text(dir / "comparison.txt", table);
    out << table;
  } else {
    out << base_report.to_table("base");
  }
  return kOk;
}

int cmd_baseline(const Common& c, const BaselineOpts& b, std::ostream& out) {
  io::KeyValues kv = common_kv(c);
  kv["method"] = b.method;
  kv["n_expand"] = std::to_string(b.n_expand);
  kv["alpha"] = std::to_string(b.alpha);
  kv["pipeline"] = b.pipeline;
  kv["k1"] = std::to_string(b.k1);
  kv["blend"] = std::to_string(b.blend);
  kv["window_i2t"] = std::to_string(b.window_i2t);
  kv["window_t2i"] = std::to_string(b.window_t2i);
  std::string sweep;
  for (auto n : b.sweep) sweep += (sweep.empty() ? "" : ",") + std::to_string(n);
  kv["sweep"] = sweep;
  print_resolved(out, "baseline", kv);
  apply_threads(c.threads);

  const bool krnn = b.method == "k-reciprocal";
  std::optional<DBAMode> dba;
  QEConfig qe{b.n_expand, b.alpha, QEVariant::AQE};
  if (!krnn) {
    static const std::map<std::string, std::pair<QEVariant, bool>> kMethods = {
        {"aqe", {QEVariant::AQE, false}},        {"aqewd", {QEVariant::AQEwD, false}},
        {"alpha-qe", {QEVariant::AlphaQE, false}}, {"adba", {QEVariant::AQE, true}},
        {"adbawd", {QEVariant::AQEwD, true}},    {"alpha-dba", {QEVariant::AlphaQE, true}},
    };
    const auto it = kMethods.find(b.method);
    if (it == kMethods.end()) throw ConfigError("unknown baseline method '" + b.method + "'");
    qe.variant = it->second.first;
    if (it->second.second) dba = DBAMode{qe.variant, parse_dba_pipeline(b.pipeline)};
    qe.validate();
  }
  const KReciprocalConfig kr{b.k1, b.blend, b.window_i2t, b.window_t2i};
  if (krnn) kr.validate();
  if (krnn && !b.sweep.empty()) throw ConfigError("--sweep applies to QE/DBA methods only");

  const DatasetBundle bundle = io::load_bundle(c.bundle);
  const Split split = parse_split(c.split);
  const fs::path dir = prepare_out(c.out);
  io::write_key_values(dir / "resolved_config.txt", kv, "pillarrank baseline");

  if (!b.sweep.empty()) {
    const EvalReport base = evaluate_rankings(bundle, split, [&](std::span<const EntityId> q) {
      return embedding_rankings(bundle, q);
    });
    const auto rows = qe_sweep(bundle, split, qe, b.sweep, dba ? &*dba : nullptr);
    std::ostringstream tsv;
    tsv << "n_expand\ti2t_r1\ti2t_r5\ti2t_r10\tt2i_r1\tt2i_r5\tt2i_r10\trsum\tdelta_rsum\n";
    nlohmann::json js = nlohmann::json::array();
    for (const auto& r : rows) {
      char line[256];
      std::snprintf(line, sizeof line, "%zu\t%.17g\t%.17g\t%.17g\t%.17g\t%.17g\t%.17g\t%.17g\t%.17g\n",
                    r.n_expand, r.report.i2t.r1, r.report.i2t.r5, r.report.i2t.r10,
                    r.report.t2i.r1, r.report.t2i.r5, r.report.t2i.r10, r.report.rsum,
                    r.report.rsum - base.rsum);
      tsv << line;
      nlohmann::json row = r.report.to_json();
      row["n_expand"] = r.n_expand;
      js.push_back(row);
      char brief[128];
      std::snprintf(brief, sizeof brief, "n=%zu rsum=%.1f (base %.1f)\n", r.n_expand,
                    r.report.rsum, base.rsum);
      out << brief;
    }
    write_text(dir / "sweep.tsv", tsv.str());
    write_text(dir / "sweep.json", js.dump(2) + "\n");
    write_report(dir, "report_base", base, "embedding base");
    return kOk;
  }

  std::map<Direction, std::vector<RankingList>> lists;
  for (Direction d : {Direction::I2T, Direction::T2I}) {
    const Modality qm = query_modality(d);
    const auto q = query_ids(bundle.splits.at(split, qm), qm);
    if (krnn) lists[d] = k_reciprocal_rerank(q, bundle.store, kr);
    else if (dba) lists[d] = dba_rankings(bundle, q, *dba, qe);
    else lists[d] = qe_rankings(bundle, q, qe);
  }
  for (Direction d : directions(c.direction)) {
    io::save_rankings(dir / ("rankings_" + std::string(to_string(d)) + ".txt"), d, lists[d]);
  }
  const EvalReport report = EvalReport::from(evaluate_direction(lists[Direction::I2T], bundle.truth),
                                             evaluate_direction(lists[Direction::T2I], bundle.truth));
  write_report(dir, "report", report, b.method);
  out << report.to_table(b.method);
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"pillarrank: learnable pillar-based cross-modal re-ranking"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Configuration file (INI/TOML, one section per command)");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.fallthrough();

  Common common;
  SynthConfig synth;
  ModelConfig model;
  Ablations ablations;
  std::string checkpoint;
  EvalOpts eval;
  BaselineOpts base;

  auto* gen = app.add_subcommand("gen", "Generate a synthetic bundle");
  gen->add_option("--out", common.out, "Output bundle directory")->required();
  gen->add_option("--concepts", synth.concepts);
  gen->add_option("--images-per-concept", synth.images_per_concept);
  gen->add_option("--texts-per-image", synth.texts_per_image);
  gen->add_option("--dim", synth.dim);
  gen->add_option("--noise-sigma", synth.noise_sigma);
  gen->add_option("--cross-noise-sigma", synth.cross_noise_sigma);
  gen->add_option("--seed", synth.seed);

  auto* tr = app.add_subcommand("train", "Train both submodels and keep the best checkpoint");
  add_common(tr, common);
  add_model(tr, model, ablations);

  auto* rr = app.add_subcommand("rerank", "Re-rank a split with a checkpoint");
  add_common(rr, common);
  rr->add_option("--checkpoint", checkpoint, "Checkpoint directory")->required();
  rr->add_option("--split", common.split)->check(CLI::IsMember({"train", "val", "test"}));

  auto* ev = app.add_subcommand("eval", "Report base and re-ranked recall side by side");
  add_common(ev, common);
  ev->add_option("--checkpoint", eval.checkpoint, "Checkpoint to evaluate");
  ev->add_option("--rankings", eval.rankings, "Rankings files to evaluate");
  ev->add_option("--split", common.split)->check(CLI::IsMember({"train", "val", "test"}));

  auto* bl = app.add_subcommand("baseline", "Run a classic re-ranking baseline");
  add_common(bl, common);
  bl->add_option("--method", base.method,
                 "aqe, aqewd, alpha-qe, adba, adbawd, alpha-dba, k-reciprocal");
  bl->add_option("--n-expand", base.n_expand, "Expansion neighbors");
  bl->add_option("--alpha", base.alpha, "Exponent for alpha-weighted expansion");
  bl->add_option("--pipeline", base.pipeline, "DBA pipeline: sequential or joint");
  bl->add_option("--k1", base.k1, "Reciprocal neighbor depth");
  bl->add_option("--blend", base.blend, "Weight of the original score");
  bl->add_option("--window-i2t", base.window_i2t);
  bl->add_option("--window-t2i", base.window_t2i);
  bl->add_option("--sweep", base.sweep, "Evaluate each n_expand value")->delimiter(',');
  bl->add_option("--split", common.split)->check(CLI::IsMember({"train", "val", "test"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*gen) return cmd_gen(common, synth, out);
    if (*tr) return cmd_train(common, resolve_model(model, ablations, common.direction), out,
                                 err);
    if (*rr) return cmd_rerank(common, checkpoint, out);
    if (*ev) return cmd_eval(common, eval, out);
    if (*bl) return cmd_baseline(common, base, out);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kConfigError;
  } catch (const FormatError& e) {
    err << "i/o error: " << e.what() << "\n";
    return kIoError;
  } catch (const InputError& e) {
    err << "input error: " << e.what() << "\n";
    return kIoError;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kNumericAbort;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}

}  // namespace pillarrank::cli
