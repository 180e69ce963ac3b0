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

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "pillarrank/io.hpp"
#include "pillarrank/training.hpp"
#include "test_support.hpp"

namespace pillarrank {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "pillarrank");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

std::size_t count_lines(const std::string& s) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = testing::temp_dir("cli").string();
    const auto r = run({"gen", "--out", bundle(), "--concepts", "12", "--images-per-concept",
                        "2", "--texts-per-image", "3", "--dim", "12", "--seed", "4"});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  static void TearDownTestSuite() { fs::remove_all(root_); }

  static std::string bundle() { return (fs::path(root_) / "bundle").string(); }
  static std::string dir(const std::string& name) { return (fs::path(root_) / name).string(); }

  static std::vector<std::string> train_args(const std::string& out,
                                             const std::string& epochs = "2") {
    return {"train", "--bundle", bundle(), "--out", out, "--pillars", "4", "--hidden", "8",
            "--k-i2t", "4", "--k-t2i", "3", "--top-c", "3", "--epochs", epochs, "--batch", "8",
            "--seed", "3"};
  }

  static inline std::string root_;
};

TEST_F(Cli, GenWritesBundleAndResolvedConfig) {
  EXPECT_TRUE(fs::exists(fs::path(bundle()) / io::kBundleManifest));
  const auto kv = io::read_key_values(fs::path(bundle()) / "resolved_config.txt");
  EXPECT_EQ(kv.at("synthetic.concepts"), "12");
  EXPECT_EQ(kv.at("synthetic.seed"), "4");
  const auto b = io::load_bundle(bundle());
  EXPECT_EQ(b.store.num_images(), 24u);
  EXPECT_EQ(b.store.num_texts(), 72u);
  EXPECT_EQ(b.provenance.at("synthetic.dim"), "12");
}

TEST_F(Cli, ParseAndConfigErrorsExitTwo) {
  EXPECT_EQ(run({"gen", "--out", dir("bad_dim"), "--dim", "1"}).code, 2);
  EXPECT_EQ(run({"gen"}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"train", "--bundle", bundle(), "--out", dir("bad_cfg"), "--pillars", "0"}).code,
            2);
  EXPECT_EQ(run({"train", "--bundle", bundle(), "--out", dir("bad_dir"), "--direction", "up"}).code,
            2);
  EXPECT_EQ(run({"baseline", "--bundle", bundle(), "--out", dir("bad_m"), "--method", "xqe"}).code,
            2);
}

TEST_F(Cli, ConfigFileSectionsAndPrecedence) {
  const fs::path cfg = fs::path(root_) / "gen.toml";
  {
    std::ofstream f(cfg);
    f << "[gen]\nconcepts = 5\ndim = 6\nimages-per-concept = 1\ntexts-per-image = 2\n";
  }
  const auto r = run({"--config", cfg.string(), "gen", "--out", dir("from_cfg"), "--dim", "7"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto kv = io::read_key_values(fs::path(dir("from_cfg")) / "resolved_config.txt");
  EXPECT_EQ(kv.at("synthetic.concepts"), "5");
  EXPECT_EQ(kv.at("synthetic.dim"), "7");
  EXPECT_NE(r.out.find("synthetic.dim=7"), std::string::npos);

  const fs::path bad = fs::path(root_) / "bad.toml";
  {
    std::ofstream f(bad);
    f << "[gen]\nconcepts = 5\nsparkle = 2\n";
  }
  EXPECT_EQ(run({"--config", bad.string(), "gen", "--out", dir("bad_cfg_file")}).code, 2);
}

TEST_F(Cli, ZeroEpochCheckpointIsInitialization) {
  const auto r = run(train_args(dir("epoch0"), "0"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto ckpt = load_checkpoint(fs::path(dir("epoch0")) / "checkpoint");
  EXPECT_EQ(ckpt.epoch, 0u);
  EXPECT_TRUE(ckpt.params == ModelParams::init(ckpt.config, 3));
  EXPECT_EQ(ckpt.config.pillars, 4u);
}

TEST_F(Cli, TrainIsReproducibleAcrossRunsAndThreadCounts) {
  ASSERT_EQ(run(train_args(dir("run_a"))).code, 0);
  ASSERT_EQ(run(train_args(dir("run_b"))).code, 0);
  auto one = train_args(dir("run_t1"));
  one.insert(one.end(), {"--threads", "1"});
  ASSERT_EQ(run(one).code, 0);
  auto four = train_args(dir("run_t4"));
  four.insert(four.end(), {"--threads", "4"});
  ASSERT_EQ(run(four).code, 0);
  const auto ref = slurp(fs::path(dir("run_a")) / "checkpoint" / "tensors.lprr");
  ASSERT_FALSE(ref.empty());
  for (const char* other : {"run_b", "run_t1", "run_t4"}) {
    EXPECT_EQ(slurp(fs::path(dir(other)) / "checkpoint" / "tensors.lprr"), ref) << other;
    EXPECT_EQ(slurp(fs::path(dir(other)) / "train_log.txt"),
              slurp(fs::path(dir("run_a")) / "train_log.txt"))
        << other;
  }
  EXPECT_EQ(count_lines(slurp(fs::path(dir("run_a")) / "train_log.txt")), 3u);
}

TEST_F(Cli, RerankAndEvalAgree) {
  ASSERT_EQ(run(train_args(dir("model"))).code, 0);
  const std::string ckpt = (fs::path(dir("model")) / "checkpoint").string();

  const auto rr = run({"rerank", "--bundle", bundle(), "--checkpoint", ckpt, "--out",
                       dir("ranked")});
  ASSERT_EQ(rr.code, 0) << rr.err;
  const fs::path i2t = fs::path(dir("ranked")) / "rankings_i2t.txt";
  const fs::path t2i = fs::path(dir("ranked")) / "rankings_t2i.txt";
  ASSERT_TRUE(fs::exists(i2t) && fs::exists(t2i));

  const auto e1 = run({"eval", "--bundle", bundle(), "--checkpoint", ckpt, "--out",
                       dir("eval_ckpt")});
  ASSERT_EQ(e1.code, 0) << e1.err;
  const auto e2 = run({"eval", "--bundle", bundle(), "--rankings", i2t.string(), "--rankings",
                       t2i.string(), "--out", dir("eval_files")});
  ASSERT_EQ(e2.code, 0) << e2.err;
  const auto refined = slurp(fs::path(dir("eval_ckpt")) / "report_refined.json");
  EXPECT_EQ(refined, slurp(fs::path(dir("eval_files")) / "report_refined.json"));
  EXPECT_TRUE(fs::exists(fs::path(dir("eval_ckpt")) / "comparison.txt"));

  const auto js = nlohmann::json::parse(refined);
  const double sum = js["i2t.r1"].get<double>() + js["i2t.r5"].get<double>() +
                     js["i2t.r10"].get<double>() + js["t2i.r1"].get<double>() +
                     js["t2i.r5"].get<double>() + js["t2i.r10"].get<double>();
  EXPECT_NEAR(js["rsum"].get<double>(), sum, 1e-9);
}

TEST_F(Cli, MissingCheckpointExitsThree) {
  const auto r = run({"rerank", "--bundle", bundle(), "--checkpoint", dir("nowhere"), "--out",
                      dir("rr_missing")});
  EXPECT_EQ(r.code, 3);
  EXPECT_FALSE(r.err.empty());
  EXPECT_EQ(run({"eval", "--bundle", dir("no_bundle"), "--out", dir("ev_missing")}).code, 3);
}

TEST_F(Cli, DivergentTrainingExitsFour) {
  auto args = train_args(dir("diverge"));
  args.insert(args.end(), {"--lr", "1e300", "--momentum", "0"});
  const auto r = run(args);
  EXPECT_EQ(r.code, 4);
  EXPECT_TRUE(fs::exists(fs::path(dir("diverge")) / "checkpoint" / "manifest.txt"));
}

TEST_F(Cli, BaselineSweepAndSingleRun) {
  const auto r = run({"baseline", "--bundle", bundle(), "--out", dir("sweep"), "--method",
                      "alpha-qe", "--sweep", "0,1,2,4"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto tsv = slurp(fs::path(dir("sweep")) / "sweep.tsv");
  EXPECT_EQ(count_lines(tsv), 5u);
  EXPECT_EQ(nlohmann::json::parse(slurp(fs::path(dir("sweep")) / "sweep.json")).size(), 4u);
  // n_expand = 0 reproduces the embedding base: zero delta.
  std::istringstream lines(tsv);
  std::string header, first;
  std::getline(lines, header);
  std::getline(lines, first);
  EXPECT_EQ(first.substr(first.rfind('\t') + 1), "0");

  for (const char* m : {"aqe", "adba", "k-reciprocal"}) {
    const auto one = run({"baseline", "--bundle", bundle(), "--out", dir(std::string("bl_") + m),
                          "--method", m, "--k1", "5"});
    ASSERT_EQ(one.code, 0) << m << ": " << one.err;
    EXPECT_TRUE(fs::exists(fs::path(dir(std::string("bl_") + m)) / "report.json")) << m;
  }
}

}  // namespace
}  // namespace pillarrank
