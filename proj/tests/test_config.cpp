// Copyright 2026 The ddpsgd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// RunConfig parsing plus end-to-end runs of the command-line tool.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include <gtest/gtest.h>

#include "ddpsgd/accountant.hpp"
#include "ddpsgd/config.hpp"
#include "ddpsgd/experiments.hpp"

namespace ddpsgd {
namespace {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "ddpsgd_cli_test" / name;
  fs::remove_all(dir);
  return dir;
}

// Runs the tool from the source tree so the default data paths resolve.
int run_cli(const std::string& args) {
  const std::string cmd = "cd " DDPSGD_SOURCE_DIR " && " DDPSGD_CLI " " +
                          args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<std::string> data_lines(const std::string& csv) {
  std::vector<std::string> out;
  std::istringstream in(csv);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '#') out.push_back(line);
  }
  return out;
}

TEST(RunConfigTest, DefaultsAndParse) {
  const RunConfig defaults;
  EXPECT_EQ(defaults.get_double("noise.variance"), 1.21);
  EXPECT_EQ(defaults.get_double("privacy.delta"), 1e-5);
  EXPECT_EQ(defaults.get_int("codebook.size"), 1000);

  const RunConfig cfg = RunConfig::parse(
      "# comment\n\n  train.q = 0.05 \nnoise.family=student_t\n"
      "noise.shape = 9\ndenoise.enabled = no\n");
  EXPECT_EQ(cfg.get_double("train.q"), 0.05);
  EXPECT_FALSE(cfg.get_bool("denoise.enabled"));
  const TrainingConfig tc = cfg.training();
  EXPECT_EQ(tc.q, 0.05);
  ASSERT_EQ(tc.noise_schedule.size(), 1u);
  EXPECT_EQ(tc.noise_schedule[0], NoiseSpec::student_t(1.21, 9));
  EXPECT_FALSE(tc.denoise.enabled);
}

TEST(RunConfigTest, Errors) {
  EXPECT_THROW(RunConfig::parse("bogus.key = 1\n"), InvalidArgument);
  EXPECT_THROW(RunConfig::parse("train.q\n"), InvalidArgument);
  RunConfig cfg;
  cfg.set("train.q", "abc");
  EXPECT_THROW(cfg.get_double("train.q"), InvalidArgument);
  cfg.set("denoise.enabled", "maybe");
  EXPECT_THROW(cfg.get_bool("denoise.enabled"), InvalidArgument);
  EXPECT_THROW(RunConfig::load("/nonexistent/run.cfg"), std::exception);
}

TEST(RunConfigTest, ResolvedAndHash) {
  RunConfig a;
  RunConfig b = RunConfig::parse(a.resolved());
  EXPECT_EQ(a.resolved(), b.resolved());
  EXPECT_EQ(a.hash(), b.hash());
  b.set("output.dir", "elsewhere");
  EXPECT_EQ(a.hash(), b.hash());
  b.set("train.seed", "3");
  EXPECT_NE(a.hash(), b.hash());
  // One line per documented key, sorted.
  std::istringstream lines(a.resolved());
  std::string line, prev;
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    EXPECT_LT(prev, line);
    prev = line;
    ++n;
  }
  EXPECT_EQ(n, RunConfig::keys().size());
}

TEST(RunConfigTest, NoiseSchedule) {
  EXPECT_EQ(parse_noise_entry("laplace:0.9"), NoiseSpec::laplace(0.9));
  EXPECT_EQ(parse_noise_entry("student_t:1.3:9"),
            NoiseSpec::student_t(1.3, 9));
  EXPECT_THROW(parse_noise_entry("laplace"), InvalidArgument);
  RunConfig cfg;
  cfg.set("noise.schedule", "gaussian:1.2,student_t:1.3:9");
  cfg.set("train.iterations", "2");
  const auto schedule = cfg.noise_schedule();
  ASSERT_EQ(schedule.size(), 2u);
  EXPECT_EQ(schedule[1], NoiseSpec::student_t(1.3, 9));
  cfg.set("train.iterations", "3");
  EXPECT_THROW(cfg.training().validate(), InvalidArgument);
}

TEST(Cli, GenCodebookIsReproducible) {
  const auto a = fresh_dir("cb_a");
  const auto b = fresh_dir("cb_b");
  const std::string common = " --set codebook.size=4 --set train.hidden=2";
  ASSERT_EQ(run_cli("gen-codebook --out " + a.string() + common), 0);
  ASSERT_EQ(run_cli("gen-codebook --out " + b.string() + common), 0);
  EXPECT_EQ(read_file(a / "codebook.bin"), read_file(b / "codebook.bin"));
  EXPECT_EQ(load_codebook((a / "codebook.bin").string()).size(), 4);
  EXPECT_EQ(read_file(a / "config.resolved.txt"),
            RunConfig::parse(read_file(a / "config.resolved.txt")).resolved());
}

TEST(Cli, AccountMatchesReference) {
  const auto dir = fresh_dir("account");
  ASSERT_EQ(run_cli("account --baseline --set noise.variance=1.21 --out " +
                    dir.string()),
            0);
  const std::string csv = read_file(dir / "account.csv");
  ASSERT_EQ(csv.rfind("# ddpsgd ", 0), 0u);
  const auto rows = data_lines(csv);
  ASSERT_EQ(rows.front(), "alpha,eps_rdp,eps_dp_at_delta");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    int alpha = 0;
    double rdp = 0;
    double dp = 0;
    ASSERT_EQ(std::sscanf(rows[i].c_str(), "%d,%lf,%lf", &alpha, &rdp, &dp),
              3);
    const double ref = 2000 * reference_subsampled_gaussian(alpha, 0.01, 1.1);
    EXPECT_NEAR(rdp, ref, 1e-6 * ref) << "alpha=" << alpha;
    EXPECT_NEAR(dp, rdp + std::log(1e5) / (alpha - 1), 1e-10 * dp);
  }
}

TEST(Cli, AccountZeroRate) {
  const auto dir = fresh_dir("account_q0");
  ASSERT_EQ(run_cli("account --baseline --set train.q=0 --out " +
                    dir.string()),
            0);
  const auto rows = data_lines(read_file(dir / "account.csv"));
  for (std::size_t i = 1; i < rows.size(); ++i) {
    int alpha = 0;
    double rdp = 1;
    double dp = 0;
    std::sscanf(rows[i].c_str(), "%d,%lf,%lf", &alpha, &rdp, &dp);
    EXPECT_EQ(rdp, 0.0);
  }
}

TEST(Cli, TrainZeroIterationsAndDeterminism) {
  const auto empty = fresh_dir("train0");
  ASSERT_EQ(run_cli("train --baseline --set train.iterations=0 --out " +
                    empty.string()),
            0);
  EXPECT_EQ(data_lines(read_file(empty / "trajectory.csv")),
            (std::vector<std::string>{
                "iteration,accuracy,eps_dp_so_far,ks_value,update_applied"}));

  const auto a = fresh_dir("train_a");
  const auto b = fresh_dir("train_b");
  const std::string args =
      "train --baseline --seed 4 --set train.iterations=6 "
      "--set train.eval_every=3 --set data.train_size=500 "
      "--set data.test_size=200 --out ";
  ASSERT_EQ(run_cli(args + a.string()), 0);
  ASSERT_EQ(run_cli(args + b.string()), 0);
  EXPECT_EQ(read_file(a / "trajectory.csv"), read_file(b / "trajectory.csv"));
  EXPECT_EQ(read_file(a / "summary.json"), read_file(b / "summary.json"));
  EXPECT_EQ(data_lines(read_file(a / "trajectory.csv")).size(), 7u);
  EXPECT_TRUE(fs::exists(a / "config.resolved.txt"));
}

TEST(Cli, L1ExperimentReproducible) {
  const auto a = fresh_dir("l1_a");
  const auto b = fresh_dir("l1_b");
  const std::string args =
      "l1-experiment --set l1.trials=2000 --set l1.targets=0.3 --out ";
  ASSERT_EQ(run_cli(args + a.string()), 0);
  ASSERT_EQ(run_cli(args + b.string()), 0);
  const std::string csv = read_file(a / "l1.csv");
  EXPECT_EQ(csv, read_file(b / "l1.csv"));
  const auto rows = data_lines(csv);
  ASSERT_EQ(rows.size(), 1u + 3);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    char family[32];
    double target, variance, achieved, mean, se;
    ASSERT_EQ(std::sscanf(rows[i].c_str(), "%31[^,],%lf,%lf,%lf,%lf,%lf",
                          family, &target, &variance, &achieved, &mean, &se),
              6);
    EXPECT_LT(std::abs(achieved - target), 1e-4) << rows[i];
  }
}

TEST(Cli, HistogramCountsEveryCoordinate) {
  const auto dir = fresh_dir("hist");
  ASSERT_EQ(run_cli("histogram --set histogram.records=20 --set "
                    "histogram.bins=10 --set train.hidden=4 --out " +
                    dir.string()),
            0);
  const auto rows = data_lines(read_file(dir / "histogram.csv"));
  ASSERT_EQ(rows.size(), 11u);
  long total = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    total += std::stol(rows[i].substr(rows[i].rfind(',') + 1));
  }
  EXPECT_EQ(total, 20L * (784 * 4 + 4 + 10 * 4 + 10));
}

TEST(Cli, FailuresExitNonzero) {
  const auto dir = fresh_dir("fail");
  EXPECT_NE(run_cli("account --set no.such.key=1 --out " + dir.string()), 0);
  EXPECT_NE(run_cli("train --set data.images=/nonexistent --out " +
                    dir.string()),
            0);
  EXPECT_NE(run_cli("account --config /nonexistent.cfg"), 0);
  EXPECT_NE(run_cli("frobnicate"), 0);
  EXPECT_NE(run_cli(""), 0);
}

}  // namespace
}  // namespace ddpsgd
