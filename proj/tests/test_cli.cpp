// Copyright 2026 The satoffload Authors.
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
#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>

#include "json.hpp"

namespace {

namespace fs = std::filesystem;

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("satoffload_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  CliResult run(const std::string& args, const std::string& env = "") {
    const fs::path out = dir_ / "stdout.txt", err = dir_ / "stderr.txt";
    const std::string cmd = env + " " + SATOFFLOAD_CLI_PATH + " " + args + " >" + out.string() + " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    CliResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
  }

  std::string write_config(const std::string& name, const std::string& body) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << body;
    return p.string();
  }

  std::string quick_config() {
    return write_config("quick.json", R"({
      "scenario": {"cte_count": 20, "task_count": 4, "horizon_slots": 120, "arrival_span_slots": 60,
                   "approach_lead_slots": 30, "cns": {"bandwidth_hz": 1e9}, "lms": {"count": 1},
                   "cubesat": {"count": 3}},
      "episodes": 4,
      "woa": {"population": 4, "budget": 3},
      "sweep": {"axis": "alpha", "alphas": [0.3, 0.7]}
    })");
  }

  /// Every CSV under `d`, keyed by file name.
  static std::map<std::string, std::string> csvs(const fs::path& d) {
    std::map<std::string, std::string> m;
    for (const auto& e : fs::directory_iterator(d)) {
      if (e.path().extension() == ".csv") m[e.path().filename().string()] = slurp(e.path());
    }
    return m;
  }

  fs::path dir_;
};

TEST_F(Cli, VerifyAllocatorPrintsCounts) {
  const CliResult r = run("verify-allocator --out " + (dir_ / "v").string());
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("total: "), std::string::npos);
  EXPECT_NE(r.out.find(" 0 failed"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir_ / "v" / "verify_allocator.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "v" / "manifest.json"));
}

TEST_F(Cli, GenerateIsDeterministic) {
  const std::string cfg = quick_config();
  ASSERT_EQ(run("generate --config " + cfg + " --seed 7 --out " + (dir_ / "a").string()).code, 0);
  ASSERT_EQ(run("generate --config " + cfg + " --seed 7 --out " + (dir_ / "b").string()).code, 0);
  const std::string a = slurp(dir_ / "a" / "scenario_7.json");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, slurp(dir_ / "b" / "scenario_7.json"));
}

TEST_F(Cli, MissingConfigIsUsageErrorNamingPath) {
  const std::string missing = (dir_ / "no_such.json").string();
  const CliResult r = run("generate --config " + missing);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find(missing), std::string::npos);
}

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("launch").code, 2);
  EXPECT_EQ(run("generate --frobnicate").code, 2);
  EXPECT_EQ(run("evaluate --scheduler greedy").code, 2);
  EXPECT_EQ(run("evaluate --profile huge").code, 2);
  EXPECT_EQ(run("generate --seed minus").code, 2);
  const std::string bad = write_config("bad.json", R"({"scenario": {"task_cnt": 3}})");
  const CliResult r = run("generate --config " + bad);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("task_cnt"), std::string::npos);
  const std::string broken = write_config("broken.json", "{ not json");
  EXPECT_EQ(run("generate --config " + broken).code, 2);
  EXPECT_EQ(run("train --scheduler woa --config " + quick_config()).code, 2);
  EXPECT_EQ(run("generate", "SATOFFLOAD_WORKERS=many").code, 2);
}

TEST_F(Cli, HelpExitsZero) { EXPECT_EQ(run("--help").code, 0); }

TEST_F(Cli, EvaluateRepeatsByteIdentically) {
  const std::string cfg = quick_config();
  for (const char* s : {"random", "comappo"}) {
    const fs::path a = dir_ / (std::string(s) + "_a"), b = dir_ / (std::string(s) + "_b");
    ASSERT_EQ(run(std::string("evaluate --scheduler ") + s + " --seed 3 --config " + cfg + " --out " + a.string()).code,
              0);
    ASSERT_EQ(run(std::string("evaluate --scheduler ") + s + " --seed 3 --config " + cfg + " --out " + b.string()).code,
              0);
    const auto ca = csvs(a);
    EXPECT_GE(ca.size(), 4u);
    EXPECT_EQ(ca, csvs(b));
    EXPECT_TRUE(ca.count("metrics.csv"));
    EXPECT_TRUE(ca.count(std::string("trajectory_") + s + "_3.csv"));
  }
}

TEST_F(Cli, TrainWritesCurveCheckpointAndManifest) {
  const fs::path out = dir_ / "t";
  const CliResult r = run("train --scheduler comappo --seed 2 --config " + quick_config() + " --out " + out.string());
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string curve = slurp(out / "learning_curve_comappo_2.csv");
  EXPECT_EQ(curve.substr(0, curve.find('\n')), "episode,agent_class,cumulative_reward,policy_loss,value_loss,entropy");
  EXPECT_TRUE(fs::exists(out / "checkpoint_comappo_2.bin"));
  const auto m = nlohmann::json::parse(slurp(out / "manifest.json"));
  EXPECT_EQ(m["command"], "train");
  EXPECT_EQ(m["seeds"], nlohmann::json::array({2}));
  EXPECT_EQ(m["config_hash"].get<std::string>().size(), 16u);
}

TEST_F(Cli, SweepAndAlphaSweepWriteOneRowPerRun) {
  const std::string cfg = quick_config();
  const fs::path out = dir_ / "s";
  ASSERT_EQ(run("alpha-sweep --scheduler woa --config " + cfg + " --out " + out.string()).code, 0);
  const std::string csv = slurp(out / "alpha_sweep.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 2);
  const CliResult r = run("sweep --scheduler random --config " + cfg + " --out " + out.string(), "SATOFFLOAD_WORKERS=2");
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string sweep = slurp(out / "sweep_alpha.csv");
  EXPECT_EQ(std::count(sweep.begin(), sweep.end(), '\n'), 1 + 2);
}

TEST_F(Cli, AblationWritesBothVariants) {
  const fs::path out = dir_ / "ab";
  ASSERT_EQ(run("ablation --scheduler comappo --config " + quick_config() + " --out " + out.string()).code, 0);
  const std::string csv = slurp(out / "ablation.csv");
  EXPECT_NE(csv.find("closed_form"), std::string::npos);
  EXPECT_NE(csv.find("learned_shares"), std::string::npos);
}

}  // namespace
