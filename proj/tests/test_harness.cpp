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

#include <cstdlib>
#include <sstream>

#include "satoffload/harness.hpp"
#include "test_util.hpp"

namespace satoffload {
namespace {

Outcome outcome(int task, double t, double p, Layer layer = Layer::kCns, bool ok = true) {
  Outcome o;
  o.task = task;
  o.t_ser_s = t;
  o.p_ser = p;
  o.layer = layer;
  o.success = ok;
  return o;
}

ExperimentConfig quick_config() {
  ExperimentConfig c = toy_experiment_config();
  c.scenario.task_count = 4;
  c.episodes = 4;
  c.woa.population = 4;
  c.woa.budget = 3;
  return c;
}

TEST(Metrics, SingleSubtask) {
  const std::vector<Outcome> o{outcome(0, 2.0, 4.0)};
  const MetricsReport r = compute_metrics(o, Weights{0.5, 0.5});
  EXPECT_FALSE(r.empty);
  EXPECT_DOUBLE_EQ(r.mst, 2.0);
  EXPECT_DOUBLE_EQ(r.msp, 4.0);
  EXPECT_DOUBLE_EQ(r.objective, 3.0);
  EXPECT_DOUBLE_EQ(r.success_rate, 1.0);
}

TEST(Metrics, DuplicatedTaskLeavesObjectiveUnchanged) {
  const std::vector<Outcome> one{outcome(0, 2.0, 4.0), outcome(0, 6.0, 1.0)};
  const std::vector<Outcome> two{outcome(0, 2.0, 4.0), outcome(0, 6.0, 1.0), outcome(1, 2.0, 4.0),
                                 outcome(1, 6.0, 1.0)};
  const Weights w{0.3, 0.7};
  EXPECT_DOUBLE_EQ(compute_metrics(one, w).objective, compute_metrics(two, w).objective);
}

TEST(Metrics, HandFixtureTwoTasks) {
  // Task 0: T = (1, 3) -> 2, P = (2, 4) -> 3. Task 1: T = (5, 7) -> 6, P = (1, 1) -> 1.
  // MST = 4, MSP = 2, eta = 0.25 * 4 + 0.75 * 2 = 2.5.
  const std::vector<Outcome> o{outcome(0, 1, 2, Layer::kCubeSat), outcome(0, 3, 4, Layer::kLms),
                               outcome(1, 5, 1, Layer::kCns, false), outcome(1, 7, 1, Layer::kCubeSat)};
  const MetricsReport r = compute_metrics(o, Weights{0.25, 0.75});
  EXPECT_DOUBLE_EQ(r.mst, 4.0);
  EXPECT_DOUBLE_EQ(r.msp, 2.0);
  EXPECT_DOUBLE_EQ(r.objective, 2.5);
  EXPECT_DOUBLE_EQ(r.success_rate, 0.75);
  EXPECT_DOUBLE_EQ(r.proportions[static_cast<int>(Layer::kCubeSat)], 0.5);
  EXPECT_DOUBLE_EQ(r.proportions[static_cast<int>(Layer::kLms)], 0.25);
  EXPECT_DOUBLE_EQ(r.proportions[static_cast<int>(Layer::kCns)], 0.25);
  EXPECT_EQ(r.tasks, 2);
  EXPECT_EQ(r.subtasks, 4);
}

TEST(Metrics, UnequalTaskSizesWeighTasksEqually) {
  const std::vector<Outcome> o{outcome(0, 10, 0), outcome(1, 0, 0), outcome(1, 0, 0), outcome(1, 0, 0)};
  EXPECT_DOUBLE_EQ(compute_metrics(o, Weights{0.5, 0.5}).mst, 5.0);
}

TEST(Metrics, EmptyReportIsMarkedNotNan) {
  const MetricsReport r = compute_metrics({}, Weights{});
  EXPECT_TRUE(r.empty);
  EXPECT_EQ(r.objective, 0.0);
  EXPECT_EQ(r.tasks, 0);
}

TEST(Metrics, IdentityAndProportionsOnRandomOutcomes) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  std::uniform_int_distribution<int> task(0, 6), layer(0, 2);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Outcome> o;
    for (int i = 0; i < 30; ++i) o.push_back(outcome(task(rng), u(rng), u(rng), static_cast<Layer>(layer(rng))));
    const double a = 0.1 + 0.8 * u(rng) / 10.0;
    const MetricsReport r = compute_metrics(o, Weights{a, 1.0 - a});
    EXPECT_NEAR(r.objective, a * r.mst + (1.0 - a) * r.msp, 1e-12);
    EXPECT_NEAR(r.proportions[0] + r.proportions[1] + r.proportions[2], 1.0, 1e-12);
  }
}

TEST(Metrics, SummaryMeanAndSampleSd) {
  const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
  const Summary s = summarize(v);
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_NEAR(s.sd, std::sqrt(5.0 / 3.0), 1e-12);
  EXPECT_EQ(summarize(std::vector<double>{7.0}).sd, 0.0);
}

TEST(Metrics, LayerSharesByBin) {
  std::vector<Outcome> o;
  for (double m : {12.0, 25.0, 35.0, 90.0}) {
    Outcome x = outcome(0, 1, 1, m < 30 ? Layer::kCubeSat : Layer::kCns);
    x.memory_mb = m;
    o.push_back(x);
  }
  const std::vector<double> edges{10, 30, 90};
  const auto bins = layer_shares_by_bin(o, true, edges);
  ASSERT_EQ(bins.size(), 2u);
  EXPECT_EQ(bins[0].count, 2);
  EXPECT_EQ(bins[1].count, 2);
  EXPECT_DOUBLE_EQ(bins[0].shares[static_cast<int>(Layer::kCubeSat)], 1.0);
  EXPECT_DOUBLE_EQ(bins[1].shares[static_cast<int>(Layer::kCns)], 1.0);
  EXPECT_THROW(layer_shares_by_bin(o, true, std::vector<double>{10}), DomainError);
}

TEST(Config, JsonRoundTripAndHash) {
  ExperimentConfig c = quick_config();
  c.seeds = {3, 9};
  c.schedulers = {Scheduler::kWoa, Scheduler::kRandom};
  c.sweep.axis = SweepAxis::kMemoryRange;
  const ExperimentConfig d = config_from_json(config_to_json(c));
  EXPECT_EQ(config_to_json(d), config_to_json(c));
  EXPECT_EQ(config_hash(d), config_hash(c));
  c.seeds = {4};
  EXPECT_NE(config_hash(d), config_hash(c));
}

TEST(Config, MissingKeysKeepDefaults) {
  const ExperimentConfig c = config_from_json(Json::parse(R"({"scenario": {"task_count": 7}})"));
  EXPECT_EQ(c.scenario.task_count, 7);
  const ScenarioConfig defaults;
  EXPECT_EQ(c.scenario.cte_count, defaults.cte_count);
  EXPECT_EQ(c.scenario.lms.count, defaults.lms.count);
  EXPECT_EQ(c.env.weights.time, 0.5);
}

TEST(Config, StrictParsing) {
  EXPECT_THROW(config_from_json(Json::parse(R"({"bogus": 1})")), ConfigError);
  EXPECT_THROW(config_from_json(Json::parse(R"({"scenario": {"lms": {"cnt": 1}}})")), ConfigError);
  EXPECT_THROW(config_from_json(Json::parse(R"({"scenario": {"task_count": "ten"}})")), ConfigError);
  EXPECT_THROW(config_from_json(Json::parse(R"({"scenario": {"task_count": 1.5}})")), ConfigError);
  EXPECT_THROW(config_from_json(Json::parse(R"({"scheduler": "greedy"})")), ConfigError);
  EXPECT_THROW(config_from_json(Json::parse(R"({"version": 2})")), ConfigError);
  EXPECT_THROW(config_from_json(Json::parse(R"([1, 2])")), ConfigError);
}

TEST(Config, WeightsMustSumToOne) {
  EXPECT_THROW(config_from_json(Json::parse(R"({"env": {"alpha_time": 0.6, "alpha_price": 0.6}})")), ConfigError);
  EXPECT_NO_THROW(config_from_json(Json::parse(R"({"env": {"alpha_time": 0.3, "alpha_price": 0.7}})")));
}

TEST(Config, ErrorNamesTheKey) {
  try {
    config_from_json(Json::parse(R"({"ppo": {"epochs": "four"}})"));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("config.ppo.epochs"), std::string::npos);
  }
}

TEST(Config, MissingFileNamesPath) {
  try {
    load_config("/nonexistent/dir/cfg.json");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/dir/cfg.json"), std::string::npos);
  }
}

TEST(Config, TrainConfigFollowsProfile) {
  ExperimentConfig c;
  EXPECT_EQ(c.train_config(Scheduler::kCoMappo, 1).episodes, 2000);
  c.profile = Profile::kPaper;
  const TrainConfig t = c.train_config(Scheduler::kCcPpo, 5);
  EXPECT_EQ(t.episodes, 150000);
  EXPECT_EQ(t.mode, TrainMode::kCentral);
  EXPECT_EQ(t.seed, 5u);
  EXPECT_EQ(t.net.embed, 512);
  c.episodes = 10;
  EXPECT_EQ(c.train_config(Scheduler::kCoMappo, 1).episodes, 10);
}

TEST(Scenario, JsonHasEveryEntity) {
  const Scenario sc = generate_scenario(toy_scenario_config(), 3);
  const Json j = scenario_to_json(sc);
  EXPECT_EQ(j["satellites"].size(), sc.satellites.size());
  EXPECT_EQ(j["ctes"].size(), sc.ctes.size());
  EXPECT_EQ(j["tasks"].size(), sc.tasks.size());
  EXPECT_EQ(j["subtasks"].size(), sc.subtasks.size());
  EXPECT_EQ(j["config"]["cte_count"], 20);
  EXPECT_EQ(scenario_to_json(generate_scenario(toy_scenario_config(), 3)).dump(), j.dump());
}

TEST(Evaluate, FailedSubtasksAreServedByCns) {
  const Scenario sc = generate_scenario(toy_scenario_config(), 3);
  Environment env(sc);
  std::mt19937_64 rng(3);
  while (!env.done()) env.step(random_x(env, rng).actions);
  const auto outcomes = outcomes_of(env);
  int failed = 0;
  for (const auto& o : outcomes) {
    const auto& rec = env.records()[o.subtask];
    EXPECT_EQ(o.attempted, rec.server >= 0 ? sc.satellites[rec.server].layer : Layer::kCns);
    EXPECT_EQ(o.layer, o.success ? o.attempted : Layer::kCns);
    EXPECT_DOUBLE_EQ(o.t_ser_s, rec.charged.t_ser_s);
    failed += o.success ? 0 : 1;
  }
  EXPECT_GT(failed, 0);
}

TEST(Evaluate, BaselinesAreDeterministic) {
  const ExperimentConfig c = quick_config();
  const Scenario sc = generate_scenario(c.scenario, 2);
  for (Scheduler s : {Scheduler::kWoa, Scheduler::kRandom}) {
    const Evaluation a = evaluate(sc, c, s, 2), b = evaluate(sc, c, s, 2);
    EXPECT_EQ(a.report.objective, b.report.objective);
    EXPECT_EQ(a.report.subtasks, static_cast<int>(sc.subtasks.size()));
    EXPECT_TRUE(a.curve.empty());
  }
}

TEST(Evaluate, LearnedSchedulerTrainsThenEvaluates) {
  const ExperimentConfig c = quick_config();
  const Scenario sc = generate_scenario(c.scenario, 1);
  const Evaluation ev = evaluate(sc, c, Scheduler::kCoMappo, 1);
  EXPECT_EQ(ev.episode_rewards.size(), 4u);
  EXPECT_FALSE(ev.curve.empty());
  EXPECT_FALSE(ev.report.empty);
  EXPECT_FALSE(ev.trajectory.empty());
  ev.report.check_identity();
}

TEST(Sweep, SinglePointEqualsEvaluate) {
  ExperimentConfig c = quick_config();
  c.sweep.axis = SweepAxis::kAlpha;
  c.sweep.alphas = {0.5};
  c.schedulers = {Scheduler::kWoa};
  c.seeds = {3};
  const auto rows = run_sweep(c);
  ASSERT_EQ(rows.size(), 1u);
  const Scenario sc = generate_scenario(c.scenario, 3);
  EXPECT_EQ(rows[0].report.objective, evaluate(sc, c, Scheduler::kWoa, 3).report.objective);
}

TEST(Sweep, RowCountIsPointsTimesSchedulersTimesSeeds) {
  ExperimentConfig c = quick_config();
  c.sweep.axis = SweepAxis::kMemoryRange;
  c.sweep.memory_ranges = {{10, 30}, {30, 60}, {60, 90}};
  c.schedulers = {Scheduler::kWoa, Scheduler::kRandom};
  c.seeds = {1, 2};
  const auto rows = run_sweep(c);
  EXPECT_EQ(rows.size(), 3u * 2u * 2u);
  EXPECT_EQ(rows[0].label, "10-30");
  EXPECT_EQ(rows.back().label, "60-90");
  for (const auto& r : rows) EXPECT_FALSE(r.failed) << r.error;
}

TEST(Sweep, SubtaskAxisScalesByDivisor) {
  ExperimentConfig c = quick_config();
  c.sweep.subtask_counts = {500, 1000};
  const auto points = sweep_points(c);
  ASSERT_EQ(points.size(), 2u);
  EXPECT_EQ(points[0].config.scenario.task_count, 10);
  EXPECT_EQ(points[1].value, 100.0);
}

TEST(Sweep, FailedPointIsMarkedAndSweepContinues) {
  ExperimentConfig c = quick_config();
  c.sweep.axis = SweepAxis::kMemoryRange;
  c.sweep.memory_ranges = {{10, 30}, {30, 60}};
  c.schedulers = {Scheduler::kRandom};
  std::vector<SweepPoint> points = sweep_points(c);
  points[0].config.scenario.cubesat.count = 0;  // no scenario can satisfy the CubeSat minimum
  points[0].config.scenario.max_generation_retries = 1;
  const auto rows = run_points(points, "memory_range", c.schedulers, c.seeds, 1);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_TRUE(rows[0].failed);
  EXPECT_FALSE(rows[0].error.empty());
  EXPECT_FALSE(rows[1].failed);
  std::ostringstream os;
  write_sweep_csv(os, rows);
  EXPECT_NE(os.str().find(",failed,"), std::string::npos);
}

TEST(Sweep, WorkerCountDoesNotChangeResults) {
  ExperimentConfig c = quick_config();
  c.sweep.axis = SweepAxis::kAlpha;
  c.schedulers = {Scheduler::kWoa, Scheduler::kRandom};
  c.seeds = {1, 2};
  std::ostringstream a, b;
  write_sweep_csv(a, run_sweep(c, 1));
  write_sweep_csv(b, run_sweep(c, 3));
  EXPECT_EQ(a.str(), b.str());
}

TEST(Sweep, AlphaPointMatchesDefaultEvaluation) {
  ExperimentConfig c = quick_config();
  c.sweep.alphas = {0.3, 0.5};
  c.schedulers = {Scheduler::kRandom};
  const auto rows = alpha_tradeoff(c);
  ASSERT_EQ(rows.size(), 2u);
  const Scenario sc = generate_scenario(c.scenario, 1);
  EXPECT_EQ(rows[1].report.objective, evaluate(sc, c, Scheduler::kRandom, 1).report.objective);
  for (const auto& r : rows) {
    EXPECT_NEAR(r.report.objective, r.value * r.report.mst + (1.0 - r.value) * r.report.msp, 1e-12);
  }
}

TEST(Sweep, AblationRunsLearnersInBothVariants) {
  ExperimentConfig c = quick_config();
  c.schedulers = {Scheduler::kCoMappo, Scheduler::kRandom};
  const auto rows = run_ablation(c);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[2].label, "learned_shares");
  EXPECT_EQ(rows[2].scheduler, Scheduler::kCoMappo);
  for (const auto& r : rows) EXPECT_FALSE(r.failed) << r.error;
}

TEST(Workers, ReadFromEnvironment) {
  ::unsetenv("SATOFFLOAD_WORKERS");
  EXPECT_EQ(worker_count(), 1);
  ::setenv("SATOFFLOAD_WORKERS", "3", 1);
  EXPECT_EQ(worker_count(), 3);
  ::setenv("SATOFFLOAD_WORKERS", "zero", 1);
  EXPECT_THROW(worker_count(), ConfigError);
  ::setenv("SATOFFLOAD_WORKERS", "0", 1);
  EXPECT_THROW(worker_count(), ConfigError);
  ::unsetenv("SATOFFLOAD_WORKERS");
}

TEST(Manifest, RecordsHashSeedsAndVersions) {
  Manifest m;
  m.command = "sweep";
  m.config = quick_config();
  m.outputs = {"sweep.csv"};
  const Json j = m.to_json();
  EXPECT_EQ(j["config_hash"], config_hash(m.config));
  EXPECT_EQ(j["seeds"], Json::array({1}));
  EXPECT_TRUE(j["versions"].contains("eigen"));
  EXPECT_EQ(j["outputs"][0], "sweep.csv");
}

TEST(Hash, Fnv1aReferenceValues) {
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cull);
}

}  // namespace
}  // namespace satoffload
