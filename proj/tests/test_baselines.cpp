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

#include <cmath>
#include <functional>
#include <random>

#include "satoffload/baselines.hpp"
#include "test_util.hpp"

namespace satoffload {
namespace {

using testing_util::manual_scenario;

int first_decider(const Environment& env) {
  for (int a = 0; a < env.num_agents(); ++a) {
    if (env.has_decision(a)) return a;
  }
  return -1;
}

TEST(RandomX, SingleOpenEntryAlwaysChosen) {
  std::mt19937_64 rng(3);
  const std::vector<int> valid{0, 2, 3, 4};
  const std::vector<int> open{3};
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(draw_open(valid, open, rng), 3);
  EXPECT_EQ(draw_open(valid, {}, rng), -1);
}

TEST(RandomX, SeedFixedDeterminism) {
  const Scenario sc = generate_scenario(testing_util::toy_config(), 4);
  Environment a(sc), b(sc);
  a.reset(0);
  b.reset(0);
  std::mt19937_64 ra(11), rb(11);
  while (!a.done()) {
    const JointDecision da = random_x(a, ra), db = random_x(b, rb);
    ASSERT_EQ(da.actions, db.actions);
    a.step(da.actions);
    b.step(db.actions);
  }
}

TEST(RandomX, EmpiricalDistributionUniform) {
  const Scenario sc = manual_scenario(3, 4, {30, 40, 50, 60});
  Environment env(sc);
  env.reset(0);
  const int agent = first_decider(env);
  ASSERT_GE(agent, 0);
  const auto mask = env.action_mask(agent);
  int valid = 0;
  for (bool m : mask) valid += m;
  ASSERT_GE(valid, 2);
  std::mt19937_64 rng(5);
  const int n = 100000;
  std::array<int, kMenuSize> counts{};
  for (int i = 0; i < n; ++i) ++counts[random_x(env, rng).actions[agent]];
  const double p = 1.0 / valid;
  const double sigma = std::sqrt(n * p * (1.0 - p));
  double chi2 = 0.0;
  for (int k = 0; k < kMenuSize; ++k) {
    if (!mask[k]) {
      EXPECT_EQ(counts[k], 0);
      continue;
    }
    EXPECT_LE(std::abs(counts[k] - n * p), 3.0 * sigma) << "entry " << k;
    chi2 += (counts[k] - n * p) * (counts[k] - n * p) / (n * p);
  }
  // 0.999 quantile of chi-square with at most 4 degrees of freedom.
  EXPECT_LT(chi2, 18.47);
}

TEST(RandomX, MatricesRespectOccupancy) {
  for (int seed = 1; seed <= 3; ++seed) {
    const Scenario sc = generate_scenario(testing_util::toy_config(), seed);
    Environment env(sc);
    env.reset(0);
    std::mt19937_64 rng(seed);
    while (!env.done()) {
      const JointDecision d = random_x(env, rng);
      std::vector<int> rejected;
      const OffloadMatrix m = env.matrix_for(d.actions, &rejected);
      EXPECT_TRUE(rejected.empty());
      EXPECT_NO_THROW(m.validate(sc));
      env.step(d.actions);
    }
  }
}

TEST(Woa, ConfigValidation) {
  EXPECT_THROW((WoaConfig{1, 10, 1.0}.validate()), ConfigError);
  EXPECT_THROW((WoaConfig{4, 0, 1.0}.validate()), ConfigError);
  EXPECT_NO_THROW((WoaConfig{2, 1, 1.0}.validate()));
}

TEST(Woa, BudgetOneReturnsBetterOfTwoCandidates) {
  const std::vector<int> counts{3, 4, 2};
  const WoaFitness fitness = [](std::span<const int> c) { return std::sin(1.0 + c[0] * 3.0 + c[1] * 1.3 + c[2]); };
  std::mt19937_64 rng(9), replay(9);
  const WoaResult r = woa_optimize(counts, fitness, WoaConfig{2, 1, 1.0}, rng);
  double best = std::numeric_limits<double>::infinity();
  for (int w = 0; w < 2; ++w) {
    WoaScores scores;
    for (int k : counts) {
      std::vector<double> s(k);
      for (double& v : s) v = Learner::uniform01(replay);
      scores.push_back(s);
    }
    best = std::min(best, fitness(woa_argmax(scores)));
  }
  EXPECT_EQ(r.objective, best);
  EXPECT_EQ(r.history.size(), 1u);
  EXPECT_LE(r.evaluations, 2);
}

TEST(Woa, HistoryNonIncreasing) {
  const std::vector<int> counts{5, 5, 5, 5, 5, 5};
  const WoaFitness fitness = [](std::span<const int> c) {
    double f = 0.0;
    for (size_t i = 0; i < c.size(); ++i) f += std::cos(0.7 * c[i] * (i + 1.0)) + 0.1 * c[i];
    return f;
  };
  std::mt19937_64 rng(2);
  const WoaResult r = woa_optimize(counts, fitness, WoaConfig{}, rng);
  ASSERT_EQ(r.history.size(), 100u);
  for (size_t i = 1; i < r.history.size(); ++i) EXPECT_LE(r.history[i], r.history[i - 1]);
  EXPECT_EQ(r.history.back(), r.objective);
  EXPECT_EQ(fitness(r.best), r.objective);
}

TEST(Woa, Deterministic) {
  const Scenario sc = generate_scenario(testing_util::toy_config(), 6);
  Environment a(sc), b(sc);
  a.reset(0);
  b.reset(0);
  std::mt19937_64 ra(1), rb(1);
  const WoaConfig cfg{10, 5, 1.0};
  for (int t = 0; t < 5 && !a.done(); ++t) {
    const JointDecision da = woa_schedule(a, cfg, ra), db = woa_schedule(b, cfg, rb);
    ASSERT_EQ(da.actions, db.actions);
    a.step(da.actions);
    b.step(db.actions);
  }
}

TEST(Woa, NearExhaustiveOptimumOnFourSubtasks) {
  const Scenario sc = manual_scenario(3, 4, {20, 45, 70, 90});
  Environment env(sc);
  env.reset(0);
  std::vector<int> deciders;
  for (int a = 0; a < env.num_agents(); ++a) {
    if (env.has_decision(a)) deciders.push_back(a);
  }
  ASSERT_EQ(deciders.size(), 4u);
  double optimum = std::numeric_limits<double>::infinity();
  std::vector<int> actions(env.num_agents(), -1);
  std::function<void(size_t)> enumerate = [&](size_t i) {
    if (i == deciders.size()) {
      std::vector<int> rejected;
      const OffloadMatrix m = env.matrix_for(actions, &rejected);
      if (!rejected.empty()) return;
      optimum = std::min(optimum, allocate_all(sc, m, env.config().weights, env.config().thresholds).objective);
      return;
    }
    const auto mask = env.action_mask(deciders[i]);
    for (int k = 0; k < kMenuSize; ++k) {
      if (!mask[k]) continue;
      actions[deciders[i]] = k;
      enumerate(i + 1);
    }
  };
  enumerate(0);
  ASSERT_TRUE(std::isfinite(optimum));
  std::mt19937_64 rng(4);
  WoaResult detail;
  const JointDecision d = woa_schedule(env, WoaConfig{30, 2000, 1.0}, rng, &detail);
  std::vector<int> rejected;
  const OffloadMatrix m = env.matrix_for(d.actions, &rejected);
  EXPECT_TRUE(rejected.empty());
  const double found = allocate_all(sc, m, env.config().weights, env.config().thresholds).objective;
  EXPECT_DOUBLE_EQ(found, detail.objective);
  EXPECT_LE(found, optimum + 0.05 * std::abs(optimum));
}

TEST(Woa, MatricesRespectOccupancy) {
  const Scenario sc = generate_scenario(testing_util::toy_config(), 2);
  Environment env(sc);
  env.reset(0);
  std::mt19937_64 rng(2);
  while (!env.done()) {
    const JointDecision d = woa_schedule(env, WoaConfig{10, 5, 1.0}, rng);
    std::vector<int> rejected;
    const OffloadMatrix m = env.matrix_for(d.actions, &rejected);
    EXPECT_TRUE(rejected.empty());
    EXPECT_NO_THROW(m.validate(sc));
    env.step(d.actions);
  }
}

}  // namespace
}  // namespace satoffload
