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

#include <random>
#include <sstream>

#include "satoffload/env.hpp"
#include "test_util.hpp"

namespace satoffload {
namespace {

using testing_util::manual_scenario;

std::vector<int> random_actions(const Environment& env, std::mt19937_64& rng) {
  std::vector<int> actions(env.num_agents(), -1);
  for (int a = 0; a < env.num_agents(); ++a) {
    if (!env.has_decision(a)) continue;
    const auto mask = env.action_mask(a);
    std::vector<int> valid;
    for (int k = 0; k < kMenuSize; ++k) {
      if (mask[k]) valid.push_back(k);
    }
    actions[a] = valid[std::uniform_int_distribution<size_t>(0, valid.size() - 1)(rng)];
  }
  return actions;
}

TEST(Reset, EmptyScenarioHasEmptyQueue) {
  const Scenario sc = manual_scenario(3, 0, {});
  Environment env(sc);
  const GlobalState g = env.state();
  EXPECT_TRUE(g.pending.empty());
  EXPECT_EQ(g.total_pending_memory, 0.0);
  for (double l : g.load_memory) EXPECT_EQ(l, 0.0);
  EXPECT_TRUE(env.done());
}

TEST(Reset, InitialObservationsDeterministic) {
  const Scenario sc = generate_scenario(testing_util::toy_config(), 21);
  Environment a(sc), b(sc);
  a.reset(5);
  b.reset(5);
  for (int k = 0; k < a.num_agents(); ++k) EXPECT_EQ(a.observe(k), b.observe(k));
}

TEST(Reset, TotalPendingMemoryMatchesQueue) {
  const Scenario sc = manual_scenario(3, 4, {10, 20, 30, 45});
  Environment env(sc);
  const GlobalState g = env.state();
  EXPECT_EQ(g.pending.size(), 4u);
  EXPECT_DOUBLE_EQ(g.total_pending_memory, 105.0);
  EXPECT_EQ(g.slot, 0);
  EXPECT_EQ(g.features.size(), 4u * 8u);
  EXPECT_DOUBLE_EQ(g.features[2], 105.0);
}

TEST(Observe, AgentWithoutCoverageSeesZeros) {
  Scenario sc = manual_scenario(3, 1, {10});
  // Move CubeSat 4 far away with a small footprint.
  sc.satellites[4].footprint_radius_km = 1.0;
  sc.satellites[4].track.origin = {1e4, 1e4};
  Environment env(sc);
  EXPECT_FALSE(env.has_decision(3));
  const auto z = env.observe(3);
  ASSERT_EQ(static_cast<int>(z.size()), kObservationWidth);
  for (double v : z) EXPECT_EQ(v, 0.0);
}

TEST(Observe, WidthConstantAcrossSlots) {
  const Scenario sc = generate_scenario(testing_util::toy_config(), 3);
  Environment env(sc);
  std::mt19937_64 rng(1);
  while (!env.done()) {
    for (int a = 0; a < env.num_agents(); ++a) {
      EXPECT_EQ(static_cast<int>(env.observe(a).size()), kObservationWidth);
    }
    env.step(random_actions(env, rng));
  }
}

TEST(Observe, DisjointCoverageDiffersOnlyInCoverageFields) {
  // Two CubeSats each covering a different CTE, tasks of equal size.
  Scenario sc = manual_scenario(2, 2, {30, 30});
  sc.subtasks[1].compute_gigacycles = sc.subtasks[0].compute_gigacycles;
  sc.satellites[1].footprint_radius_km = 1.0;
  sc.satellites[1].track.origin = {1e4, 1e4};
  sc.satellites[2].footprint_radius_km = 0.5;
  sc.satellites[2].track.origin = sc.ctes[0].position;
  sc.satellites[3].footprint_radius_km = 0.5;
  sc.satellites[3].track.origin = sc.ctes[1].position;
  Environment env(sc);
  ASSERT_TRUE(env.has_decision(1));
  ASSERT_TRUE(env.has_decision(2));
  EXPECT_EQ(sc.subtasks[env.claimed_subtask(1)].owner, 0);
  EXPECT_EQ(sc.subtasks[env.claimed_subtask(2)].owner, 1);
  EXPECT_EQ(env.observe(1), env.observe(2));
}

TEST(Step, DeadlineMissOnLmsIsPenalized) {
  Scenario sc = manual_scenario(3, 1, {90}, 3);
  // LMS window of 1 slot: move it away after slot 0.
  sc.satellites[1].footprint_radius_km = 5.0;
  sc.satellites[1].track = GroundTrack{{1.0, 1.0}, 0.0, 4.0, 0.0};
  sc.config.slot_seconds = 1.0;
  EnvConfig cfg;
  Environment env(sc, cfg);
  ASSERT_TRUE(env.has_decision(0));
  ASSERT_EQ(env.menu(0)[kMenuLmsSlot], 1);
  std::vector<int> actions(env.num_agents(), -1);
  actions[0] = kMenuLmsSlot;
  const auto r = env.step(actions);
  EXPECT_TRUE(r.rewards[0].decided);
  EXPECT_FALSE(r.rewards[0].success);
  EXPECT_EQ(r.rewards[0].value, -cfg.failure_penalty);
  EXPECT_EQ(env.records()[0].resolution, Resolution::kDeadlineMiss);
}

TEST(Step, UnitCostSuccessGivesUnitReward) {
  const Scenario sc = manual_scenario(3, 1, {10});
  Environment env(sc);
  AllocatorHook hook = [](const Scenario& s, const OffloadMatrix& m, const Weights& w, const Thresholds& th) {
    AllocationResult r = allocate_all(s, m, w, th);
    for (auto& row : r.rows) row.outcome = ServiceOutcome::compose(0.25, 0.75, 0.5, 0.5);
    return r;
  };
  std::vector<int> actions(env.num_agents(), -1);
  actions[0] = kMenuLmsSlot;
  const auto r = env.step(actions, hook);
  EXPECT_TRUE(r.rewards[0].success);
  EXPECT_DOUBLE_EQ(r.rewards[0].value, 1.0);
}

TEST(Step, CubeSatServingItselfWinsOccupancyConflict) {
  const Scenario sc = manual_scenario(3, 2, {10, 20});
  Environment env(sc);
  ASSERT_TRUE(env.has_decision(0));
  ASSERT_TRUE(env.has_decision(1));
  const int cube = env.menu(1)[0];
  ASSERT_EQ(env.agent_satellite(1), cube);
  ASSERT_EQ(env.menu(0)[0], cube);
  std::vector<int> actions(env.num_agents(), -1);
  actions[0] = 0;
  actions[1] = 0;
  const auto r = env.step(actions);
  EXPECT_TRUE(r.rewards[1].decided);
  EXPECT_NE(env.records()[1].resolution, Resolution::kRejected);
  EXPECT_EQ(r.rewards[0].value, -1.0);
  EXPECT_FALSE(r.rewards[0].success);
  EXPECT_EQ(env.records()[0].resolution, Resolution::kRejected);
}

TEST(Step, SecondForeignAssignmentToSameCubeSatIsRejected) {
  const Scenario sc = manual_scenario(3, 3, {10, 20, 30});
  Environment env(sc);
  ASSERT_TRUE(env.has_decision(0));
  ASSERT_TRUE(env.has_decision(2));
  const int cube = env.agent_satellite(1);
  int k0 = -1, k2 = -1;
  for (int k = 0; k < kMenuCubeSats; ++k) {
    if (env.menu(0)[k] == cube) k0 = k;
    if (env.menu(2)[k] == cube) k2 = k;
  }
  ASSERT_GE(k0, 0);
  ASSERT_GE(k2, 0);
  std::vector<int> actions(env.num_agents(), -1);
  actions[0] = k0;
  actions[1] = kMenuCnsSlot;
  actions[2] = k2;
  const int first = env.claimed_subtask(0), second = env.claimed_subtask(2);
  const auto r = env.step(actions);
  EXPECT_NE(env.records()[first].resolution, Resolution::kRejected);
  EXPECT_EQ(r.rewards[2].value, -1.0);
  EXPECT_EQ(env.records()[second].resolution, Resolution::kRejected);
}

TEST(Step, InvalidMenuEntryIsPenalizedNotFatal) {
  Scenario sc = manual_scenario(1, 1, {10});
  Environment env(sc);
  ASSERT_EQ(env.menu(0)[1], -1);
  std::vector<int> actions(env.num_agents(), -1);
  actions[0] = 1;
  const auto r = env.step(actions);
  EXPECT_EQ(r.rewards[0].value, -1.0);
  EXPECT_EQ(env.records()[0].resolution, Resolution::kRejected);
}

TEST(Step, UncoveredSubtasksGoToCns) {
  Scenario sc = manual_scenario(3, 1, {10}, 100);
  for (int s = 1; s < 5; ++s) {
    sc.satellites[s].footprint_radius_km = 1.0;
    sc.satellites[s].track.origin = {1e4, 1e4};
  }
  Environment env(sc);
  ASSERT_EQ(env.direct_cns().size(), 1u);
  const auto r = env.step(std::vector<int>(env.num_agents(), -1));
  EXPECT_EQ(env.records()[0].server, 0);
  EXPECT_TRUE(env.records()[0].success());
  EXPECT_TRUE(r.done);
}

TEST(Menu, LayoutAndOrdering) {
  const Scenario sc = manual_scenario(4, 1, {10});
  Environment env(sc);
  // Agent 0 is the LMS; it claims the single sub-task.
  const Menu& m = env.menu(0);
  EXPECT_EQ(m[kMenuLmsSlot], 1);
  EXPECT_EQ(m[kMenuCnsSlot], 0);
  EXPECT_EQ(m[0], 2);
  EXPECT_EQ(m[1], 3);
  EXPECT_EQ(m[2], 4);
}

TEST(DiscountedReturn, Examples) {
  const std::vector<double> ones{1, 1, 1};
  EXPECT_DOUBLE_EQ(discounted_return(ones, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(discounted_return(ones, 0.5), 1.75);
  EXPECT_DOUBLE_EQ(discounted_return(std::vector<double>{0, 0, 0}, 0.9), 0.0);
  EXPECT_THROW(discounted_return(ones, 1.0), DomainError);
  EXPECT_THROW(discounted_return(ones, -0.1), DomainError);
}

TEST(Invariants, RandomEpisodesConserveAndStayFeasible) {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const Scenario sc = generate_scenario(testing_util::toy_config(), seed);
    Environment env(sc);
    std::mt19937_64 rng(seed);
    while (!env.done()) {
      const auto actions = random_actions(env, rng);
      const auto r = env.step(actions);
      EXPECT_LE(capacity_violation(sc, r.allocation), 1e-9);
      std::vector<int> cube_hits(sc.satellites.size(), 0);
      for (const auto& row : r.allocation.rows) {
        if (sc.satellites[row.server].layer == Layer::kCubeSat) ++cube_hits[row.server];
      }
      for (int h : cube_hits) EXPECT_LE(h, 1);
      for (const auto& rr : r.rewards) {
        if (rr.decided) EXPECT_EQ(rr.success, rr.value > 0.0);
      }
    }
    int resolved = 0;
    for (const auto& rec : env.records()) {
      EXPECT_TRUE(rec.resolved());
      EXPECT_EQ(rec.success(), rec.reward > 0.0);
      if (rec.success()) EXPECT_LE(rec.attempt.t_ser_s, rec.t_max_s);
      resolved += rec.resolved() ? 1 : 0;
    }
    EXPECT_EQ(resolved, static_cast<int>(sc.subtasks.size()));
  }
}

TEST(Invariants, SameActionsSameTrajectory) {
  const Scenario sc = generate_scenario(testing_util::toy_config(), 8);
  std::string dumps[2];
  for (auto& dump : dumps) {
    Environment env(sc);
    std::mt19937_64 rng(4);
    while (!env.done()) env.step(random_actions(env, rng));
    std::ostringstream os;
    write_trajectory_csv(os, env.trajectory());
    dump = os.str();
  }
  EXPECT_EQ(dumps[0], dumps[1]);
  EXPECT_NE(dumps[0].find("slot,agent,satellite,action,server,subtask,reward,t_ser,p_ser,success"),
            std::string::npos);
}

TEST(LearnedShareHook, ClipsAndRenormalizes) {
  const Scenario sc = manual_scenario(3, 3, {10, 20, 30});
  OffloadMatrix m;
  m.add(0, 1);
  m.add(1, 1);
  m.add(2, 0);
  m.requested_shares = {1.0, 2.0, 0.5};
  const auto r = learned_share_hook(8.0)(sc, m, Weights{}, Thresholds{});
  EXPECT_NEAR(r.rows[0].y + r.rows[1].y, 1.0, 1e-12);
  EXPECT_NEAR(r.rows[0].beta + r.rows[1].beta, 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(r.rows[2].omega, 4.0);
  EXPECT_LE(capacity_violation(sc, r), 1e-12);
}

}  // namespace
}  // namespace satoffload
