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

#ifndef SATOFFLOAD_BASELINES_HPP_
#define SATOFFLOAD_BASELINES_HPP_

// Non-learning schedulers: Random-X and the whale optimization algorithm.
// Both decide one slot at a time for the agents holding a sub-task.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "satoffload/env.hpp"
#include "satoffload/errors.hpp"
#include "satoffload/mappo.hpp"

namespace satoffload {

/// Uniform draw from `valid`, repeated until it lands in `open`. Returns -1
/// when `open` is empty.
inline int draw_open(std::span<const int> valid, std::span<const int> open, std::mt19937_64& rng) {
  if (open.empty()) return -1;
  while (true) {
    const int pick = valid[static_cast<size_t>(Learner::uniform01(rng) * static_cast<double>(valid.size()))];
    if (std::find(open.begin(), open.end(), pick) != open.end()) return pick;
  }
}

/// Uniform choice among each agent's valid menu entries. A CubeSat already
/// taken in this slot is rejected and the draw repeated.
inline JointDecision random_x(const Environment& env, std::mt19937_64& rng) {
  JointDecision d;
  d.actions.assign(env.num_agents(), -1);
  std::vector<char> taken(env.scenario().satellites.size(), 0);
  for (int a = 0; a < env.num_agents(); ++a) {
    if (!env.has_decision(a)) continue;
    const auto mask = env.action_mask(a);
    std::vector<int> valid, open;
    for (int k = 0; k < kMenuSize; ++k) {
      if (!mask[k]) continue;
      valid.push_back(k);
      const int s = env.menu(a)[k];
      if (!(env.scenario().satellites[s].layer == Layer::kCubeSat && taken[s])) open.push_back(k);
    }
    const int pick = draw_open(valid, open, rng);
    if (pick < 0) continue;
    const int server = env.menu(a)[pick];
    if (env.scenario().satellites[server].layer == Layer::kCubeSat) taken[server] = 1;
    d.actions[a] = pick;
  }
  return d;
}

struct WoaConfig {
  int population = 30;
  int budget = 100;  // generations, counting the initial one
  double spiral = 1.0;

  void validate() const {
    if (population < 2) throw ConfigError("woa: population must be at least 2");
    if (budget < 1) throw ConfigError("woa: budget must be at least 1");
  }
};

struct WoaResult {
  std::vector<int> best;
  double objective = 0.0;
  std::vector<double> history;  // best objective after each generation
  int evaluations = 0;
};

/// Scores of one candidate, one block of option scores per variable.
using WoaScores = std::vector<std::vector<double>>;
using WoaDecoder = std::function<std::vector<int>(const WoaScores&)>;
using WoaFitness = std::function<double(std::span<const int>)>;

/// Argmax per variable, ties to the lowest index.
inline std::vector<int> woa_argmax(const WoaScores& scores) {
  std::vector<int> out;
  for (const auto& s : scores) out.push_back(static_cast<int>(std::max_element(s.begin(), s.end()) - s.begin()));
  return out;
}

/// Minimizes `fitness` over discrete choices through the standard WOA
/// encircling, spiral and search moves on relaxed scores in [0, 1].
inline WoaResult woa_optimize(std::span<const int> option_counts, const WoaFitness& fitness, const WoaConfig& cfg,
                              std::mt19937_64& rng, const WoaDecoder& decode = woa_argmax) {
  cfg.validate();
  WoaResult out;
  if (option_counts.empty()) return out;
  std::map<std::vector<int>, double> cache;
  auto evaluate = [&](const WoaScores& x) {
    std::vector<int> choice = decode(x);
    auto it = cache.find(choice);
    if (it == cache.end()) {
      it = cache.emplace(choice, fitness(choice)).first;
      ++out.evaluations;
    }
    return std::make_pair(choice, it->second);
  };
  auto u01 = [&]() { return Learner::uniform01(rng); };
  std::vector<WoaScores> pop(cfg.population);
  for (auto& w : pop) {
    for (int k : option_counts) {
      std::vector<double> s(k);
      for (double& v : s) v = u01();
      w.push_back(std::move(s));
    }
  }
  WoaScores leader;
  out.objective = std::numeric_limits<double>::infinity();
  auto consider = [&](const WoaScores& w) {
    const auto [choice, f] = evaluate(w);
    if (f < out.objective) {
      out.objective = f;
      out.best = choice;
      leader = w;
    }
  };
  for (const auto& w : pop) consider(w);
  out.history.push_back(out.objective);
  for (int t = 1; t < cfg.budget; ++t) {
    const double a = 2.0 - 2.0 * static_cast<double>(t) / static_cast<double>(cfg.budget);
    for (auto& w : pop) {
      const double A = 2.0 * a * u01() - a;
      const double C = 2.0 * u01();
      const double p = u01();
      const double l = 2.0 * u01() - 1.0;
      const WoaScores* target = &leader;
      if (p < 0.5 && std::abs(A) >= 1.0) {
        target = &pop[static_cast<size_t>(u01() * static_cast<double>(pop.size()))];
      }
      const WoaScores ref = *target;
      for (size_t v = 0; v < w.size(); ++v) {
        for (size_t j = 0; j < w[v].size(); ++j) {
          double x;
          if (p < 0.5) {
            x = ref[v][j] - A * std::abs(C * ref[v][j] - w[v][j]);
          } else {
            const double d = std::abs(leader[v][j] - w[v][j]);
            x = d * std::exp(cfg.spiral * l) * std::cos(2.0 * std::numbers::pi * l) + leader[v][j];
          }
          w[v][j] = std::clamp(x, 0.0, 1.0);
        }
      }
    }
    for (const auto& w : pop) consider(w);
    out.history.push_back(out.objective);
  }
  return out;
}

/// WOA over the current slot: one variable per agent holding a sub-task,
/// options are its valid menu entries. Decoding walks each agent's options
/// by score and skips CubeSats already taken in the slot. Fitness is the
/// allocator objective of the resulting offloading matrix.
inline JointDecision woa_schedule(const Environment& env, const WoaConfig& cfg, std::mt19937_64& rng,
                                  WoaResult* detail = nullptr) {
  JointDecision d;
  d.actions.assign(env.num_agents(), -1);
  std::vector<int> agents;
  std::vector<std::vector<int>> options;
  for (int a = 0; a < env.num_agents(); ++a) {
    if (!env.has_decision(a)) continue;
    const auto mask = env.action_mask(a);
    std::vector<int> opts;
    for (int k = 0; k < kMenuSize; ++k) {
      if (mask[k]) opts.push_back(k);
    }
    agents.push_back(a);
    options.push_back(std::move(opts));
  }
  if (agents.empty()) return d;
  const Scenario& sc = env.scenario();
  auto decode = [&](const WoaScores& scores) {
    std::vector<int> choice(agents.size(), 0);
    std::vector<char> taken(sc.satellites.size(), 0);
    for (size_t v = 0; v < agents.size(); ++v) {
      std::vector<int> order(options[v].size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return scores[v][x] > scores[v][y]; });
      for (int o : order) {
        const int server = env.menu(agents[v])[options[v][o]];
        const bool cube = sc.satellites[server].layer == Layer::kCubeSat;
        if (cube && taken[server]) continue;
        if (cube) taken[server] = 1;
        choice[v] = o;
        break;
      }
    }
    return choice;
  };
  auto to_actions = [&](std::span<const int> choice) {
    std::vector<int> actions(env.num_agents(), -1);
    for (size_t v = 0; v < agents.size(); ++v) actions[agents[v]] = options[v][choice[v]];
    return actions;
  };
  auto fitness = [&](std::span<const int> choice) {
    const OffloadMatrix m = env.matrix_for(to_actions(choice));
    return allocate_all(sc, m, env.config().weights, env.config().thresholds).objective;
  };
  std::vector<int> counts;
  for (const auto& o : options) counts.push_back(static_cast<int>(o.size()));
  WoaResult r = woa_optimize(counts, fitness, cfg, rng, decode);
  d.actions = to_actions(r.best);
  if (detail) *detail = std::move(r);
  return d;
}

}  // namespace satoffload

#endif  // SATOFFLOAD_BASELINES_HPP_
