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

#ifndef SATOFFLOAD_ENV_HPP_
#define SATOFFLOAD_ENV_HPP_

// Slot-by-slot offloading episode.
//
// Agents are the LEO satellites (LMS and CubeSats). In every slot each agent,
// in id order, claims the oldest arrived, undecided sub-task whose CTE it
// covers, and picks a server for it from a five-entry menu:
//
//   0..2  CubeSats covering the CTE (the agent itself first when it is a
//         CubeSat, then by remaining window, longest first)
//   3     an LMS covering the CTE (the agent itself when it is an LMS)
//   4     the CNS
//
// Sub-tasks whose CTE no LEO satellite covers go to the CNS directly. The
// slot's decisions form an offloading matrix that the allocator hook turns
// into bandwidth and compute shares. A sub-task succeeds when its service
// time fits in the remaining coverage window of the chosen server (the
// remaining horizon for the CNS). When several decisions target one CubeSat
// in a slot, the CubeSat serving its own sub-task keeps it; otherwise the
// lowest agent index does, and the rest are rejected.
//
// Failed sub-tasks (deadline miss, C5 rejection, invalid server, or still
// pending at the horizon) are charged the wasted attempt plus a standalone
// CNS service in the episode metrics.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <cstdio>
#include <iomanip>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "satoffload/allocator.hpp"
#include "satoffload/channel.hpp"
#include "satoffload/errors.hpp"
#include "satoffload/model.hpp"

namespace satoffload {

inline constexpr int kMenuSize = 5;
inline constexpr int kMenuCubeSats = 3;
inline constexpr int kMenuLmsSlot = 3;
inline constexpr int kMenuCnsSlot = 4;
inline constexpr int kSubtaskFeatures = 4;
inline constexpr int kMenuFeatures = 7;
inline constexpr int kObservationWidth = kSubtaskFeatures + kMenuSize * kMenuFeatures + 1;

/// Share levels available to the learned allocation in the no-convex ablation.
inline constexpr std::array<double, 4> kShareLevels{0.25, 0.5, 0.75, 1.0};

/// Meaning of the per-server capacity feature in observations.
enum class CapacityFeature { kRemainingCompute, kRemainingBandwidth };

struct EnvConfig {
  double success_scale = 1.0;    // Gamma1
  double failure_penalty = 1.0;  // Gamma2
  Weights weights;
  Thresholds thresholds;
  CapacityFeature capacity_feature = CapacityFeature::kRemainingCompute;
  /// CNS rate (Gigacycles/s) at share level 1 in the no-convex ablation.
  double learned_cns_rate = 8.0;

  void validate() const {
    weights.validate();
    if (!(success_scale > 0.0 && failure_penalty > 0.0)) {
      throw ConfigError("env: reward constants must be positive");
    }
    if (!(learned_cns_rate > 0.0)) throw ConfigError("env: learned_cns_rate must be positive");
  }
};

using Menu = std::array<int, kMenuSize>;  // satellite ids, -1 when empty
using Observation = std::vector<double>;

enum class Resolution { kPending, kSuccess, kDeadlineMiss, kRejected, kUnresolved };

inline const char* resolution_name(Resolution r) {
  switch (r) {
    case Resolution::kPending: return "pending";
    case Resolution::kSuccess: return "success";
    case Resolution::kDeadlineMiss: return "deadline_miss";
    case Resolution::kRejected: return "rejected";
    case Resolution::kUnresolved: return "unresolved";
  }
  return "?";
}

struct SubTaskRecord {
  int subtask = 0;
  int task = 0;
  int agent = -1;   // deciding agent index, -1 for direct CNS offloads
  int server = -1;  // server in X, -1 when none was valid
  int slot = -1;
  double y = 0.0;
  double beta = 0.0;
  double omega = 0.0;
  double t_max_s = 0.0;
  ServiceOutcome attempt;  // outcome on the chosen server
  ServiceOutcome charged;  // what the metrics count
  double reward = 0.0;
  Resolution resolution = Resolution::kPending;

  bool success() const { return resolution == Resolution::kSuccess; }
  bool resolved() const { return resolution != Resolution::kPending; }
};

struct RewardRecord {
  double value = 0.0;
  bool success = false;
  bool decided = false;
};

struct TrajectoryRow {
  int slot = 0;
  int agent = 0;
  int satellite = 0;
  int action = 0;
  int server = -1;
  int subtask = 0;
  double reward = 0.0;
  double t_ser_s = 0.0;
  double p_ser = 0.0;
  bool success = false;
};

/// Fixed-size view of the network state for one slot.
struct GlobalState {
  int slot = 0;
  std::vector<int> pending;          // arrived, undecided sub-tasks in queue order
  double total_pending_memory = 0.0;  // M^tot
  std::vector<double> load_memory;    // M^load per satellite
  std::vector<double> remaining_compute;
  std::vector<double> remaining_bandwidth;

  /// Per pending sub-task [M, nu, M^tot, M^load(first covering CubeSat),
  /// zeta_c, eta_c, zeta_l, eta_l] where c and l are the best covering
  /// CubeSat and LMS.
  std::vector<double> features;
};

struct StepResult {
  std::vector<RewardRecord> rewards;  // one per agent
  std::vector<int> resolved;          // sub-task ids resolved this step
  AllocationResult allocation;
  bool done = false;
};

using AllocatorHook = std::function<AllocationResult(const Scenario&, const OffloadMatrix&,
                                                     const Weights&, const Thresholds&)>;

inline AllocationResult closed_form_hook(const Scenario& sc, const OffloadMatrix& m, const Weights& w,
                                         const Thresholds& th) {
  return allocate_all(sc, m, w, th);
}

/// Learned allocation for the no-convex ablation: each row's requested share
/// sets y and beta (clipped to [1e-3, 1], then renormalized per server when
/// the shares overflow its capacity); CNS rows get omega = share * rate.
inline AllocatorHook learned_share_hook(double cns_rate) {
  return [cns_rate](const Scenario& sc, const OffloadMatrix& m, const Weights& w, const Thresholds&) {
    m.validate(sc);
    if (m.requested_shares.size() != m.size()) {
      throw ShapeError("learned_share_hook: one requested share per row required");
    }
    AllocationResult r;
    r.rows.resize(m.size());
    std::vector<double> share(m.size());
    std::map<int, std::vector<size_t>> by_server;
    for (size_t i = 0; i < m.size(); ++i) {
      share[i] = std::clamp(m.requested_shares[i], 1e-3, 1.0);
      by_server[m.servers[i]].push_back(i);
    }
    for (const auto& [server_id, rows] : by_server) {
      const Satellite& server = sc.satellites[server_id];
      double y_sum = 0.0;
      for (size_t i : rows) y_sum += share[i];
      const double y_scale = y_sum > 1.0 ? 1.0 / y_sum : 1.0;
      const double b_scale = y_sum > server.processor_count ? server.processor_count / y_sum : 1.0;
      ServerAllocation summary;
      summary.server = server_id;
      for (size_t i : rows) {
        RowAllocation& row = r.rows[i];
        row.subtask = m.subtasks[i];
        row.server = server_id;
        row.y = share[i] * y_scale;
        const SubTask& st = sc.subtasks[row.subtask];
        const LinkParams link = link_for(sc, st.id, server_id);
        if (server.layer == Layer::kCns) {
          row.omega = share[i] * cns_rate;
          row.outcome = service_outcome(st, server, link, row.y, row.omega);
        } else {
          row.beta = share[i] * b_scale;
          row.outcome = service_outcome(st, server, link, row.y, row.beta);
          summary.compute_used += row.beta;
        }
        summary.bandwidth_used += row.y;
      }
      r.servers.push_back(summary);
    }
    r.objective = weighted_mean_cost(r, w);
    return r;
  };
}

/// R = sum_k gamma^k r_k.
inline double discounted_return(std::span<const double> rewards, double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) {
    throw DomainError("discounted_return: gamma must lie in [0, 1), got " + std::to_string(gamma));
  }
  double total = 0.0;
  double discount = 1.0;
  for (double r : rewards) {
    total += discount * r;
    discount *= gamma;
  }
  return total;
}

class Environment {
 public:
  explicit Environment(const Scenario& scenario, EnvConfig config = {})
      : scenario_(&scenario), config_(config) {
    config_.validate();
    horizon_ = scenario.config.horizon_slots;
    coverage_ = build_coverage(scenario, horizon_);
    for (const auto& s : scenario.satellites) {
      if (s.layer == Layer::kCns) {
        if (cns_ < 0) cns_ = s.id;
      } else {
        agents_.push_back(s.id);
      }
    }
    reset(0);
  }

  void reset(std::uint64_t seed) {
    seed_ = seed;
    slot_ = 0;
    const size_t n_sub = scenario_->subtasks.size();
    records_.assign(n_sub, SubTaskRecord{});
    for (const auto& st : scenario_->subtasks) {
      records_[st.id].subtask = st.id;
      records_[st.id].task = st.parent_task;
    }
    arrival_.assign(n_sub, 0);
    queue_order_.clear();
    for (const auto& t : scenario_->tasks) {
      for (int id : t.subtasks) {
        arrival_[id] = t.arrival_slot;
        queue_order_.push_back(id);
      }
    }
    const size_t n_sat = scenario_->satellites.size();
    load_memory_.assign(n_sat, 0.0);
    utilization_compute_.assign(n_sat, 0.0);
    utilization_bandwidth_.assign(n_sat, 0.0);
    trajectory_.clear();
    resolved_count_ = 0;
    done_ = false;
    prepare_slot();
  }

  const Scenario& scenario() const { return *scenario_; }
  const EnvConfig& config() const { return config_; }
  const CoverageIndex& coverage() const { return coverage_; }
  std::uint64_t seed() const { return seed_; }
  int slot() const { return slot_; }
  int horizon() const { return horizon_; }
  bool done() const { return done_; }

  int num_agents() const { return static_cast<int>(agents_.size()); }
  int agent_satellite(int agent) const { return agents_[agent]; }
  Layer agent_layer(int agent) const { return scenario_->satellites[agents_[agent]].layer; }

  bool has_decision(int agent) const { return claimed_[agent] >= 0; }
  int claimed_subtask(int agent) const { return claimed_[agent]; }
  const Menu& menu(int agent) const { return menus_[agent]; }
  const std::vector<int>& direct_cns() const { return direct_cns_; }

  std::array<bool, kMenuSize> action_mask(int agent) const {
    std::array<bool, kMenuSize> mask{};
    if (!has_decision(agent)) return mask;
    for (int k = 0; k < kMenuSize; ++k) mask[k] = menus_[agent][k] >= 0;
    return mask;
  }

  /// Observation z_b(n). All zeros for an agent without a decision.
  Observation observe(int agent) const {
    if (agent < 0 || agent >= num_agents()) throw DomainError("observe: unknown agent");
    Observation z(kObservationWidth, 0.0);
    const int st_id = claimed_[agent];
    if (st_id < 0) return z;
    const SubTask& st = scenario_->subtasks[st_id];
    const int self = agents_[agent];
    z[0] = st.memory_mb / 100.0;
    z[1] = st.compute_gigacycles / 100.0;
    z[2] = pending_memory_ / 1000.0;
    z[3] = load_memory_[self] / 1000.0;
    for (int k = 0; k < kMenuSize; ++k) {
      const int server = menus_[agent][k];
      if (server < 0) continue;
      const Satellite& s = scenario_->satellites[server];
      double* f = &z[kSubtaskFeatures + k * kMenuFeatures];
      f[0] = 1.0;
      f[1] = server == self ? 1.0 : 0.0;
      f[2] = std::min(2.0, remaining_window_s(server, st.owner) / 60.0);
      f[3] = std::log10(s.bandwidth_hz) / 10.0;
      f[4] = s.compute_per_processor * s.processor_count / 100.0;
      f[5] = remaining_capacity(server);
      const double t = standalone_time_s(st_id, server);
      f[6] = t > 0.0 ? std::min(4.0, deadline_s(server, st.owner) / t) / 4.0 : 1.0;
    }
    z[kObservationWidth - 1] = static_cast<double>(slot_) / horizon_;
    return z;
  }

  GlobalState state() const {
    GlobalState g;
    g.slot = slot_;
    g.pending = pending_;
    g.total_pending_memory = pending_memory_;
    g.load_memory = load_memory_;
    for (size_t s = 0; s < scenario_->satellites.size(); ++s) {
      g.remaining_compute.push_back(1.0 - utilization_compute_[s]);
      g.remaining_bandwidth.push_back(1.0 - utilization_bandwidth_[s]);
    }
    for (int id : pending_) {
      const SubTask& st = scenario_->subtasks[id];
      int best_c = -1, best_l = -1;
      for (int a : agents_) {
        if (!coverage_.covers(a, st.owner, slot_)) continue;
        int& best = scenario_->satellites[a].layer == Layer::kCubeSat ? best_c : best_l;
        if (best < 0 || remaining_window_s(a, st.owner) > remaining_window_s(best, st.owner)) best = a;
      }
      auto zeta = [&](int s) { return s < 0 ? 0.0 : scenario_->satellites[s].bandwidth_hz; };
      auto eta = [&](int s) { return s < 0 ? 0.0 : remaining_capacity(s); };
      const double load = best_c < 0 ? 0.0 : load_memory_[best_c];
      g.features.insert(g.features.end(), {st.memory_mb, st.compute_gigacycles, pending_memory_, load,
                                           zeta(best_c), eta(best_c), zeta(best_l), eta(best_l)});
    }
    return g;
  }

  /// Offloading matrix for a joint action (menu index per agent, -1 for
  /// agents without a decision). Rejected decisions are left out and
  /// reported through `rejected` (agent indices).
  OffloadMatrix matrix_for(std::span<const int> actions, std::vector<int>* rejected = nullptr,
                           std::span<const double> shares = {}) const {
    if (static_cast<int>(actions.size()) != num_agents()) {
      throw ShapeError("matrix_for: expected " + std::to_string(num_agents()) + " actions, got " +
                       std::to_string(actions.size()));
    }
    OffloadMatrix m;
    m.slot = slot_;
    auto server_of = [&](int a) {
      const int act = actions[a];
      return claimed_[a] >= 0 && act >= 0 && act < kMenuSize ? menus_[a][act] : -1;
    };
    // A CubeSat serving its own claimed sub-task holds itself first.
    std::vector<char> cube_taken(scenario_->satellites.size(), 0);
    for (int a = 0; a < num_agents(); ++a) {
      if (server_of(a) == agents_[a] && agent_layer(a) == Layer::kCubeSat) cube_taken[agents_[a]] = 1;
    }
    for (int a = 0; a < num_agents(); ++a) {
      const int st = claimed_[a];
      if (st < 0) continue;
      const int server = server_of(a);
      bool ok = server >= 0 && coverage_.covers(server, scenario_->subtasks[st].owner, slot_);
      if (ok && scenario_->satellites[server].layer == Layer::kCubeSat && server != agents_[a]) {
        ok = !cube_taken[server];
        if (ok) cube_taken[server] = 1;
      }
      if (!ok) {
        if (rejected) rejected->push_back(a);
        continue;
      }
      m.add(st, server);
      if (!shares.empty()) m.requested_shares.push_back(shares[a]);
    }
    for (int st : direct_cns_) {
      m.add(st, cns_);
      if (!shares.empty()) m.requested_shares.push_back(1.0);
    }
    return m;
  }

  /// Applies one joint action. `shares` (one per agent) feeds the learned
  /// allocation hook in the ablation and is ignored by the closed forms.
  StepResult step(std::span<const int> actions, const AllocatorHook& hook = closed_form_hook,
                   std::span<const double> shares = {}) {
    if (done_) throw DomainError("step: episode is over");
    StepResult out;
    out.rewards.assign(num_agents(), RewardRecord{});
    std::vector<int> rejected;
    const OffloadMatrix m = matrix_for(actions, &rejected, shares);
    std::vector<int> decider(scenario_->subtasks.size(), -1);
    for (int a = 0; a < num_agents(); ++a) {
      if (claimed_[a] >= 0) decider[claimed_[a]] = a;
    }

    for (int a : rejected) {
      const int st = claimed_[a];
      const int act = actions[a];
      const int server = act >= 0 && act < kMenuSize ? menus_[a][act] : -1;
      SubTaskRecord& rec = records_[st];
      rec.agent = a;
      rec.server = server;
      rec.slot = slot_;
      rec.t_max_s = 0.0;
      rec.resolution = Resolution::kRejected;
      rec.reward = -config_.failure_penalty;
      rec.charged = fallback_outcome(st);
      resolve(st, out);
      out.rewards[a] = {rec.reward, false, true};
      trajectory_.push_back({slot_, a, agents_[a], act, server, st, rec.reward, 0.0, 0.0, false});
    }

    std::vector<double> used_compute(scenario_->satellites.size(), 0.0);
    std::vector<double> used_bandwidth(scenario_->satellites.size(), 0.0);
    if (m.size() > 0) {
      out.allocation = hook(*scenario_, m, config_.weights, config_.thresholds);
      for (size_t r = 0; r < m.size(); ++r) {
        const RowAllocation& row = out.allocation.rows[r];
        const int st = m.subtasks[r];
        const int server = m.servers[r];
        SubTaskRecord& rec = records_[st];
        rec.agent = decider[st];
        rec.server = server;
        rec.slot = slot_;
        rec.y = row.y;
        rec.beta = row.beta;
        rec.omega = row.omega;
        rec.attempt = row.outcome;
        rec.t_max_s = deadline_s(server, scenario_->subtasks[st].owner);
        if (meets_deadline(row.outcome, rec.t_max_s)) {
          rec.resolution = Resolution::kSuccess;
          rec.reward = config_.success_scale / row.outcome.cost(config_.weights.time, config_.weights.price);
          rec.charged = row.outcome;
        } else {
          rec.resolution = Resolution::kDeadlineMiss;
          rec.reward = -config_.failure_penalty;
          const ServiceOutcome fb = fallback_outcome(st);
          rec.charged = ServiceOutcome::compose(rec.t_max_s + fb.t_tran_s, fb.t_comp_s,
                                                row.outcome.p_ser + fb.p_tran, fb.p_comp);
        }
        load_memory_[server] += scenario_->subtasks[st].memory_mb;
        used_bandwidth[server] += row.y;
        const Satellite& s = scenario_->satellites[server];
        if (s.layer != Layer::kCns) used_compute[server] += row.beta / s.processor_count;
        resolve(st, out);
        if (rec.agent >= 0) {
          out.rewards[rec.agent] = {rec.reward, rec.success(), true};
          trajectory_.push_back({slot_, rec.agent, agents_[rec.agent], actions[rec.agent], server, st,
                                 rec.reward, row.outcome.t_ser_s, row.outcome.p_ser, rec.success()});
        }
      }
    }
    utilization_compute_ = used_compute;
    utilization_bandwidth_ = used_bandwidth;

    ++slot_;
    if (slot_ >= horizon_) {
      for (int st : queue_order_) {
        if (!records_[st].resolved()) {
          SubTaskRecord& rec = records_[st];
          rec.resolution = Resolution::kUnresolved;
          rec.reward = -config_.failure_penalty;
          rec.charged = fallback_outcome(st);
          const double waited = (horizon_ - arrival_[st]) * scenario_->config.slot_seconds;
          rec.charged.t_ser_s += waited;
          rec.charged.t_tran_s += waited;
          resolve(st, out);
        }
      }
    }
    prepare_slot();
    out.done = done_;
    return out;
  }

  const std::vector<SubTaskRecord>& records() const { return records_; }
  const std::vector<TrajectoryRow>& trajectory() const { return trajectory_; }

  /// Remaining coverage of `server` over `cte` from the current slot, seconds.
  double remaining_window_s(int server, int cte) const {
    const CoverageWindow* w = coverage_.window_at(server, cte, slot_);
    if (!w) return 0.0;
    return (w->end_slot - slot_ + 1) * scenario_->config.slot_seconds;
  }

  /// Deadline T^max for a decision at the current slot.
  double deadline_s(int server, int cte) const {
    if (server == cns_) return (horizon_ - slot_) * scenario_->config.slot_seconds;
    return remaining_window_s(server, cte);
  }

  /// Service time of `subtask` on `server` when it is the server's only row
  /// in the slot.
  double standalone_time_s(int subtask, int server) const {
    OffloadMatrix m;
    m.slot = slot_;
    m.add(subtask, server);
    return allocate_all(*scenario_, m, config_.weights, config_.thresholds).rows[0].outcome.t_ser_s;
  }

  double remaining_capacity(int server) const {
    return config_.capacity_feature == CapacityFeature::kRemainingCompute
               ? 1.0 - utilization_compute_[server]
               : 1.0 - utilization_bandwidth_[server];
  }

  /// Standalone CNS service of one sub-task (full CNS bandwidth, omega*).
  ServiceOutcome fallback_outcome(int subtask) const {
    if (cns_ < 0) return {};
    const SubTask& st = scenario_->subtasks[subtask];
    const Satellite& cns = scenario_->satellites[cns_];
    const double omega = allocate_cns_power(st, config_.weights, cns.compute_unit_price);
    return service_outcome(st, cns, link_for(*scenario_, subtask, cns_), 1.0, omega);
  }

 private:
  void resolve(int st, StepResult& out) {
    ++resolved_count_;
    out.resolved.push_back(st);
  }

  /// Builds the pending queue, agent claims, menus and direct CNS offloads
  /// for the current slot.
  void prepare_slot() {
    claimed_.assign(agents_.size(), -1);
    menus_.assign(agents_.size(), Menu{-1, -1, -1, -1, -1});
    direct_cns_.clear();
    pending_.clear();
    pending_memory_ = 0.0;
    if (slot_ >= horizon_ || resolved_count_ == static_cast<int>(records_.size())) {
      done_ = true;
      return;
    }
    for (int st : queue_order_) {
      if (arrival_[st] <= slot_ && !records_[st].resolved()) {
        pending_.push_back(st);
        pending_memory_ += scenario_->subtasks[st].memory_mb;
      }
    }
    std::vector<char> taken(records_.size(), 0);
    for (int a = 0; a < num_agents(); ++a) {
      for (int st : pending_) {
        if (taken[st]) continue;
        if (coverage_.covers(agents_[a], scenario_->subtasks[st].owner, slot_)) {
          claimed_[a] = st;
          taken[st] = 1;
          menus_[a] = build_menu(a, scenario_->subtasks[st].owner);
          break;
        }
      }
    }
    for (int st : pending_) {
      if (taken[st]) continue;
      const int cte = scenario_->subtasks[st].owner;
      const bool leo = std::any_of(agents_.begin(), agents_.end(),
                                   [&](int s) { return coverage_.covers(s, cte, slot_); });
      if (!leo && cns_ >= 0) direct_cns_.push_back(st);
    }
  }

  Menu build_menu(int agent, int cte) const {
    Menu menu{-1, -1, -1, -1, -1};
    const int self = agents_[agent];
    const Layer self_layer = scenario_->satellites[self].layer;
    std::vector<int> cubes, lms;
    for (int s : agents_) {
      if (s == self || !coverage_.covers(s, cte, slot_)) continue;
      (scenario_->satellites[s].layer == Layer::kCubeSat ? cubes : lms).push_back(s);
    }
    auto by_window = [&](int a, int b) {
      const double wa = remaining_window_s(a, cte), wb = remaining_window_s(b, cte);
      return wa != wb ? wa > wb : a < b;
    };
    std::sort(cubes.begin(), cubes.end(), by_window);
    std::sort(lms.begin(), lms.end(), by_window);
    if (self_layer == Layer::kCubeSat) cubes.insert(cubes.begin(), self);
    for (int k = 0; k < kMenuCubeSats && k < static_cast<int>(cubes.size()); ++k) menu[k] = cubes[k];
    if (self_layer == Layer::kLms) {
      menu[kMenuLmsSlot] = self;
    } else if (!lms.empty()) {
      menu[kMenuLmsSlot] = lms.front();
    }
    menu[kMenuCnsSlot] = cns_;
    return menu;
  }

  const Scenario* scenario_;
  EnvConfig config_;
  int horizon_ = 0;
  CoverageIndex coverage_;
  std::vector<int> agents_;
  int cns_ = -1;
  std::uint64_t seed_ = 0;
  int slot_ = 0;
  bool done_ = false;
  int resolved_count_ = 0;

  std::vector<SubTaskRecord> records_;
  std::vector<int> arrival_;
  std::vector<int> queue_order_;
  std::vector<int> pending_;
  double pending_memory_ = 0.0;
  std::vector<double> load_memory_;
  std::vector<double> utilization_compute_;
  std::vector<double> utilization_bandwidth_;
  std::vector<int> claimed_;
  std::vector<Menu> menus_;
  std::vector<int> direct_cns_;
  std::vector<TrajectoryRow> trajectory_;
};

/// One row per agent decision.
inline void write_trajectory_csv(std::ostream& os, std::span<const TrajectoryRow> rows) {
  os << "slot,agent,satellite,action,server,subtask,reward,t_ser,p_ser,success\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%d,%d,%d,%d,%d,%.10g,%.10g,%.10g,%d\n", r.slot, r.agent,
                  r.satellite, r.action, r.server, r.subtask, r.reward, r.t_ser_s, r.p_ser,
                  r.success ? 1 : 0);
    os << buf;
  }
}

}  // namespace satoffload

#endif  // SATOFFLOAD_ENV_HPP_
