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

#ifndef SATOFFLOAD_ALLOCATOR_HPP_
#define SATOFFLOAD_ALLOCATOR_HPP_

// Resource allocation for a fixed offloading matrix. The joint problem
// separates per server into three convex subproblems, each with a closed-form
// KKT solution:
//
//   bandwidth   min  sum_i c_i / y_i                 s.t. sum_i y_i <= 1
//   compute     min  sum_i phi_i / b_i + Lambda b_i   s.t. sum_i b_i <= rho
//   CNS power   min  a / w + k w                      over w > 0
//
// with c_i = alpha1 * bits_i / (zeta * log2(1 + p g / N0)),
// phi_i = alpha1 * nu_i / omega_b, Lambda = alpha2 * chi_b * omega_b,
// a = alpha1 * nu, k = alpha2 * chi_h. The common 1/(|d| |D|) factor of the
// weighted objective scales every term equally and is dropped.
//
// Bandwidth price is linear in y, so with the capacity constraint tight the
// total transmission price on a server is constant and the bandwidth split
// only has to minimize time.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "satoffload/channel.hpp"
#include "satoffload/errors.hpp"
#include "satoffload/model.hpp"

namespace satoffload {

/// MST / MSP weights alpha1 and alpha2.
struct Weights {
  double time = 0.5;
  double price = 0.5;

  void validate() const {
    if (!(time > 0.0 && price > 0.0)) {
      throw DomainError("weights must be strictly positive");
    }
  }
};

/// Per-variable caps Y^th and beta^th. A non-positive compute cap means the
/// server's processor count (inactive).
struct Thresholds {
  double bandwidth = 1.0;
  double compute = 0.0;
};

// ---------------------------------------------------------------------------
// Subproblems in solver form.

struct BandwidthSubproblem {
  std::vector<double> time_weight;  // c_i
  double threshold = 1.0;           // Y^th

  size_t size() const { return time_weight.size(); }

  double objective(std::span<const double> y) const {
    double total = 0.0;
    for (size_t i = 0; i < size(); ++i) total += time_weight[i] / y[i];
    return total;
  }

  bool feasible(std::span<const double> y, double tol = 1e-12) const {
    double sum = 0.0;
    for (size_t i = 0; i < size(); ++i) {
      if (!(y[i] > 0.0) || y[i] > threshold + tol) return false;
      sum += y[i];
    }
    return sum <= 1.0 + tol;
  }
};

struct ComputeSubproblem {
  std::vector<double> phi;  // phi_i
  double lambda = 0.0;      // Lambda (shared by the server's sub-tasks)
  double capacity = 1.0;    // rho_b
  double threshold = 0.0;   // beta^th; <= 0 means capacity

  size_t size() const { return phi.size(); }
  double cap() const { return threshold > 0.0 ? threshold : capacity; }

  double objective(std::span<const double> beta) const {
    double total = 0.0;
    for (size_t i = 0; i < size(); ++i) total += phi[i] / beta[i] + lambda * beta[i];
    return total;
  }

  bool feasible(std::span<const double> beta, double tol = 1e-12) const {
    double sum = 0.0;
    for (size_t i = 0; i < size(); ++i) {
      if (!(beta[i] > 0.0) || beta[i] > cap() + tol) return false;
      sum += beta[i];
    }
    return sum <= capacity + tol;
  }
};

struct CnsSubproblem {
  double time_coeff = 0.0;   // alpha1 * nu
  double price_coeff = 0.0;  // alpha2 * chi_h

  double objective(double omega) const { return time_coeff / omega + price_coeff * omega; }
};

struct BandwidthSolution {
  std::vector<double> shares;
  double dual = 0.0;
  bool threshold_active = false;
};

struct ComputeSolution {
  std::vector<double> shares;
  double dual = 0.0;   // iota_b
  int branch = 1;      // 1: iota = 0, 2: capacity binding
  int iterations = 0;  // binary-search iterations (branch 2)
  double residual = 0.0;
  double objective = 0.0;
  bool threshold_active = false;
};

inline constexpr int kDualSearchMaxIterations = 200;
inline constexpr double kDualSearchTolerance = 1e-10;

/// y_i = min(Y^th, t sqrt(c_i)) with t set so the shares fill the server.
inline BandwidthSolution solve_bandwidth(const BandwidthSubproblem& p) {
  BandwidthSolution out;
  const size_t n = p.size();
  if (n == 0) return out;
  if (!(p.threshold > 0.0)) throw DomainError("bandwidth threshold must be positive");
  for (double c : p.time_weight) {
    if (!(c >= 0.0) || !std::isfinite(c)) {
      throw DomainError("bandwidth time weights must be finite and non-negative");
    }
  }
  out.shares.assign(n, 0.0);
  if (n == 1) {
    out.shares[0] = std::min(1.0, p.threshold);
    out.threshold_active = p.threshold < 1.0;
    out.dual = p.time_weight[0] / (out.shares[0] * out.shares[0]);
    return out;
  }
  std::vector<double> root(n);
  for (size_t i = 0; i < n; ++i) root[i] = std::sqrt(p.time_weight[i]);
  if (std::all_of(root.begin(), root.end(), [](double r) { return r == 0.0; })) {
    root.assign(n, 1.0);
  }
  std::vector<bool> clipped(n, false);
  double scale = 0.0;
  for (size_t round = 0; round <= n; ++round) {
    double budget = 1.0;
    double free_sum = 0.0;
    for (size_t i = 0; i < n; ++i) {
      if (clipped[i]) {
        budget -= p.threshold;
      } else {
        free_sum += root[i];
      }
    }
    if (free_sum <= 0.0 || budget <= 0.0) {
      scale = std::numeric_limits<double>::infinity();
      break;
    }
    scale = budget / free_sum;
    bool changed = false;
    for (size_t i = 0; i < n; ++i) {
      if (!clipped[i] && scale * root[i] > p.threshold) {
        clipped[i] = true;
        changed = true;
      }
    }
    if (!changed) break;
  }
  for (size_t i = 0; i < n; ++i) {
    out.shares[i] = clipped[i] ? p.threshold : scale * root[i];
    out.threshold_active = out.threshold_active || clipped[i];
  }
  out.dual = std::isfinite(scale) ? 1.0 / (scale * scale) : 0.0;
  return out;
}

namespace detail {

inline double compute_share_sum(const ComputeSubproblem& p, double iota, std::vector<double>* shares) {
  double sum = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    const double b = std::min(p.cap(), std::sqrt(p.phi[i] / (p.lambda + iota)));
    if (shares) (*shares)[i] = b;
    sum += b;
  }
  return sum;
}

}  // namespace detail

/// Two KKT branches: iota = 0 (capacity slack) and iota > 0 found by binary
/// search so the shares exactly fill the processors. Of the feasible
/// branches, the one with the lower objective is returned.
inline ComputeSolution solve_compute(const ComputeSubproblem& p) {
  ComputeSolution out;
  const size_t n = p.size();
  if (n == 0) return out;
  if (!(p.lambda > 0.0) || !(p.capacity > 0.0)) {
    throw DomainError("compute subproblem needs Lambda > 0 and capacity > 0");
  }
  for (double f : p.phi) {
    if (!(f > 0.0) || !std::isfinite(f)) throw DomainError("compute phi must be finite and positive");
  }

  std::vector<ComputeSolution> candidates;

  ComputeSolution slack;
  slack.shares.assign(n, 0.0);
  const double slack_sum = detail::compute_share_sum(p, 0.0, &slack.shares);
  slack.branch = 1;
  slack.dual = 0.0;
  slack.objective = p.objective(slack.shares);
  if (slack_sum <= p.capacity) candidates.push_back(slack);

  if (slack_sum > p.capacity) {
    ComputeSolution binding;
    binding.branch = 2;
    binding.shares.assign(n, 0.0);
    double unclipped_root_sum = 0.0;
    for (double f : p.phi) unclipped_root_sum += std::sqrt(f / p.lambda);
    const double ratio = unclipped_root_sum / p.capacity;
    double lo = 0.0;
    double hi = std::max(1.0, p.lambda * (ratio * ratio - 1.0) + 1.0);
    int grow = 0;
    while (detail::compute_share_sum(p, hi, nullptr) > p.capacity) {
      hi *= 2.0;
      if (++grow > kDualSearchMaxIterations) {
        throw NumericError("compute dual search: could not bracket the root");
      }
    }
    double residual = std::numeric_limits<double>::infinity();
    int it = 0;
    for (; it < kDualSearchMaxIterations; ++it) {
      const double sum_hi = detail::compute_share_sum(p, hi, nullptr);
      residual = std::abs(sum_hi - p.capacity);
      if (residual * std::max(1.0, hi) <= kDualSearchTolerance || hi - lo <= 1e-15 * hi) break;
      const double mid = 0.5 * (lo + hi);
      if (detail::compute_share_sum(p, mid, nullptr) > p.capacity) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    const double sum = detail::compute_share_sum(p, hi, &binding.shares);
    residual = std::abs(sum - p.capacity);
    if (residual > 1e-9 || !std::isfinite(sum)) {
      throw NumericError("compute dual search did not converge: residual " + std::to_string(residual) +
                         " after " + std::to_string(it) + " iterations, iota in [" +
                         std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
    binding.dual = hi;
    binding.iterations = it;
    binding.residual = residual;
    binding.objective = p.objective(binding.shares);
    candidates.push_back(binding);
  }

  const auto best = std::min_element(
      candidates.begin(), candidates.end(),
      [](const ComputeSolution& a, const ComputeSolution& b) { return a.objective < b.objective; });
  out = *best;
  for (double b : out.shares) out.threshold_active = out.threshold_active || b >= p.cap();
  out.threshold_active = out.threshold_active && p.threshold > 0.0 && p.threshold < p.capacity;
  return out;
}

inline double solve_cns(const CnsSubproblem& p) {
  if (!(p.time_coeff > 0.0) || !(p.price_coeff > 0.0)) {
    throw DomainError("CNS subproblem coefficients must be positive");
  }
  return std::sqrt(p.time_coeff / p.price_coeff);
}

// ---------------------------------------------------------------------------
// Entity-level interface.

struct LinkedSubTask {
  SubTask subtask;
  LinkParams link;
};

inline BandwidthSubproblem bandwidth_subproblem(std::span<const LinkedSubTask> assigned,
                                                const Weights& w, double threshold = 1.0) {
  BandwidthSubproblem p;
  p.threshold = threshold;
  for (const auto& a : assigned) {
    const double se = a.link.spectral_efficiency();
    if (!(se > 0.0)) throw DomainError("allocate_bandwidth: zero spectral efficiency");
    p.time_weight.push_back(w.time * a.subtask.memory_mb * kBitsPerMegabyte /
                            (a.link.bandwidth_hz * se));
  }
  return p;
}

inline ComputeSubproblem compute_subproblem(const Satellite& server, std::span<const SubTask> assigned,
                                            const Weights& w, double threshold = 0.0) {
  ComputeSubproblem p;
  p.lambda = w.price * server.compute_unit_price * server.compute_per_processor;
  p.capacity = server.processor_count;
  p.threshold = threshold;
  for (const auto& st : assigned) {
    p.phi.push_back(w.time * st.compute_gigacycles / server.compute_per_processor);
  }
  return p;
}

/// Closed-form bandwidth split y* for the sub-tasks assigned to one server.
inline BandwidthSolution allocate_bandwidth(const Satellite& server,
                                            std::span<const LinkedSubTask> assigned,
                                            const Weights& w, double threshold = 1.0) {
  (void)server;
  return solve_bandwidth(bandwidth_subproblem(assigned, w, threshold));
}

/// Closed-form processor shares beta* (and dual iota_b) on an LMS or CubeSat.
inline ComputeSolution allocate_compute(const Satellite& server, std::span<const SubTask> assigned,
                                        const Weights& w, double threshold = 0.0) {
  if (server.layer == Layer::kCns) {
    throw DomainError("allocate_compute: CNS compute is allocated by allocate_cns_power");
  }
  w.validate();
  return solve_compute(compute_subproblem(server, assigned, w, threshold));
}

/// omega* = sqrt(alpha1 nu / (alpha2 chi_h)), Gigacycles/s.
inline double allocate_cns_power(const SubTask& subtask, const Weights& w, double chi_h) {
  if (!(w.time > 0.0 && w.price > 0.0 && chi_h > 0.0 && subtask.compute_gigacycles > 0.0)) {
    throw DomainError("allocate_cns_power: weights, price and demand must be positive");
  }
  return solve_cns({w.time * subtask.compute_gigacycles, w.price * chi_h});
}

// ---------------------------------------------------------------------------
// Whole-slot allocation.

/// Offloading decisions for one slot: row r sends `subtasks[r]` to
/// `servers[r]`. Each row is one-hot by construction.
struct OffloadMatrix {
  int slot = 0;
  std::vector<int> subtasks;
  std::vector<int> servers;
  /// Learned allocation shares in (0, 1] for the no-convex ablation; empty
  /// when the closed forms are used.
  std::vector<double> requested_shares;

  size_t size() const { return subtasks.size(); }

  void add(int subtask, int server) {
    subtasks.push_back(subtask);
    servers.push_back(server);
  }

  bool x(size_t row, int server) const { return servers[row] == server; }

  /// Throws if a sub-task appears twice or a CubeSat hosts more than one.
  void validate(const Scenario& sc) const {
    if (subtasks.size() != servers.size()) throw InfeasibleError("offload matrix: ragged rows");
    std::vector<int> seen_subtask;
    std::vector<int> seen_cube;
    for (size_t r = 0; r < size(); ++r) {
      if (servers[r] < 0 || servers[r] >= static_cast<int>(sc.satellites.size())) {
        throw InfeasibleError("offload matrix: unknown server " + std::to_string(servers[r]));
      }
      if (std::find(seen_subtask.begin(), seen_subtask.end(), subtasks[r]) != seen_subtask.end()) {
        throw InfeasibleError("offload matrix: sub-task " + std::to_string(subtasks[r]) +
                              " assigned twice");
      }
      seen_subtask.push_back(subtasks[r]);
      if (sc.satellites[servers[r]].layer == Layer::kCubeSat) {
        if (std::find(seen_cube.begin(), seen_cube.end(), servers[r]) != seen_cube.end()) {
          throw InfeasibleError("offload matrix: CubeSat " + std::to_string(servers[r]) +
                                " hosts more than one sub-task");
        }
        seen_cube.push_back(servers[r]);
      }
    }
  }
};

struct RowAllocation {
  int subtask = 0;
  int server = 0;
  double y = 0.0;
  double beta = 0.0;   // LMS / CubeSat
  double omega = 0.0;  // CNS
  ServiceOutcome outcome;
};

struct ServerAllocation {
  int server = 0;
  double bandwidth_dual = 0.0;
  double compute_dual = 0.0;  // iota_b
  int compute_branch = 0;
  double bandwidth_used = 0.0;
  double compute_used = 0.0;
};

struct AllocationResult {
  std::vector<RowAllocation> rows;       // same order as the matrix
  std::vector<ServerAllocation> servers;  // ascending server id
  double objective = 0.0;                 // mean of alpha1 T + alpha2 P over rows
  std::vector<std::string> warnings;
};

inline LinkParams link_for(const Scenario& sc, int subtask, int server) {
  return make_link(sc.satellites[server], sc.ctes[sc.subtasks[subtask].owner], sc.config.noise_mw);
}

inline double weighted_mean_cost(const AllocationResult& r, const Weights& w) {
  if (r.rows.empty()) return 0.0;
  double total = 0.0;
  for (const auto& row : r.rows) total += row.outcome.cost(w.time, w.price);
  return total / static_cast<double>(r.rows.size());
}

/// Solves every server independently and composes the result. When a
/// coverage index is supplied, every assignment must be covered at the
/// matrix's slot.
inline AllocationResult allocate_all(const Scenario& sc, const OffloadMatrix& m, const Weights& w,
                                     const Thresholds& th = {}, const CoverageIndex* coverage = nullptr) {
  w.validate();
  m.validate(sc);
  AllocationResult result;
  result.rows.resize(m.size());
  std::map<int, std::vector<size_t>> by_server;
  for (size_t r = 0; r < m.size(); ++r) {
    const int st = m.subtasks[r];
    const int server = m.servers[r];
    if (coverage && !coverage->covers(server, sc.subtasks[st].owner, m.slot)) {
      throw InfeasibleError("allocate_all: sub-task " + std::to_string(st) + " (CTE " +
                            std::to_string(sc.subtasks[st].owner) + ") assigned to satellite " +
                            std::to_string(server) + " without coverage at slot " +
                            std::to_string(m.slot));
    }
    by_server[server].push_back(r);
    result.rows[r].subtask = st;
    result.rows[r].server = server;
  }
  for (const auto& [server_id, rows] : by_server) {
    const Satellite& server = sc.satellites[server_id];
    ServerAllocation summary;
    summary.server = server_id;

    std::vector<LinkedSubTask> linked;
    std::vector<SubTask> tasks;
    for (size_t r : rows) {
      const SubTask& st = sc.subtasks[m.subtasks[r]];
      linked.push_back({st, link_for(sc, st.id, server_id)});
      tasks.push_back(st);
    }
    const BandwidthSolution bw = allocate_bandwidth(server, linked, w, th.bandwidth);
    summary.bandwidth_dual = bw.dual;
    if (bw.threshold_active) {
      result.warnings.push_back("bandwidth threshold active on satellite " + std::to_string(server_id));
    }

    if (server.layer == Layer::kCns) {
      for (size_t k = 0; k < rows.size(); ++k) {
        RowAllocation& row = result.rows[rows[k]];
        row.y = bw.shares[k];
        row.omega = allocate_cns_power(tasks[k], w, server.compute_unit_price);
        row.outcome = service_outcome(tasks[k], server, linked[k].link, row.y, row.omega);
        summary.bandwidth_used += row.y;
      }
    } else {
      const ComputeSolution cs = allocate_compute(server, tasks, w, th.compute);
      summary.compute_dual = cs.dual;
      summary.compute_branch = cs.branch;
      if (cs.threshold_active) {
        result.warnings.push_back("compute threshold active on satellite " + std::to_string(server_id));
      }
      for (size_t k = 0; k < rows.size(); ++k) {
        RowAllocation& row = result.rows[rows[k]];
        row.y = bw.shares[k];
        row.beta = cs.shares[k];
        row.outcome = service_outcome(tasks[k], server, linked[k].link, row.y, row.beta);
        summary.bandwidth_used += row.y;
        summary.compute_used += row.beta;
      }
    }
    result.servers.push_back(summary);
  }
  result.objective = weighted_mean_cost(result, w);
  return result;
}

/// Largest violation of the per-server capacity constraints (sum y <= 1,
/// sum beta <= rho_b) and the per-variable thresholds; 0 when feasible.
inline double capacity_violation(const Scenario& sc, const AllocationResult& r,
                                 const Thresholds& th = {}) {
  double worst = 0.0;
  for (const auto& s : r.servers) {
    worst = std::max(worst, s.bandwidth_used - 1.0);
    worst = std::max(worst, s.compute_used - sc.satellites[s.server].processor_count);
  }
  for (const auto& row : r.rows) {
    worst = std::max(worst, row.y - th.bandwidth);
    if (sc.satellites[row.server].layer != Layer::kCns) {
      const double cap = th.compute > 0.0 ? th.compute : sc.satellites[row.server].processor_count;
      worst = std::max(worst, row.beta - cap);
    }
  }
  return worst;
}

}  // namespace satoffload

#endif  // SATOFFLOAD_ALLOCATOR_HPP_
