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

#ifndef SATOFFLOAD_ALLOCATOR_ORACLE_HPP_
#define SATOFFLOAD_ALLOCATOR_ORACLE_HPP_

// Grid-search oracles for the allocation subproblems and the
// closed-form-versus-oracle verification suite.
//
// Grids with at most kExhaustiveGridPoints points are enumerated in full.
// Larger grids are searched coarse-to-fine: an exhaustive pass on a coarse
// grid, then repeated exhaustive passes on 5x finer grids in a box around the
// incumbent, down to the requested step. For convex objectives this finds the
// same grid optimum as a full enumeration.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "satoffload/allocator.hpp"
#include "satoffload/errors.hpp"

namespace satoffload {

inline constexpr int kOracleMaxVariables = 4;
inline constexpr double kExhaustiveGridPoints = 2e6;

struct OracleResult {
  std::vector<double> allocation;
  double objective = std::numeric_limits<double>::infinity();
  long evaluations = 0;
};

namespace detail {

struct GridAxis {
  std::vector<double> values;
};

inline void enumerate_grid(const std::vector<GridAxis>& axes, double sum_cap,
                           const std::function<double(std::span<const double>)>& f,
                           OracleResult& best) {
  const size_t n = axes.size();
  std::vector<double> point(n, 0.0);
  std::function<void(size_t, double)> rec = [&](size_t d, double partial) {
    if (d == n) {
      const double value = f(point);
      ++best.evaluations;
      if (value < best.objective) {
        best.objective = value;
        best.allocation = point;
      }
      return;
    }
    for (double v : axes[d].values) {
      if (partial + v > sum_cap * (1.0 + 1e-12)) break;
      point[d] = v;
      rec(d + 1, partial + v);
    }
  };
  rec(0, 0.0);
}

inline std::vector<double> axis_values(double lo, double hi, double step, double upper) {
  std::vector<double> values;
  const long first = std::max(1L, static_cast<long>(std::ceil(lo / step - 1e-9)));
  const long last = static_cast<long>(std::floor(std::min(hi, upper) / step + 1e-9));
  for (long k = first; k <= last; ++k) values.push_back(static_cast<double>(k) * step);
  return values;
}

}  // namespace detail

/// Minimizes `f` over the grid {k * step : k >= 1, k * step <= upper}^n
/// restricted to sum <= sum_cap.
inline OracleResult grid_minimize(int variables, double upper, double sum_cap, double step,
                                  const std::function<double(std::span<const double>)>& f) {
  if (variables > kOracleMaxVariables) {
    throw DomainError("brute_force_oracle: refusing " + std::to_string(variables) +
                      " variables (limit " + std::to_string(kOracleMaxVariables) + ")");
  }
  if (variables < 1) throw DomainError("brute_force_oracle: no decision variables");
  if (!(step > 0.0)) throw DomainError("brute_force_oracle: grid_step must be positive");
  const size_t n = static_cast<size_t>(variables);
  const double per_axis = std::floor(upper / step + 1e-9);
  if (per_axis < 1.0 || static_cast<double>(n) * step > sum_cap * (1.0 + 1e-12)) {
    throw InfeasibleError("brute_force_oracle: grid with step " + std::to_string(step) +
                          " has no feasible point");
  }

  OracleResult best;
  if (std::pow(per_axis, static_cast<double>(n)) <= kExhaustiveGridPoints) {
    std::vector<detail::GridAxis> axes(n, {detail::axis_values(step, upper, step, upper)});
    detail::enumerate_grid(axes, sum_cap, f, best);
  } else {
    const double coarse_points = std::floor(std::pow(2e5, 1.0 / static_cast<double>(n)));
    double current = step;
    while (upper / current > coarse_points) current *= 5.0;
    std::vector<detail::GridAxis> axes(n, {detail::axis_values(current, upper, current, upper)});
    detail::enumerate_grid(axes, sum_cap, f, best);
    while (current > step * (1.0 + 1e-9)) {
      const double finer = std::max(step, current / 5.0);
      std::vector<detail::GridAxis> local(n);
      for (size_t d = 0; d < n; ++d) {
        local[d].values = detail::axis_values(best.allocation[d] - 2.0 * current,
                                              best.allocation[d] + 2.0 * current, finer, upper);
      }
      detail::enumerate_grid(local, sum_cap, f, best);
      current = finer;
    }
  }
  if (best.allocation.empty()) {
    throw InfeasibleError("brute_force_oracle: no feasible grid point");
  }
  return best;
}

inline OracleResult brute_force_oracle(const BandwidthSubproblem& p, double grid_step) {
  const double upper = std::min(1.0, p.threshold);
  return grid_minimize(static_cast<int>(p.size()), upper, 1.0, grid_step,
                       [&](std::span<const double> y) { return p.objective(y); });
}

inline OracleResult brute_force_oracle(const ComputeSubproblem& p, double grid_step) {
  return grid_minimize(static_cast<int>(p.size()), p.cap(), p.capacity, grid_step,
                       [&](std::span<const double> b) { return p.objective(b); });
}

/// One-variable CNS problem over omega in (0, omega_max].
inline OracleResult brute_force_oracle(const CnsSubproblem& p, double grid_step, double omega_max) {
  return grid_minimize(1, omega_max, std::numeric_limits<double>::infinity(), grid_step,
                       [&](std::span<const double> w) { return p.objective(w[0]); });
}

// ---------------------------------------------------------------------------
// Finite-difference KKT checks.

/// Five-point central difference of f along coordinate i with relative step.
inline double central_difference(const std::function<double(std::span<const double>)>& f,
                                 std::vector<double> x, size_t i, double rel_step = 1e-3) {
  const double h = rel_step * std::max(std::abs(x[i]), 1e-6);
  const double x0 = x[i];
  auto at = [&](double v) {
    x[i] = v;
    return f(x);
  };
  const double d = (-at(x0 + 2 * h) + 8 * at(x0 + h) - 8 * at(x0 - h) + at(x0 - 2 * h)) / (12 * h);
  return d;
}

/// Largest Lagrangian-gradient component over non-clipped variables.
inline double bandwidth_kkt_residual(const BandwidthSubproblem& p, const BandwidthSolution& s) {
  auto lagrangian = [&](std::span<const double> y) {
    double sum = 0.0;
    for (double v : y) sum += v;
    return p.objective(y) + s.dual * (sum - 1.0);
  };
  double worst = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    if (s.shares[i] >= p.threshold && p.threshold < 1.0) continue;
    worst = std::max(worst, std::abs(central_difference(lagrangian, s.shares, i)));
  }
  return worst;
}

inline double compute_kkt_residual(const ComputeSubproblem& p, const ComputeSolution& s) {
  auto lagrangian = [&](std::span<const double> b) {
    double sum = 0.0;
    for (double v : b) sum += v;
    return p.objective(b) + s.dual * (sum - p.capacity);
  };
  double worst = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    if (s.shares[i] >= p.cap() * (1.0 - 1e-12)) continue;
    worst = std::max(worst, std::abs(central_difference(lagrangian, s.shares, i)));
  }
  return worst;
}

inline double cns_kkt_residual(const CnsSubproblem& p, double omega) {
  std::vector<double> x{omega};
  return std::abs(central_difference([&](std::span<const double> w) { return p.objective(w[0]); },
                                     x, 0));
}

inline double compute_slackness(const ComputeSubproblem& p, const ComputeSolution& s) {
  double sum = 0.0;
  for (double b : s.shares) sum += b;
  return std::abs(s.dual * (sum - p.capacity));
}

// ---------------------------------------------------------------------------
// Random instances drawn from the default parameter ranges.

struct RandomInstanceRanges {
  std::array<double, 2> memory_mb{10.0, 90.0};
  std::array<double, 2> compute_gigacycles{15.0, 70.0};
  std::array<double, 2> alpha1{0.1, 0.9};
};

inline Weights random_weights(std::mt19937_64& rng, const RandomInstanceRanges& r = {}) {
  std::uniform_real_distribution<double> a(r.alpha1[0], r.alpha1[1]);
  const double a1 = a(rng);
  return {a1, 1.0 - a1};
}

inline BandwidthSubproblem random_bandwidth_subproblem(std::mt19937_64& rng, int n,
                                                       const RandomInstanceRanges& r = {}) {
  const ScenarioConfig defaults;
  std::uniform_real_distribution<double> mem(r.memory_mb[0], r.memory_mb[1]);
  std::uniform_real_distribution<double> gain_db(0.0, 10.0);
  std::uniform_int_distribution<int> layer(0, 1);
  const Weights w = random_weights(rng, r);
  const LayerParams& lp = layer(rng) == 0 ? defaults.lms : defaults.cubesat;
  std::vector<LinkedSubTask> linked;
  for (int i = 0; i < n; ++i) {
    SubTask st;
    st.id = i;
    st.memory_mb = mem(rng);
    st.compute_gigacycles = 1.0;
    LinkParams link{lp.bandwidth_hz, defaults.transmit_power_mw, db_to_linear(gain_db(rng)),
                    defaults.noise_mw};
    linked.push_back({st, link});
  }
  return bandwidth_subproblem(linked, w);
}

inline ComputeSubproblem random_compute_subproblem(std::mt19937_64& rng, int n,
                                                   const RandomInstanceRanges& r = {}) {
  const ScenarioConfig defaults;
  std::uniform_real_distribution<double> demand(r.compute_gigacycles[0], r.compute_gigacycles[1]);
  std::uniform_int_distribution<int> layer(0, 1);
  std::uniform_int_distribution<int> processors(1, 2);
  const Weights w = random_weights(rng, r);
  const LayerParams& lp = layer(rng) == 0 ? defaults.lms : defaults.cubesat;
  Satellite server;
  server.layer = Layer::kLms;
  server.compute_per_processor = lp.compute_per_processor;
  server.processor_count = processors(rng);
  server.compute_unit_price = lp.compute_unit_price;
  std::vector<SubTask> tasks;
  for (int i = 0; i < n; ++i) {
    SubTask st;
    st.id = i;
    st.memory_mb = 1.0;
    st.compute_gigacycles = demand(rng);
    tasks.push_back(st);
  }
  return compute_subproblem(server, tasks, w);
}

inline CnsSubproblem random_cns_subproblem(std::mt19937_64& rng, const RandomInstanceRanges& r = {}) {
  std::uniform_real_distribution<double> demand(r.compute_gigacycles[0], r.compute_gigacycles[1]);
  std::uniform_real_distribution<double> chi(1.0, 20.0);
  const Weights w = random_weights(rng, r);
  return {w.time * demand(rng), w.price * chi(rng)};
}

// ---------------------------------------------------------------------------
// Verification suite.

struct CheckTally {
  std::string name;
  int passed = 0;
  int failed = 0;
  double worst = 0.0;

  void record(bool ok, double value) {
    ok ? ++passed : ++failed;
    worst = std::max(worst, value);
  }
};

struct AllocatorVerification {
  std::vector<CheckTally> checks;
  double seconds = 0.0;

  int passed() const {
    int n = 0;
    for (const auto& c : checks) n += c.passed;
    return n;
  }
  int failed() const {
    int n = 0;
    for (const auto& c : checks) n += c.failed;
    return n;
  }
};

struct VerificationOptions {
  int instances = 100;
  double grid_step = 1e-3;
  double kkt_tolerance = 1e-8;
  /// Largest allowed relative gap by which the closed form may trail the grid
  /// optimum. The grid optimum can never beat the exact optimum, so any
  /// positive gap beyond rounding is a failure.
  double dominance_slack = 1e-9;
  /// Largest allowed relative gap oracle - closed (grid resolution).
  double resolution_bound = 1e-3;
};

/// Closed forms versus grid oracles on random instances with 1 to 4
/// variables per subproblem.
inline AllocatorVerification verify_allocator(std::uint64_t seed, const VerificationOptions& opt = {}) {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> size(1, kOracleMaxVariables);
  CheckTally bw_dom{"bandwidth_oracle_dominance"}, bw_res{"bandwidth_oracle_resolution"},
      bw_kkt{"bandwidth_kkt_stationarity"};
  CheckTally cp_dom{"compute_oracle_dominance"}, cp_res{"compute_oracle_resolution"},
      cp_kkt{"compute_kkt_stationarity"}, cp_slack{"compute_complementary_slackness"};
  CheckTally cns_dom{"cns_oracle_dominance"}, cns_res{"cns_oracle_resolution"},
      cns_kkt{"cns_kkt_stationarity"};

  auto dominance = [&](double closed, double oracle, CheckTally& dom, CheckTally& res) {
    const double scale = std::max(1.0, std::abs(oracle));
    const double lead = (closed - oracle) / scale;
    dom.record(lead <= opt.dominance_slack, std::max(0.0, lead));
    const double gap = (oracle - closed) / scale;
    res.record(gap <= opt.resolution_bound, std::max(0.0, gap));
  };

  for (int k = 0; k < opt.instances; ++k) {
    {
      const auto p = random_bandwidth_subproblem(rng, size(rng));
      const auto s = solve_bandwidth(p);
      const auto o = brute_force_oracle(p, opt.grid_step);
      dominance(p.objective(s.shares), o.objective, bw_dom, bw_res);
      const double r = bandwidth_kkt_residual(p, s);
      bw_kkt.record(r <= opt.kkt_tolerance, r);
    }
    {
      const auto p = random_compute_subproblem(rng, size(rng));
      const auto s = solve_compute(p);
      const auto o = brute_force_oracle(p, opt.grid_step);
      dominance(p.objective(s.shares), o.objective, cp_dom, cp_res);
      const double r = compute_kkt_residual(p, s);
      cp_kkt.record(r <= opt.kkt_tolerance, r);
      const double cs = compute_slackness(p, s);
      cp_slack.record(cs <= opt.kkt_tolerance, cs);
    }
    {
      const auto p = random_cns_subproblem(rng);
      const double omega = solve_cns(p);
      const double omega_max = std::max(4.0 * omega, 1.0);
      const auto o = brute_force_oracle(p, opt.grid_step, omega_max);
      dominance(p.objective(omega), o.objective, cns_dom, cns_res);
      const double r = cns_kkt_residual(p, omega);
      cns_kkt.record(r <= opt.kkt_tolerance, r);
    }
  }
  AllocatorVerification out;
  out.checks = {bw_dom, bw_res, bw_kkt, cp_dom, cp_res, cp_kkt, cp_slack, cns_dom, cns_res, cns_kkt};
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace satoffload

#endif  // SATOFFLOAD_ALLOCATOR_ORACLE_HPP_
