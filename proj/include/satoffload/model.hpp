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

#ifndef SATOFFLOAD_MODEL_HPP_
#define SATOFFLOAD_MODEL_HPP_

// Entities of the three-layer satellite edge network: satellites, CTEs,
// tasks split into sub-tasks, circular-orbit ground tracks and the coverage
// windows they induce over a flat square service region.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "satoffload/errors.hpp"

namespace satoffload {

inline constexpr double kEarthRadiusKm = 6371.0;
inline constexpr double kEarthMassKg = 5.9722e24;
inline constexpr double kGravitationalConstant = 6.67e-11;  // N m^2 / kg^2
inline constexpr double kEarthMu = kEarthMassKg * kGravitationalConstant;

enum class Layer { kCns = 0, kLms = 1, kCubeSat = 2 };

inline constexpr int kLayerCount = 3;

inline const char* layer_name(Layer layer) {
  switch (layer) {
    case Layer::kCns: return "CNS";
    case Layer::kLms: return "LMS";
    case Layer::kCubeSat: return "CubeSat";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Orbital mechanics (circular orbits).

/// Orbit radius in km for a satellite at the given altitude.
inline double orbital_radius(double altitude_km) {
  if (!(altitude_km >= 0.0)) {
    throw DomainError("orbital_radius: altitude must be non-negative, got " +
                      std::to_string(altitude_km));
  }
  return altitude_km + kEarthRadiusKm;
}

/// Circular orbital speed in m/s for an orbit radius given in km.
inline double orbital_velocity(double radius_km) {
  if (!(radius_km > 0.0)) {
    throw DomainError("orbital_velocity: radius must be positive, got " +
                      std::to_string(radius_km));
  }
  return std::sqrt(kEarthMu / (radius_km * 1e3));
}

/// Orbital period in seconds for an orbit radius given in km.
inline double orbital_period(double radius_km) {
  if (!(radius_km > 0.0)) {
    throw DomainError("orbital_period: radius must be positive, got " +
                      std::to_string(radius_km));
  }
  const double r = radius_km * 1e3;
  return 2.0 * std::numbers::pi * std::sqrt(r * r * r / kEarthMu);
}

/// Speed of the sub-satellite point along the ground, km/s.
inline double ground_speed_km_s(double altitude_km) {
  const double radius = orbital_radius(altitude_km);
  return orbital_velocity(radius) * 1e-3 * kEarthRadiusKm / radius;
}

// ---------------------------------------------------------------------------
// Entities.

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(Vec2 a, Vec2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// Straight-line ground track over the region. The sub-satellite point starts
/// at `origin` and moves along `heading`; it comes back to `origin` once per
/// orbital period.
struct GroundTrack {
  Vec2 origin;
  double heading_rad = 0.0;
  double speed_km_s = 0.0;
  double period_s = 0.0;

  Vec2 position(double t_s) const {
    double along = speed_km_s * t_s;
    if (period_s > 0.0) {
      const double loop = speed_km_s * period_s;
      along = std::fmod(along + 0.5 * loop, loop);
      if (along < 0.0) along += loop;
      along -= 0.5 * loop;
    }
    return {origin.x + along * std::cos(heading_rad),
            origin.y + along * std::sin(heading_rad)};
  }
};

struct Satellite {
  int id = 0;
  Layer layer = Layer::kCubeSat;
  double altitude_km = 0.0;
  double bandwidth_hz = 0.0;           // zeta_b
  double compute_per_processor = 0.0;  // omega_b, Gigacycles/s
  double processor_count = 1.0;        // rho_b
  double comm_unit_price = 0.0;        // chi^tran, currency per MHz allocated
  double compute_unit_price = 0.0;     // chi^comp, currency per Gigacycle
  double footprint_radius_km = 0.0;    // <= 0 means the whole region
  GroundTrack track;

  bool stationary() const { return track.speed_km_s == 0.0; }
  bool covers_everything() const { return footprint_radius_km <= 0.0; }

  bool covers(Vec2 point, double t_s) const {
    if (covers_everything()) return true;
    return distance(track.position(t_s), point) <= footprint_radius_km;
  }
};

struct Cte {
  int id = 0;
  Vec2 position;
  double transmit_power_mw = 150.0;
  double channel_gain_db = 5.0;
  double cached_memory_mb = 0.0;
};

struct SubTask {
  int id = 0;
  int parent_task = 0;
  int owner = 0;  // CTE id
  double memory_mb = 0.0;
  double compute_gigacycles = 0.0;
};

struct Task {
  int id = 0;
  int arrival_slot = 0;
  std::vector<int> subtasks;  // indices into Scenario::subtasks
};

struct CoverageWindow {
  int satellite = 0;
  int cte = 0;
  int start_slot = 0;
  int end_slot = 0;  // inclusive
  double t_max_s = 0.0;
};

// ---------------------------------------------------------------------------
// Scenario configuration. Field names follow the config file schema.

struct LayerParams {
  int count = 0;
  double altitude_km = 0.0;
  double bandwidth_hz = 0.0;
  double compute_per_processor = 0.0;
  double processor_count = 1.0;
  double comm_unit_price = 0.0;
  double compute_unit_price = 0.0;
  double footprint_radius_km = 0.0;
};

struct ScenarioConfig {
  double region_area_km2 = 500.0;
  int cte_count = 500;
  bool poisson_cte_count = false;
  int task_count = 100;
  int subtasks_per_task = 5;
  std::array<double, 2> memory_range_mb{10.0, 90.0};
  std::array<double, 2> compute_range_gigacycles{15.0, 70.0};
  double transmit_power_mw = 150.0;
  double channel_gain_db = 5.0;
  double noise_mw = 1e-5;
  double slot_seconds = 1.0;
  int horizon_slots = 240;
  int arrival_span_slots = 120;
  int approach_lead_slots = 60;
  int min_cubesats_per_cte = 3;
  int max_generation_retries = 200;

  LayerParams cns{1, 35786.0, 1e3, 500.0, 1.0, 0.30e-4, 10.0, 0.0};
  LayerParams lms{5, 1000.0, 200e6, 80.0, 1.0, 0.12e-4, 0.3, 400.0};
  LayerParams cubesat{25, 200.0, 40e6, 10.0, 1.0, 0.08e-4, 0.08, 150.0};

  const LayerParams& layer(Layer l) const {
    switch (l) {
      case Layer::kCns: return cns;
      case Layer::kLms: return lms;
      case Layer::kCubeSat: return cubesat;
    }
    return cns;
  }

  double region_side_km() const { return std::sqrt(region_area_km2); }

  void validate() const {
    auto fail = [](const std::string& what) { throw ConfigError("scenario: " + what); };
    if (!(region_area_km2 > 0.0)) fail("region_area_km2 must be positive");
    if (cte_count < 0 || task_count < 0) fail("counts must be non-negative");
    if (subtasks_per_task < 1) fail("subtasks_per_task must be >= 1");
    if (!(memory_range_mb[0] > 0.0 && memory_range_mb[1] >= memory_range_mb[0]))
      fail("memory_range_mb must satisfy 0 < lo <= hi");
    if (!(compute_range_gigacycles[0] > 0.0 &&
          compute_range_gigacycles[1] >= compute_range_gigacycles[0]))
      fail("compute_range_gigacycles must satisfy 0 < lo <= hi");
    if (!(transmit_power_mw > 0.0)) fail("transmit_power_mw must be positive");
    if (!(noise_mw > 0.0)) fail("noise_mw must be positive");
    if (!(slot_seconds > 0.0)) fail("slot_seconds must be positive");
    if (horizon_slots < 1) fail("horizon_slots must be >= 1");
    if (arrival_span_slots < 1 || arrival_span_slots > horizon_slots)
      fail("arrival_span_slots must lie in [1, horizon_slots]");
    if (approach_lead_slots < 0) fail("approach_lead_slots must be >= 0");
    if (min_cubesats_per_cte < 0) fail("min_cubesats_per_cte must be >= 0");
    if (max_generation_retries < 1) fail("max_generation_retries must be >= 1");
    for (Layer l : {Layer::kCns, Layer::kLms, Layer::kCubeSat}) {
      const LayerParams& p = layer(l);
      const std::string name = layer_name(l);
      if (p.count < 0) fail(name + ".count must be >= 0");
      if (!(p.altitude_km >= 0.0)) fail(name + ".altitude_km must be >= 0");
      if (!(p.bandwidth_hz > 0.0)) fail(name + ".bandwidth_hz must be positive");
      if (!(p.compute_per_processor > 0.0)) fail(name + ".compute_per_processor must be positive");
      if (!(p.processor_count >= 1.0)) fail(name + ".processor_count must be >= 1");
      if (!(p.comm_unit_price > 0.0 && p.compute_unit_price > 0.0))
        fail(name + " prices must be positive");
    }
    if (!(cns.compute_unit_price > lms.compute_unit_price &&
          lms.compute_unit_price > cubesat.compute_unit_price)) {
      fail("compute unit prices must satisfy CNS > LMS > CubeSat");
    }
  }
};

/// Small scenario family: 1 CNS, 1 LMS, 3 CubeSats, 20 CTEs, 10 tasks of 5
/// sub-tasks arriving over 60 one-second slots. The CNS link runs at 1 GHz.
inline ScenarioConfig toy_scenario_config() {
  ScenarioConfig c;
  c.cte_count = 20;
  c.task_count = 10;
  c.horizon_slots = 120;
  c.arrival_span_slots = 60;
  c.approach_lead_slots = 30;
  c.lms.count = 1;
  c.cubesat.count = 3;
  c.cns.bandwidth_hz = 1e9;
  return c;
}

// ---------------------------------------------------------------------------
// Coverage.

/// Per (satellite, CTE) coverage windows over a fixed horizon, with O(1)
/// lookup of the window containing a slot.
class CoverageIndex {
 public:
  CoverageIndex() = default;
  CoverageIndex(int satellites, int ctes, int horizon)
      : satellites_(satellites), ctes_(ctes), horizon_(horizon),
        windows_(static_cast<size_t>(satellites) * ctes),
        slot_window_(static_cast<size_t>(satellites) * ctes * horizon, -1) {}

  int horizon() const { return horizon_; }

  void add(const CoverageWindow& w) {
    auto& list = windows_[key(w.satellite, w.cte)];
    const int index = static_cast<int>(list.size());
    list.push_back(w);
    for (int s = w.start_slot; s <= w.end_slot; ++s) {
      slot_window_[key(w.satellite, w.cte) * horizon_ + s] = index;
    }
  }

  const std::vector<CoverageWindow>& windows(int satellite, int cte) const {
    return windows_[key(satellite, cte)];
  }

  const CoverageWindow* window_at(int satellite, int cte, int slot) const {
    if (slot < 0 || slot >= horizon_) return nullptr;
    const int index = slot_window_[key(satellite, cte) * horizon_ + slot];
    return index < 0 ? nullptr : &windows_[key(satellite, cte)][index];
  }

  bool covers(int satellite, int cte, int slot) const {
    return window_at(satellite, cte, slot) != nullptr;
  }

  std::vector<CoverageWindow> all() const {
    std::vector<CoverageWindow> out;
    for (const auto& list : windows_) out.insert(out.end(), list.begin(), list.end());
    return out;
  }

 private:
  size_t key(int satellite, int cte) const {
    return static_cast<size_t>(satellite) * ctes_ + cte;
  }

  int satellites_ = 0;
  int ctes_ = 0;
  int horizon_ = 0;
  std::vector<std::vector<CoverageWindow>> windows_;
  std::vector<int> slot_window_;
};

struct Scenario {
  ScenarioConfig config;
  std::uint64_t seed = 0;
  std::vector<Satellite> satellites;  // CNS first, then LMS, then CubeSats
  std::vector<Cte> ctes;
  std::vector<Task> tasks;            // sorted by arrival slot, then id
  std::vector<SubTask> subtasks;

  std::vector<int> satellites_of(Layer layer) const {
    std::vector<int> ids;
    for (const auto& s : satellites) {
      if (s.layer == layer) ids.push_back(s.id);
    }
    return ids;
  }

  double total_memory_mb() const {
    double total = 0.0;
    for (const auto& st : subtasks) total += st.memory_mb;
    return total;
  }
};

/// Coverage windows of every (satellite, CTE) pair over `horizon_slots`,
/// sampled at slot starts. Satellites with a whole-region footprint yield a
/// single full-horizon window per CTE.
inline CoverageIndex build_coverage(const Scenario& scenario, int horizon_slots) {
  if (horizon_slots < 1) throw DomainError("coverage_windows: horizon_slots must be >= 1");
  const int sats = static_cast<int>(scenario.satellites.size());
  const int ctes = static_cast<int>(scenario.ctes.size());
  const double slot_s = scenario.config.slot_seconds;
  CoverageIndex index(sats, ctes, horizon_slots);
  std::vector<Vec2> track(horizon_slots);
  for (const auto& sat : scenario.satellites) {
    if (!sat.covers_everything()) {
      for (int n = 0; n < horizon_slots; ++n) track[n] = sat.track.position(n * slot_s);
    }
    for (const auto& cte : scenario.ctes) {
      int start = -1;
      auto close = [&](int end) {
        index.add({sat.id, cte.id, start, end, (end - start + 1) * slot_s});
        start = -1;
      };
      for (int n = 0; n < horizon_slots; ++n) {
        const bool in = sat.covers_everything() ||
                        distance(track[n], cte.position) <= sat.footprint_radius_km;
        if (in && start < 0) start = n;
        if (!in && start >= 0) close(n - 1);
      }
      if (start >= 0) close(horizon_slots - 1);
    }
  }
  return index;
}

/// Flat list of coverage windows, sorted by (satellite, CTE, start slot).
inline std::vector<CoverageWindow> coverage_windows(const Scenario& scenario, int horizon_slots) {
  return build_coverage(scenario, horizon_slots).all();
}

// ---------------------------------------------------------------------------
// Scenario generation.

namespace detail {

inline LayerParams layer_params(const ScenarioConfig& c, Layer l) { return c.layer(l); }

/// Ground track whose closest approach to `target` is at most
/// `max_offset_km` away and happens `time_to_closest_s` seconds after t = 0.
inline GroundTrack track_through(Vec2 target, double heading, double offset_km,
                                 double time_to_closest_s, double speed, double period) {
  const Vec2 dir{std::cos(heading), std::sin(heading)};
  const Vec2 normal{-dir.y, dir.x};
  const double back = speed * time_to_closest_s;
  GroundTrack t;
  t.origin = {target.x + offset_km * normal.x - back * dir.x,
              target.y + offset_km * normal.y - back * dir.y};
  t.heading_rad = heading;
  t.speed_km_s = speed;
  t.period_s = period;
  return t;
}

}  // namespace detail

/// Deterministic scenario for a fixed seed. CTE positions are uniform over the
/// square region (an HPPP realization, optionally with a Poisson count);
/// sub-task memory and compute demands are uniform over the configured ranges
/// and paired by rank so compute demand is non-decreasing in memory.
inline Scenario generate_scenario(const ScenarioConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double side = config.region_side_km();
  const Vec2 center{0.5 * side, 0.5 * side};

  Scenario sc;
  sc.config = config;
  sc.seed = seed;

  int cte_count = config.cte_count;
  if (config.poisson_cte_count && cte_count > 0) {
    std::poisson_distribution<int> poisson(static_cast<double>(cte_count));
    cte_count = poisson(rng);
  }
  for (int i = 0; i < cte_count; ++i) {
    Cte c;
    c.id = i;
    c.position = {unit(rng) * side, unit(rng) * side};
    c.transmit_power_mw = config.transmit_power_mw;
    c.channel_gain_db = config.channel_gain_db;
    sc.ctes.push_back(c);
  }

  const double slot_s = config.slot_seconds;
  auto leo_track = [&](const LayerParams& p, Vec2 target, bool covering_now) {
    const double speed = ground_speed_km_s(p.altitude_km);
    const double period = orbital_period(orbital_radius(p.altitude_km));
    const double heading = unit(rng) * 2.0 * std::numbers::pi;
    const double offset = (unit(rng) - 0.5) * p.footprint_radius_km;
    const double half_pass =
        std::sqrt(std::max(0.0, p.footprint_radius_km * p.footprint_radius_km - offset * offset)) /
        speed;
    const double lo = -0.8 * half_pass;
    const double hi = covering_now ? 0.8 * half_pass : half_pass + config.approach_lead_slots * slot_s;
    const double tau = lo + unit(rng) * (hi - lo);
    return detail::track_through(target, heading, offset, tau, speed, period);
  };

  int next_id = 0;
  for (Layer l : {Layer::kCns, Layer::kLms, Layer::kCubeSat}) {
    const LayerParams& p = config.layer(l);
    for (int i = 0; i < p.count; ++i) {
      Satellite s;
      s.id = next_id++;
      s.layer = l;
      s.altitude_km = p.altitude_km;
      s.bandwidth_hz = p.bandwidth_hz;
      s.compute_per_processor = p.compute_per_processor;
      s.processor_count = p.processor_count;
      s.comm_unit_price = p.comm_unit_price;
      s.compute_unit_price = p.compute_unit_price;
      s.footprint_radius_km = p.footprint_radius_km;
      if (l == Layer::kCns) {
        s.footprint_radius_km = 0.0;
        s.track.origin = center;
      } else {
        s.track = leo_track(p, center, false);
      }
      sc.satellites.push_back(s);
    }
  }

  // Every CTE needs min_cubesats_per_cte CubeSats covering it at slot 0;
  // reposition CubeSats over under-served CTEs until that holds.
  if (!sc.ctes.empty() && config.min_cubesats_per_cte > 0) {
    const auto cubes = sc.satellites_of(Layer::kCubeSat);
    auto count_at_start = [&](const Cte& c) {
      int n = 0;
      for (int id : cubes) n += sc.satellites[id].covers(c.position, 0.0) ? 1 : 0;
      return n;
    };
    bool satisfied = false;
    for (int attempt = 0; attempt < config.max_generation_retries; ++attempt) {
      satisfied = true;
      for (const auto& c : sc.ctes) {
        if (count_at_start(c) >= config.min_cubesats_per_cte) continue;
        satisfied = false;
        std::vector<int> idle;
        for (int id : cubes) {
          if (!sc.satellites[id].covers(c.position, 0.0)) idle.push_back(id);
        }
        if (idle.empty()) break;
        const int pick = idle[static_cast<size_t>(unit(rng) * idle.size()) % idle.size()];
        sc.satellites[pick].track = leo_track(config.cubesat, c.position, true);
      }
      if (satisfied) break;
    }
    if (!satisfied) {
      throw GenerationError("generate_scenario: could not give every CTE " +
                            std::to_string(config.min_cubesats_per_cte) +
                            " covering CubeSats after " +
                            std::to_string(config.max_generation_retries) + " retries");
    }
  }

  if (sc.ctes.empty()) return sc;

  const int task_count = config.task_count;
  const int per_task = config.subtasks_per_task;
  const int total = task_count * per_task;
  std::vector<double> memory(total), compute(total);
  for (auto& m : memory) {
    m = config.memory_range_mb[0] + unit(rng) * (config.memory_range_mb[1] - config.memory_range_mb[0]);
  }
  for (auto& v : compute) {
    v = config.compute_range_gigacycles[0] +
        unit(rng) * (config.compute_range_gigacycles[1] - config.compute_range_gigacycles[0]);
  }
  // Comonotone pairing: the k-th smallest memory gets the k-th smallest demand.
  std::vector<int> order(total);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return memory[a] < memory[b]; });
  std::vector<double> sorted_compute = compute;
  std::sort(sorted_compute.begin(), sorted_compute.end());
  for (int k = 0; k < total; ++k) compute[order[k]] = sorted_compute[k];

  std::vector<int> owners(sc.ctes.size());
  std::iota(owners.begin(), owners.end(), 0);
  for (int t = 0; t < task_count; ++t) {
    Task task;
    task.id = t;
    task.arrival_slot = static_cast<int>(unit(rng) * config.arrival_span_slots);
    task.arrival_slot = std::min(task.arrival_slot, config.arrival_span_slots - 1);
    // Distinct owners per task when there are enough CTEs.
    std::shuffle(owners.begin(), owners.end(), rng);
    for (int k = 0; k < per_task; ++k) {
      SubTask st;
      st.id = t * per_task + k;
      st.parent_task = t;
      st.owner = owners[static_cast<size_t>(k) % owners.size()];
      st.memory_mb = memory[st.id];
      st.compute_gigacycles = compute[st.id];
      sc.subtasks.push_back(st);
      sc.ctes[st.owner].cached_memory_mb += st.memory_mb;
      task.subtasks.push_back(st.id);
    }
    sc.tasks.push_back(std::move(task));
  }
  std::stable_sort(sc.tasks.begin(), sc.tasks.end(),
                   [](const Task& a, const Task& b) { return a.arrival_slot < b.arrival_slot; });
  return sc;
}

}  // namespace satoffload

#endif  // SATOFFLOAD_MODEL_HPP_
