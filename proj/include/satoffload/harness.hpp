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

#ifndef SATOFFLOAD_HARNESS_HPP_
#define SATOFFLOAD_HARNESS_HPP_

// Experiment configuration, metrics, evaluation and sweep runners.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"
#include "satoffload/baselines.hpp"
#include "satoffload/env.hpp"
#include "satoffload/errors.hpp"
#include "satoffload/mappo.hpp"
#include "satoffload/model.hpp"

namespace satoffload {

inline constexpr const char* kVersion = "1.0.0";
inline constexpr int kConfigSchemaVersion = 1;

using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration.

enum class Scheduler { kCoMappo, kCcPpo, kWoa, kRandom };

inline const char* scheduler_name(Scheduler s) {
  switch (s) {
    case Scheduler::kCoMappo: return "comappo";
    case Scheduler::kCcPpo: return "ccppo";
    case Scheduler::kWoa: return "woa";
    case Scheduler::kRandom: return "random";
  }
  return "?";
}

inline Scheduler parse_scheduler(const std::string& s) {
  for (Scheduler v : {Scheduler::kCoMappo, Scheduler::kCcPpo, Scheduler::kWoa, Scheduler::kRandom}) {
    if (s == scheduler_name(v)) return v;
  }
  throw ConfigError("unknown scheduler '" + s + "' (expected comappo, ccppo, woa or random)");
}

inline bool is_learned(Scheduler s) { return s == Scheduler::kCoMappo || s == Scheduler::kCcPpo; }

enum class SweepAxis { kSubtaskCount, kMemoryRange, kComputeRange, kAlpha };

inline const char* axis_name(SweepAxis a) {
  switch (a) {
    case SweepAxis::kSubtaskCount: return "subtask_count";
    case SweepAxis::kMemoryRange: return "memory_range";
    case SweepAxis::kComputeRange: return "compute_range";
    case SweepAxis::kAlpha: return "alpha";
  }
  return "?";
}

inline SweepAxis parse_axis(const std::string& s) {
  for (SweepAxis v : {SweepAxis::kSubtaskCount, SweepAxis::kMemoryRange, SweepAxis::kComputeRange, SweepAxis::kAlpha}) {
    if (s == axis_name(v)) return v;
  }
  throw ConfigError("unknown sweep axis '" + s + "'");
}

using Range = std::array<double, 2>;

struct SweepConfig {
  SweepAxis axis = SweepAxis::kSubtaskCount;
  std::vector<double> subtask_counts{500, 1000, 1500, 2000};
  double subtask_divisor = 10.0;  // 1 runs the full-scale counts
  std::vector<Range> memory_ranges{{10, 30}, {30, 50}, {50, 70}, {70, 90}};
  std::vector<Range> compute_ranges{{15, 25}, {25, 35}, {35, 50}, {50, 70}};
  std::vector<double> alphas{0.3, 0.5, 0.7};

  int point_count() const {
    switch (axis) {
      case SweepAxis::kSubtaskCount: return static_cast<int>(subtask_counts.size());
      case SweepAxis::kMemoryRange: return static_cast<int>(memory_ranges.size());
      case SweepAxis::kComputeRange: return static_cast<int>(compute_ranges.size());
      case SweepAxis::kAlpha: return static_cast<int>(alphas.size());
    }
    return 0;
  }

  void validate() const {
    if (!(subtask_divisor > 0.0)) throw ConfigError("sweep: subtask_divisor must be positive");
    for (double v : subtask_counts) {
      if (!(v > 0.0)) throw ConfigError("sweep: subtask_counts must be positive");
    }
    for (const auto& r : memory_ranges) {
      if (!(r[0] > 0.0 && r[1] >= r[0])) throw ConfigError("sweep: memory range must satisfy 0 < lo <= hi");
    }
    for (const auto& r : compute_ranges) {
      if (!(r[0] > 0.0 && r[1] >= r[0])) throw ConfigError("sweep: compute range must satisfy 0 < lo <= hi");
    }
    for (double a : alphas) {
      if (!(a > 0.0 && a < 1.0)) throw ConfigError("sweep: alpha values must lie in (0, 1)");
    }
  }
};

struct ExperimentConfig {
  ScenarioConfig scenario;
  EnvConfig env;
  Profile profile = Profile::kTest;
  Scheduler scheduler = Scheduler::kCoMappo;
  std::vector<Scheduler> schedulers{Scheduler::kCoMappo, Scheduler::kCcPpo, Scheduler::kWoa, Scheduler::kRandom};
  std::vector<std::uint64_t> seeds{1};
  int episodes = 0;  // 0 takes the profile budget
  PpoHyper hyper;
  bool team_reward = false;
  bool resume = false;
  WoaConfig woa;
  int eval_episodes = 1;
  bool ablation_no_convex = false;
  SweepConfig sweep;
  std::string out = "out";

  void validate() const {
    scenario.validate();
    env.validate();
    if (std::abs(env.weights.time + env.weights.price - 1.0) > 1e-9) {
      throw ConfigError("weights: alpha_time + alpha_price must equal 1");
    }
    if (seeds.empty()) throw ConfigError("seeds must not be empty");
    if (schedulers.empty()) throw ConfigError("schedulers must not be empty");
    if (episodes < 0) throw ConfigError("episodes must be non-negative");
    if (eval_episodes < 1) throw ConfigError("eval_episodes must be at least 1");
    hyper.validate();
    woa.validate();
    sweep.validate();
  }

  TrainConfig train_config(Scheduler s, std::uint64_t seed) const {
    TrainConfig t = train_config_for(profile);
    t.mode = s == Scheduler::kCcPpo ? TrainMode::kCentral : TrainMode::kCoMappo;
    t.hyper = hyper;
    if (episodes > 0) t.episodes = episodes;
    t.seed = seed;
    t.team_reward = team_reward;
    t.learned_shares = ablation_no_convex;
    return t;
  }
};

/// Defaults of the desk-scale toy family: 1 LMS, 3 CubeSats, 20 CTEs.
inline ExperimentConfig toy_experiment_config() {
  ExperimentConfig c;
  c.scenario = toy_scenario_config();
  return c;
}

// JSON mapping. One visitor describes every key for both directions.

namespace detail {

class JsonIn {
 public:
  JsonIn(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  template <class T>
  void field(const char* key, T& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    read(j_.at(key), out, path_ + "." + key);
  }

  template <class F>
  void group(const char* key, F&& body) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    JsonIn child(j_.at(key), path_ + "." + key);
    body(child);
    child.finish();
  }

  /// Marks a key as handled outside the visitor.
  void accept(const char* key) { seen_.insert(key); }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError("unknown key " + path_ + "." + k);
    }
  }

 private:
  std::string where() const { return path_; }

  template <class T>
  static void read(const Json& v, T& out, const std::string& path) {
    try {
      if constexpr (std::is_same_v<T, Scheduler>) {
        out = parse_scheduler(v.get<std::string>());
      } else if constexpr (std::is_same_v<T, std::vector<Scheduler>>) {
        out.clear();
        for (const auto& e : v) out.push_back(parse_scheduler(e.get<std::string>()));
      } else if constexpr (std::is_same_v<T, Profile>) {
        out = parse_profile(v.get<std::string>());
      } else if constexpr (std::is_same_v<T, SweepAxis>) {
        out = parse_axis(v.get<std::string>());
      } else if constexpr (std::is_same_v<T, CapacityFeature>) {
        const auto s = v.get<std::string>();
        if (s == "remaining_compute") {
          out = CapacityFeature::kRemainingCompute;
        } else if (s == "remaining_bandwidth") {
          out = CapacityFeature::kRemainingBandwidth;
        } else {
          throw ConfigError("unknown capacity feature '" + s + "'");
        }
      } else if constexpr (std::is_same_v<T, int>) {
        if (!v.is_number_integer()) throw ConfigError("expected an integer");
        out = v.get<int>();
      } else if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw ConfigError("expected a number");
        out = v.get<double>();
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError("expected true or false");
        out = v.get<bool>();
      } else {
        out = v.get<T>();
      }
    } catch (const ConfigError& e) {
      throw ConfigError(path + ": " + e.what());
    } catch (const Json::exception& e) {
      throw ConfigError(path + ": " + e.what());
    }
  }

  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

class JsonOut {
 public:
  explicit JsonOut(Json& j) : j_(j) { j_ = Json::object(); }

  template <class T>
  void field(const char* key, const T& v) {
    if constexpr (std::is_same_v<T, Scheduler>) {
      j_[key] = scheduler_name(v);
    } else if constexpr (std::is_same_v<T, std::vector<Scheduler>>) {
      Json a = Json::array();
      for (Scheduler s : v) a.push_back(scheduler_name(s));
      j_[key] = a;
    } else if constexpr (std::is_same_v<T, Profile>) {
      j_[key] = profile_name(v);
    } else if constexpr (std::is_same_v<T, SweepAxis>) {
      j_[key] = axis_name(v);
    } else if constexpr (std::is_same_v<T, CapacityFeature>) {
      j_[key] = v == CapacityFeature::kRemainingCompute ? "remaining_compute" : "remaining_bandwidth";
    } else {
      j_[key] = v;
    }
  }

  template <class F>
  void group(const char* key, F&& body) {
    Json child;
    JsonOut out(child);
    body(out);
    j_[key] = child;
  }

 private:
  Json& j_;
};

template <class V, class L>
void visit_layer(V& v, L& p) {
  v.field("count", p.count);
  v.field("altitude_km", p.altitude_km);
  v.field("bandwidth_hz", p.bandwidth_hz);
  v.field("compute_per_processor", p.compute_per_processor);
  v.field("processor_count", p.processor_count);
  v.field("comm_unit_price", p.comm_unit_price);
  v.field("compute_unit_price", p.compute_unit_price);
  v.field("footprint_radius_km", p.footprint_radius_km);
}

template <class V, class C>
void visit_config(V& v, C& c) {
  v.group("scenario", [&](auto& s) {
    auto& sc = c.scenario;
    s.field("region_area_km2", sc.region_area_km2);
    s.field("cte_count", sc.cte_count);
    s.field("poisson_cte_count", sc.poisson_cte_count);
    s.field("task_count", sc.task_count);
    s.field("subtasks_per_task", sc.subtasks_per_task);
    s.field("memory_range_mb", sc.memory_range_mb);
    s.field("compute_range_gigacycles", sc.compute_range_gigacycles);
    s.field("transmit_power_mw", sc.transmit_power_mw);
    s.field("channel_gain_db", sc.channel_gain_db);
    s.field("noise_mw", sc.noise_mw);
    s.field("slot_seconds", sc.slot_seconds);
    s.field("horizon_slots", sc.horizon_slots);
    s.field("arrival_span_slots", sc.arrival_span_slots);
    s.field("approach_lead_slots", sc.approach_lead_slots);
    s.field("min_cubesats_per_cte", sc.min_cubesats_per_cte);
    s.field("max_generation_retries", sc.max_generation_retries);
    s.group("cns", [&](auto& l) { visit_layer(l, sc.cns); });
    s.group("lms", [&](auto& l) { visit_layer(l, sc.lms); });
    s.group("cubesat", [&](auto& l) { visit_layer(l, sc.cubesat); });
  });
  v.group("env", [&](auto& e) {
    auto& ec = c.env;
    e.field("alpha_time", ec.weights.time);
    e.field("alpha_price", ec.weights.price);
    e.field("success_scale", ec.success_scale);
    e.field("failure_penalty", ec.failure_penalty);
    e.field("bandwidth_threshold", ec.thresholds.bandwidth);
    e.field("compute_threshold", ec.thresholds.compute);
    e.field("capacity_feature", ec.capacity_feature);
    e.field("learned_cns_rate", ec.learned_cns_rate);
  });
  v.field("profile", c.profile);
  v.field("scheduler", c.scheduler);
  v.field("schedulers", c.schedulers);
  v.field("seeds", c.seeds);
  v.field("episodes", c.episodes);
  v.group("ppo", [&](auto& p) {
    auto& h = c.hyper;
    p.field("clip", h.clip);
    p.field("gamma", h.gamma);
    p.field("lambda", h.lambda);
    p.field("epochs", h.epochs);
    p.field("learning_rate", h.learning_rate);
    p.field("pool_capacity", h.pool_capacity);
    p.field("minibatch", h.minibatch);
    p.field("episodes_per_update", h.episodes_per_update);
    p.field("entropy_coef", h.entropy_coef);
    p.field("max_grad_norm", h.max_grad_norm);
    p.field("normalize_advantages", h.normalize_advantages);
  });
  v.field("team_reward", c.team_reward);
  v.field("resume", c.resume);
  v.group("woa", [&](auto& w) {
    w.field("population", c.woa.population);
    w.field("budget", c.woa.budget);
    w.field("spiral", c.woa.spiral);
  });
  v.field("eval_episodes", c.eval_episodes);
  v.field("ablation_no_convex", c.ablation_no_convex);
  v.group("sweep", [&](auto& s) {
    s.field("axis", c.sweep.axis);
    s.field("subtask_counts", c.sweep.subtask_counts);
    s.field("subtask_divisor", c.sweep.subtask_divisor);
    s.field("memory_ranges", c.sweep.memory_ranges);
    s.field("compute_ranges", c.sweep.compute_ranges);
    s.field("alphas", c.sweep.alphas);
  });
  v.field("out", c.out);
}

}  // namespace detail

inline Json config_to_json(const ExperimentConfig& c) {
  Json j;
  detail::JsonOut out(j);
  detail::visit_config(out, c);
  j["version"] = kConfigSchemaVersion;
  return j;
}

/// Strict parse: unknown keys, wrong types and invalid values are errors.
/// Keys left out keep their defaults.
inline ExperimentConfig config_from_json(const Json& j, ExperimentConfig base = {}) {
  detail::JsonIn in(j, "config");
  if (j.contains("version")) {
    in.accept("version");
    if (!j.at("version").is_number_integer() || j.at("version").get<int>() != kConfigSchemaVersion) {
      throw ConfigError("config.version: unsupported schema version (expected " +
                        std::to_string(kConfigSchemaVersion) + ")");
    }
  }
  detail::visit_config(in, base);
  in.finish();
  base.validate();
  return base;
}

inline ExperimentConfig load_config(const std::string& path, ExperimentConfig base = {}) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path);
  Json j;
  try {
    j = Json::parse(is);
  } catch (const Json::exception& e) {
    throw ConfigError("malformed config file " + path + ": " + e.what());
  }
  return config_from_json(j, std::move(base));
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Hash of the canonical JSON form (keys sorted).
inline std::string config_hash(const ExperimentConfig& c) { return hex64(fnv1a(config_to_json(c).dump())); }

// ---------------------------------------------------------------------------
// Scenario files.

inline Json scenario_to_json(const Scenario& sc) {
  Json j;
  j["seed"] = sc.seed;
  ExperimentConfig holder;
  holder.scenario = sc.config;
  j["config"] = config_to_json(holder)["scenario"];
  Json sats = Json::array();
  for (const auto& s : sc.satellites) {
    sats.push_back({{"id", s.id},
                    {"layer", layer_name(s.layer)},
                    {"altitude_km", s.altitude_km},
                    {"bandwidth_hz", s.bandwidth_hz},
                    {"compute_per_processor", s.compute_per_processor},
                    {"processor_count", s.processor_count},
                    {"comm_unit_price", s.comm_unit_price},
                    {"compute_unit_price", s.compute_unit_price},
                    {"footprint_radius_km", s.footprint_radius_km},
                    {"track",
                     {{"origin", {s.track.origin.x, s.track.origin.y}},
                      {"heading_rad", s.track.heading_rad},
                      {"speed_km_s", s.track.speed_km_s},
                      {"period_s", s.track.period_s}}}});
  }
  j["satellites"] = sats;
  Json ctes = Json::array();
  for (const auto& c : sc.ctes) {
    ctes.push_back({{"id", c.id},
                    {"position", {c.position.x, c.position.y}},
                    {"transmit_power_mw", c.transmit_power_mw},
                    {"channel_gain_db", c.channel_gain_db},
                    {"cached_memory_mb", c.cached_memory_mb}});
  }
  j["ctes"] = ctes;
  Json tasks = Json::array();
  for (const auto& t : sc.tasks) tasks.push_back({{"id", t.id}, {"arrival_slot", t.arrival_slot}, {"subtasks", t.subtasks}});
  j["tasks"] = tasks;
  Json subs = Json::array();
  for (const auto& st : sc.subtasks) {
    subs.push_back({{"id", st.id},
                    {"task", st.parent_task},
                    {"owner", st.owner},
                    {"memory_mb", st.memory_mb},
                    {"compute_gigacycles", st.compute_gigacycles}});
  }
  j["subtasks"] = subs;
  return j;
}

// ---------------------------------------------------------------------------
// Metrics.

struct Outcome {
  int task = 0;
  int subtask = 0;
  double t_ser_s = 0.0;
  double p_ser = 0.0;
  bool success = false;
  Layer layer = Layer::kCns;      // serving layer; failed sub-tasks fall back to the CNS
  Layer attempted = Layer::kCns;  // layer of the server in X (CNS when none)
  double memory_mb = 0.0;
  double compute_gigacycles = 0.0;
};

/// Charged outcomes of every sub-task after an episode.
inline std::vector<Outcome> outcomes_of(const Environment& env) {
  const Scenario& sc = env.scenario();
  std::vector<Outcome> out;
  for (const auto& r : env.records()) {
    Outcome o;
    o.task = r.task;
    o.subtask = r.subtask;
    o.t_ser_s = r.charged.t_ser_s;
    o.p_ser = r.charged.p_ser;
    o.success = r.success();
    o.attempted = r.server >= 0 ? sc.satellites[r.server].layer : Layer::kCns;
    o.layer = o.success ? o.attempted : Layer::kCns;
    o.memory_mb = sc.subtasks[r.subtask].memory_mb;
    o.compute_gigacycles = sc.subtasks[r.subtask].compute_gigacycles;
    out.push_back(o);
  }
  return out;
}

struct MetricsReport {
  bool empty = true;
  int tasks = 0;
  int subtasks = 0;
  double mst = 0.0;        // eta_1
  double msp = 0.0;        // eta_2
  double objective = 0.0;  // eta
  double success_rate = 0.0;
  std::array<double, kLayerCount> proportions{};  // indexed by Layer
  Weights weights;

  /// Throws unless eta = alpha_1 eta_1 + alpha_2 eta_2 to 1e-12.
  void check_identity() const {
    if (empty) return;
    const double expect = weights.time * mst + weights.price * msp;
    if (std::abs(objective - expect) > 1e-12 * std::max(1.0, std::abs(expect))) {
      throw NumericError("metrics: objective differs from the weighted sum of MST and MSP");
    }
  }
};

/// Per-task means over sub-tasks, then means over tasks. Zero tasks give a
/// report with `empty` set and all values zero.
inline MetricsReport compute_metrics(std::span<const Outcome> outcomes, const Weights& w) {
  MetricsReport r;
  r.weights = w;
  if (outcomes.empty()) return r;
  std::map<int, std::array<double, 3>> per_task;  // sum t, sum p, count
  int successes = 0;
  for (const auto& o : outcomes) {
    auto& acc = per_task[o.task];
    acc[0] += o.t_ser_s;
    acc[1] += o.p_ser;
    acc[2] += 1.0;
    successes += o.success;
    r.proportions[static_cast<int>(o.layer)] += 1.0;
  }
  for (const auto& [task, acc] : per_task) {
    r.mst += acc[0] / acc[2];
    r.msp += acc[1] / acc[2];
  }
  r.empty = false;
  r.tasks = static_cast<int>(per_task.size());
  r.subtasks = static_cast<int>(outcomes.size());
  r.mst /= r.tasks;
  r.msp /= r.tasks;
  r.objective = w.time * r.mst + w.price * r.msp;
  r.success_rate = static_cast<double>(successes) / r.subtasks;
  for (double& p : r.proportions) p /= r.subtasks;
  r.check_identity();
  return r;
}

/// Mean of several reports (one per evaluation episode).
inline MetricsReport mean_report(std::span<const MetricsReport> reports) {
  if (reports.empty()) return {};
  MetricsReport m = reports.front();
  if (m.empty) return m;
  m.mst = m.msp = m.success_rate = 0.0;
  m.proportions = {};
  for (const auto& r : reports) {
    m.mst += r.mst;
    m.msp += r.msp;
    m.success_rate += r.success_rate;
    for (int l = 0; l < kLayerCount; ++l) m.proportions[l] += r.proportions[l];
  }
  const double n = static_cast<double>(reports.size());
  m.mst /= n;
  m.msp /= n;
  m.success_rate /= n;
  for (double& p : m.proportions) p /= n;
  m.objective = m.weights.time * m.mst + m.weights.price * m.msp;
  m.check_identity();
  return m;
}

struct Summary {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation, 0 for one value
  int n = 0;
};

inline Summary summarize(std::span<const double> v) {
  Summary s;
  s.n = static_cast<int>(v.size());
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= s.n;
  if (s.n > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / (s.n - 1));
  }
  return s;
}

/// Server-layer shares per demand bin. `edges` has bins+1 ascending values;
/// a sub-task falls in bin k when edges[k] <= demand < edges[k+1] (the last
/// bin includes its upper edge).
struct ProportionBin {
  double lo = 0.0;
  double hi = 0.0;
  int count = 0;
  std::array<double, kLayerCount> shares{};
};

inline std::vector<ProportionBin> layer_shares_by_bin(std::span<const Outcome> outcomes, bool by_memory,
                                                      std::span<const double> edges) {
  if (edges.size() < 2) throw DomainError("layer_shares_by_bin: need at least two edges");
  std::vector<ProportionBin> bins(edges.size() - 1);
  for (size_t k = 0; k + 1 < edges.size(); ++k) {
    if (!(edges[k + 1] > edges[k])) throw DomainError("layer_shares_by_bin: edges must increase");
    bins[k].lo = edges[k];
    bins[k].hi = edges[k + 1];
  }
  for (const auto& o : outcomes) {
    const double d = by_memory ? o.memory_mb : o.compute_gigacycles;
    for (size_t k = 0; k < bins.size(); ++k) {
      const bool last = k + 1 == bins.size();
      if (d >= bins[k].lo && (d < bins[k].hi || (last && d == bins[k].hi))) {
        ++bins[k].count;
        bins[k].shares[static_cast<int>(o.layer)] += 1.0;
        break;
      }
    }
  }
  for (auto& b : bins) {
    if (b.count > 0) {
      for (double& s : b.shares) s /= b.count;
    }
  }
  return bins;
}

// ---------------------------------------------------------------------------
// Evaluation.

struct Evaluation {
  Scheduler scheduler = Scheduler::kCoMappo;
  std::uint64_t seed = 0;
  MetricsReport report;
  std::vector<Outcome> outcomes;  // last evaluation episode
  std::vector<TrajectoryRow> trajectory;
  std::vector<CurveRow> curve;
  std::vector<double> episode_rewards;
};

/// Trains learned schedulers on the scenario (resuming from `checkpoint`
/// when the config asks for it and the file exists), then evaluates
/// greedily. WOA and Random-X are averaged over `eval_episodes` episodes.
inline Evaluation evaluate(const Scenario& sc, const ExperimentConfig& cfg, Scheduler s, std::uint64_t seed,
                           const std::string& checkpoint = "") {
  Evaluation ev;
  ev.scheduler = s;
  ev.seed = seed;
  Environment env(sc, cfg.env);
  std::mt19937_64 rng(seed ^ 0x5eed5eedULL);
  std::vector<MetricsReport> reports;
  if (is_learned(s)) {
    TrainConfig tc = cfg.train_config(s, seed);
    tc.checkpoint_path = checkpoint;
    Trainer trainer(sc, cfg.env, tc);
    if (cfg.resume && !checkpoint.empty() && std::filesystem::exists(checkpoint)) trainer.load(checkpoint);
    trainer.run();
    ev.curve = trainer.curve();
    ev.episode_rewards = trainer.episode_rewards();
    run_episode(trainer.learner(), env, hook_for(tc, cfg.env), true, rng);
    ev.outcomes = outcomes_of(env);
    ev.trajectory = env.trajectory();
    reports.push_back(compute_metrics(ev.outcomes, cfg.env.weights));
  } else {
    for (int e = 0; e < cfg.eval_episodes; ++e) {
      env.reset(static_cast<std::uint64_t>(e));
      while (!env.done()) {
        const JointDecision d = s == Scheduler::kWoa ? woa_schedule(env, cfg.woa, rng) : random_x(env, rng);
        env.step(d.actions);
      }
      ev.outcomes = outcomes_of(env);
      ev.trajectory = env.trajectory();
      reports.push_back(compute_metrics(ev.outcomes, cfg.env.weights));
    }
  }
  ev.report = mean_report(reports);
  return ev;
}

// ---------------------------------------------------------------------------
// Sweeps.

/// Worker count from SATOFFLOAD_WORKERS (default 1).
inline int worker_count() {
  const char* v = std::getenv("SATOFFLOAD_WORKERS");
  if (!v || !*v) return 1;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 1 || n > 1024) {
    throw ConfigError(std::string("SATOFFLOAD_WORKERS must be an integer in [1, 1024], got '") + v + "'");
  }
  return static_cast<int>(n);
}

/// Runs job(i) for i in [0, n) on up to `workers` threads.
template <class F>
void parallel_for(int n, int workers, F&& job) {
  workers = std::max(1, std::min(workers, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (int i = next++; i < n; i = next++) job(i);
    });
  }
  for (auto& t : pool) t.join();
}

struct SweepPoint {
  std::string label;
  double value = 0.0;
  ExperimentConfig config;
};

inline std::string range_label(const Range& r) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g-%g", r[0], r[1]);
  return buf;
}

/// Configurations of every point along the sweep axis.
inline std::vector<SweepPoint> sweep_points(const ExperimentConfig& cfg) {
  std::vector<SweepPoint> out;
  const SweepConfig& sw = cfg.sweep;
  for (int i = 0; i < sw.point_count(); ++i) {
    SweepPoint p;
    p.config = cfg;
    char buf[64];
    switch (sw.axis) {
      case SweepAxis::kSubtaskCount: {
        const double target = sw.subtask_counts[i] / sw.subtask_divisor;
        const int per = cfg.scenario.subtasks_per_task;
        p.config.scenario.task_count = std::max(1, static_cast<int>(std::lround(target / per)));
        p.value = static_cast<double>(p.config.scenario.task_count * per);
        std::snprintf(buf, sizeof buf, "%g", p.value);
        p.label = buf;
        break;
      }
      case SweepAxis::kMemoryRange:
        p.config.scenario.memory_range_mb = sw.memory_ranges[i];
        p.value = 0.5 * (sw.memory_ranges[i][0] + sw.memory_ranges[i][1]);
        p.label = range_label(sw.memory_ranges[i]);
        break;
      case SweepAxis::kComputeRange:
        p.config.scenario.compute_range_gigacycles = sw.compute_ranges[i];
        p.value = 0.5 * (sw.compute_ranges[i][0] + sw.compute_ranges[i][1]);
        p.label = range_label(sw.compute_ranges[i]);
        break;
      case SweepAxis::kAlpha:
        p.config.env.weights = Weights{sw.alphas[i], 1.0 - sw.alphas[i]};
        p.value = sw.alphas[i];
        std::snprintf(buf, sizeof buf, "%g", p.value);
        p.label = buf;
        break;
    }
    out.push_back(std::move(p));
  }
  return out;
}

struct SweepRow {
  std::string axis;
  std::string label;
  double value = 0.0;
  Scheduler scheduler = Scheduler::kCoMappo;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
  MetricsReport report;
};

/// One row per point x scheduler x seed, in that nesting order. A failure
/// at one row is recorded and the sweep continues.
inline std::vector<SweepRow> run_points(const std::vector<SweepPoint>& points, const std::string& axis,
                                        std::span<const Scheduler> schedulers, std::span<const std::uint64_t> seeds,
                                        int workers) {
  std::vector<SweepRow> rows;
  for (const auto& p : points) {
    for (Scheduler s : schedulers) {
      for (std::uint64_t seed : seeds) rows.push_back({axis, p.label, p.value, s, seed, false, "", {}});
    }
  }
  const size_t per_point = schedulers.size() * seeds.size();
  parallel_for(static_cast<int>(rows.size()), workers, [&](int i) {
    SweepRow& row = rows[i];
    const ExperimentConfig& cfg = points[i / per_point].config;
    try {
      cfg.validate();
      const Scenario sc = generate_scenario(cfg.scenario, row.seed);
      row.report = evaluate(sc, cfg, row.scheduler, row.seed).report;
    } catch (const std::exception& e) {
      row.failed = true;
      row.error = e.what();
    }
  });
  return rows;
}

inline std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg, int workers = 1) {
  return run_points(sweep_points(cfg), axis_name(cfg.sweep.axis), cfg.schedulers, cfg.seeds, workers);
}

/// Sweep over the alpha grid of the config (sweep.alphas).
inline std::vector<SweepRow> alpha_tradeoff(ExperimentConfig cfg, int workers = 1) {
  cfg.sweep.axis = SweepAxis::kAlpha;
  return run_sweep(cfg, workers);
}

/// Closed-form allocation versus learned shares. Learned schedulers run in
/// both variants; WOA and Random-X only with the closed forms.
inline std::vector<SweepRow> run_ablation(const ExperimentConfig& cfg, int workers = 1) {
  SweepPoint closed{"closed_form", 0.0, cfg}, learned{"learned_shares", 1.0, cfg};
  closed.config.ablation_no_convex = false;
  learned.config.ablation_no_convex = true;
  std::vector<Scheduler> learners;
  for (Scheduler s : cfg.schedulers) {
    if (is_learned(s)) learners.push_back(s);
  }
  std::vector<SweepRow> rows = run_points({closed}, "allocation", cfg.schedulers, cfg.seeds, workers);
  if (!learners.empty()) {
    const auto more = run_points({learned}, "allocation", learners, cfg.seeds, workers);
    rows.insert(rows.end(), more.begin(), more.end());
  }
  return rows;
}

// ---------------------------------------------------------------------------
// CSV and manifest output.

inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline void write_metrics_header(std::ostream& os) {
  os << "axis,axis_label,axis_value,scheduler,seed,status,mst,msp,objective,success_rate,"
        "prop_cns,prop_lms,prop_cubesat,tasks,subtasks\n";
}

inline void write_metrics_row(std::ostream& os, const SweepRow& r) {
  const MetricsReport& m = r.report;
  const char* status = r.failed ? "failed" : (m.empty ? "empty" : "ok");
  os << r.axis << ',' << r.label << ',' << fmt(r.value) << ',' << scheduler_name(r.scheduler) << ',' << r.seed << ','
     << status << ',' << fmt(m.mst) << ',' << fmt(m.msp) << ',' << fmt(m.objective) << ',' << fmt(m.success_rate)
     << ',' << fmt(m.proportions[0]) << ',' << fmt(m.proportions[1]) << ',' << fmt(m.proportions[2]) << ','
     << m.tasks << ',' << m.subtasks << '\n';
}

inline void write_sweep_csv(std::ostream& os, std::span<const SweepRow> rows) {
  write_metrics_header(os);
  for (const auto& r : rows) write_metrics_row(os, r);
}

inline void write_outcomes_csv(std::ostream& os, std::span<const Outcome> rows) {
  os << "task,subtask,layer,attempted_layer,memory_mb,compute_gigacycles,t_ser_s,p_ser,success\n";
  for (const auto& o : rows) {
    os << o.task << ',' << o.subtask << ',' << layer_name(o.layer) << ',' << layer_name(o.attempted) << ','
       << fmt(o.memory_mb) << ',' << fmt(o.compute_gigacycles) << ',' << fmt(o.t_ser_s) << ',' << fmt(o.p_ser) << ','
       << (o.success ? 1 : 0) << '\n';
  }
}

inline void write_proportions_csv(std::ostream& os, const std::string& demand, std::span<const ProportionBin> bins) {
  os << "demand,bin_lo,bin_hi,count,share_cns,share_lms,share_cubesat\n";
  for (const auto& b : bins) {
    os << demand << ',' << fmt(b.lo) << ',' << fmt(b.hi) << ',' << b.count << ',' << fmt(b.shares[0]) << ','
       << fmt(b.shares[1]) << ',' << fmt(b.shares[2]) << '\n';
  }
}

struct Manifest {
  std::string command;
  ExperimentConfig config;
  std::vector<std::string> outputs;
  int workers = 1;

  Json to_json() const {
    Json j;
    j["tool"] = "satoffload";
    j["version"] = kVersion;
    j["command"] = command;
    j["config_hash"] = config_hash(config);
    j["config"] = config_to_json(config);
    j["seeds"] = config.seeds;
    j["workers"] = workers;
    j["outputs"] = outputs;
    j["versions"] = {{"compiler", __VERSION__},
                     {"cplusplus", static_cast<long>(__cplusplus)},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)},
                     {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                           std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                           std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
    return j;
  }
};

}  // namespace satoffload

#endif  // SATOFFLOAD_HARNESS_HPP_
