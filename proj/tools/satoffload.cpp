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

// Command-line front end: scenario generation, training, evaluation, sweeps
// and the allocator verification suite.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "satoffload/allocator_oracle.hpp"
#include "satoffload/harness.hpp"

namespace fs = std::filesystem;
using namespace satoffload;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> profile;
  std::optional<std::string> scheduler;
  bool ablation_no_convex = false;
  std::optional<std::string> out;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

ExperimentConfig resolve_config(const Options& o) {
  ExperimentConfig c;
  if (!o.config_path.empty()) {
    if (!fs::exists(o.config_path)) throw UsageError("config file not found: " + o.config_path);
    c = load_config(o.config_path);
  }
  if (o.seed) c.seeds = {*o.seed};
  if (o.profile) c.profile = parse_profile(*o.profile);
  if (o.scheduler) {
    c.scheduler = parse_scheduler(*o.scheduler);
    c.schedulers = {c.scheduler};
  }
  if (o.ablation_no_convex) c.ablation_no_convex = true;
  if (o.out) c.out = *o.out;
  c.validate();
  return c;
}

class Output {
 public:
  Output(const std::string& command, const ExperimentConfig& cfg, int workers) {
    manifest_.command = command;
    manifest_.config = cfg;
    manifest_.workers = workers;
    dir_ = cfg.out;
    fs::create_directories(dir_);
  }

  std::string path(const std::string& name) {
    manifest_.outputs.push_back(name);
    return (dir_ / name).string();
  }

  template <class F>
  void write(const std::string& name, F&& body) {
    const std::string p = path(name);
    std::ofstream os(p, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + p);
    body(os);
    if (!os) throw std::runtime_error("failed writing " + p);
  }

  void finish() {
    std::ofstream os(dir_ / "manifest.json");
    os << manifest_.to_json().dump(2) << '\n';
  }

 private:
  Manifest manifest_;
  fs::path dir_;
};

std::string tag(Scheduler s, std::uint64_t seed) { return std::string(scheduler_name(s)) + "_" + std::to_string(seed); }

int cmd_generate(const ExperimentConfig& cfg, int workers) {
  Output out("generate", cfg, workers);
  for (std::uint64_t seed : cfg.seeds) {
    const Scenario sc = generate_scenario(cfg.scenario, seed);
    out.write("scenario_" + std::to_string(seed) + ".json", [&](std::ostream& os) {
      os << scenario_to_json(sc).dump(2) << '\n';
    });
    std::cout << "scenario seed " << seed << ": " << sc.satellites.size() << " satellites, " << sc.ctes.size()
              << " CTEs, " << sc.subtasks.size() << " sub-tasks\n";
  }
  out.finish();
  return kExitOk;
}

int cmd_train(const ExperimentConfig& cfg, int workers) {
  if (!is_learned(cfg.scheduler)) throw UsageError("train needs a learning scheduler (comappo or ccppo)");
  Output out("train", cfg, workers);
  for (std::uint64_t seed : cfg.seeds) {
    const Scenario sc = generate_scenario(cfg.scenario, seed);
    TrainConfig tc = cfg.train_config(cfg.scheduler, seed);
    tc.checkpoint_path = out.path("checkpoint_" + tag(cfg.scheduler, seed) + ".bin");
    Trainer trainer(sc, cfg.env, tc);
    if (cfg.resume && fs::exists(tc.checkpoint_path)) trainer.load(tc.checkpoint_path);
    trainer.run();
    out.write("learning_curve_" + tag(cfg.scheduler, seed) + ".csv",
              [&](std::ostream& os) { write_learning_curve_csv(os, trainer.curve()); });
    const auto& r = trainer.episode_rewards();
    std::cout << scheduler_name(cfg.scheduler) << " seed " << seed << ": " << trainer.episodes_done()
              << " episodes, " << trainer.updates() << " updates";
    if (!r.empty()) std::cout << ", last episode reward " << fmt(r.back());
    std::cout << '\n';
  }
  out.finish();
  return kExitOk;
}

int cmd_evaluate(const ExperimentConfig& cfg, int workers) {
  Output out("evaluate", cfg, workers);
  std::vector<SweepRow> rows;
  const std::vector<double> memory_edges{10, 30, 50, 70, 90};
  const std::vector<double> compute_edges{15, 25, 35, 50, 70};
  for (std::uint64_t seed : cfg.seeds) {
    const Scenario sc = generate_scenario(cfg.scenario, seed);
    const std::string t = tag(cfg.scheduler, seed);
    const std::string ckpt = is_learned(cfg.scheduler) ? out.path("checkpoint_" + t + ".bin") : "";
    const Evaluation ev = evaluate(sc, cfg, cfg.scheduler, seed, ckpt);
    rows.push_back({"seed", std::to_string(seed), static_cast<double>(seed), cfg.scheduler, seed, false, "", ev.report});
    out.write("outcomes_" + t + ".csv", [&](std::ostream& os) { write_outcomes_csv(os, ev.outcomes); });
    out.write("trajectory_" + t + ".csv", [&](std::ostream& os) { write_trajectory_csv(os, ev.trajectory); });
    out.write("proportions_" + t + ".csv", [&](std::ostream& os) {
      write_proportions_csv(os, "memory_mb", layer_shares_by_bin(ev.outcomes, true, memory_edges));
      const auto bins = layer_shares_by_bin(ev.outcomes, false, compute_edges);
      for (const auto& b : bins) {
        os << "compute_gigacycles," << fmt(b.lo) << ',' << fmt(b.hi) << ',' << b.count << ',' << fmt(b.shares[0])
           << ',' << fmt(b.shares[1]) << ',' << fmt(b.shares[2]) << '\n';
      }
    });
    if (!ev.curve.empty()) {
      out.write("learning_curve_" + t + ".csv", [&](std::ostream& os) { write_learning_curve_csv(os, ev.curve); });
    }
    std::cout << scheduler_name(cfg.scheduler) << " seed " << seed << ": objective " << fmt(ev.report.objective)
              << " mst " << fmt(ev.report.mst) << " msp " << fmt(ev.report.msp) << " success "
              << fmt(ev.report.success_rate) << '\n';
  }
  out.write("metrics.csv", [&](std::ostream& os) { write_sweep_csv(os, rows); });
  out.finish();
  return kExitOk;
}

int report_rows(const std::vector<SweepRow>& rows) {
  int failed = 0;
  for (const auto& r : rows) {
    if (r.failed) {
      ++failed;
      std::cerr << "point " << r.label << " " << scheduler_name(r.scheduler) << " seed " << r.seed
                << " failed: " << r.error << '\n';
    }
  }
  std::cout << rows.size() << " rows, " << failed << " failed\n";
  return kExitOk;
}

int cmd_sweep(const ExperimentConfig& cfg, int workers) {
  Output out("sweep", cfg, workers);
  const auto rows = run_sweep(cfg, workers);
  out.write("sweep_" + std::string(axis_name(cfg.sweep.axis)) + ".csv",
            [&](std::ostream& os) { write_sweep_csv(os, rows); });
  out.finish();
  return report_rows(rows);
}

int cmd_alpha_sweep(const ExperimentConfig& cfg, int workers) {
  Output out("alpha-sweep", cfg, workers);
  const auto rows = alpha_tradeoff(cfg, workers);
  out.write("alpha_sweep.csv", [&](std::ostream& os) { write_sweep_csv(os, rows); });
  out.finish();
  return report_rows(rows);
}

int cmd_ablation(const ExperimentConfig& cfg, int workers) {
  Output out("ablation", cfg, workers);
  const auto rows = run_ablation(cfg, workers);
  out.write("ablation.csv", [&](std::ostream& os) { write_sweep_csv(os, rows); });
  out.finish();
  return report_rows(rows);
}

int cmd_verify_allocator(const ExperimentConfig& cfg, int workers) {
  Output out("verify-allocator", cfg, workers);
  const AllocatorVerification v = verify_allocator(cfg.seeds.front());
  out.write("verify_allocator.csv", [&](std::ostream& os) {
    os << "check,passed,failed,worst\n";
    for (const auto& c : v.checks) os << c.name << ',' << c.passed << ',' << c.failed << ',' << fmt(c.worst) << '\n';
  });
  out.finish();
  for (const auto& c : v.checks) {
    std::cout << (c.failed == 0 ? "PASS " : "FAIL ") << c.name << ": " << c.passed << " passed, " << c.failed
              << " failed, worst " << fmt(c.worst) << '\n';
  }
  std::cout << "total: " << v.passed() << " passed, " << v.failed() << " failed\n";
  return v.failed() == 0 ? kExitOk : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Satellite edge-computing offloading: scenarios, training, evaluation and sweeps"};
  app.require_subcommand(1);
  Options o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "JSON experiment config");
    sub->add_option("--seed", o.seed, "Run a single seed");
    sub->add_option("--profile", o.profile, "Network and episode profile")->check(CLI::IsMember({"test", "paper"}));
    sub->add_option("--scheduler", o.scheduler, "Scheduler")
        ->check(CLI::IsMember({"comappo", "ccppo", "woa", "random"}));
    sub->add_flag("--ablation-no-convex", o.ablation_no_convex, "Learn allocation shares instead of closed forms");
    sub->add_option("--out", o.out, "Output directory");
  };
  struct Command {
    const char* name;
    const char* help;
    int (*run)(const ExperimentConfig&, int);
  };
  const std::vector<Command> commands{
      {"generate", "Write scenario files", cmd_generate},
      {"train", "Train a learning scheduler and write its learning curve and checkpoint", cmd_train},
      {"evaluate", "Train if needed, then evaluate one scheduler", cmd_evaluate},
      {"sweep", "Sweep the configured axis for every scheduler and seed", cmd_sweep},
      {"alpha-sweep", "Sweep the time/price weight", cmd_alpha_sweep},
      {"ablation", "Closed-form allocation versus learned shares", cmd_ablation},
      {"verify-allocator", "Closed forms versus grid oracles", cmd_verify_allocator},
  };
  std::vector<CLI::App*> subs;
  for (const auto& c : commands) {
    subs.push_back(app.add_subcommand(c.name, c.help));
    add_common(subs.back());
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  try {
    const int workers = worker_count();
    const ExperimentConfig cfg = resolve_config(o);
    for (size_t i = 0; i < commands.size(); ++i) {
      if (subs[i]->parsed()) return commands[i].run(cfg, workers);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}
