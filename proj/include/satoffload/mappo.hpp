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

#ifndef SATOFFLOAD_MAPPO_HPP_
#define SATOFFLOAD_MAPPO_HPP_

// Cooperative multi-agent PPO with attention critics.
//
// The trainer works on learning units. In Co-MAPPO every satellite agent is a
// unit with one action head (its menu choice); actors and critics are shared
// by layer class. CC-PPO collapses all agents into a single unit whose
// observation is the concatenation of every agent observation and whose
// action is one categorical over the joint menu choice (one head per agent
// once the joint space exceeds `joint_action_limit`). With learned shares
// (the no-convex ablation) every agent also picks a share level through an
// extra head.
//
// Critic of unit u:  e_u = g(z_u, onehot(a_u)),  psi_u = attention over the
// other units' embeddings,  Q_u = f(e_u, psi_u).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "satoffload/env.hpp"
#include "satoffload/errors.hpp"
#include "satoffload/neural.hpp"

namespace satoffload {

struct PpoHyper {
  double clip = 0.2;
  double gamma = 0.995;
  double lambda = 0.95;
  int epochs = 4;
  double learning_rate = 3e-4;
  int pool_capacity = 10240;
  int minibatch = 1024;
  int episodes_per_update = 4;
  double entropy_coef = 0.01;
  double max_grad_norm = 10.0;
  bool normalize_advantages = true;

  void validate() const {
    if (!(clip > 0.0 && clip < 1.0)) throw ConfigError("ppo: clip must lie in (0, 1)");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("ppo: gamma must lie in [0, 1)");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("ppo: lambda must lie in [0, 1]");
    if (epochs < 1) throw ConfigError("ppo: epochs must be at least 1");
    if (!(learning_rate > 0.0)) throw ConfigError("ppo: learning_rate must be positive");
    if (minibatch < 1 || pool_capacity < minibatch) {
      throw ConfigError("ppo: need 1 <= minibatch <= pool_capacity");
    }
    if (episodes_per_update < 1) throw ConfigError("ppo: episodes_per_update must be at least 1");
    if (!(entropy_coef >= 0.0)) throw ConfigError("ppo: entropy_coef must be non-negative");
  }
};

enum class Profile { kTest, kPaper };

inline Profile parse_profile(const std::string& s) {
  if (s == "test") return Profile::kTest;
  if (s == "paper") return Profile::kPaper;
  throw ConfigError("unknown profile '" + s + "' (expected test or paper)");
}

inline const char* profile_name(Profile p) { return p == Profile::kTest ? "test" : "paper"; }

struct NetworkShape {
  std::vector<int> actor_hidden{32, 32, 32};
  int embed = 32;
  int key = 32;
  int value = 32;
  int critic_hidden = 32;

  static NetworkShape for_profile(Profile p) {
    NetworkShape s;
    if (p == Profile::kPaper) {
      s.actor_hidden = {512, 512, 512};
      s.embed = s.key = s.value = s.critic_hidden = 512;
    }
    return s;
  }
};

enum class TrainMode { kCoMappo, kCentral };

inline const char* train_mode_name(TrainMode m) { return m == TrainMode::kCoMappo ? "comappo" : "ccppo"; }

struct TrainConfig {
  TrainMode mode = TrainMode::kCoMappo;
  NetworkShape net;
  PpoHyper hyper;
  int episodes = 2000;
  std::uint64_t seed = 1;
  bool share_by_class = true;
  bool learned_shares = false;
  bool team_reward = false;  // Co-MAPPO units learn from the slot's summed reward
  int exact_baseline_limit = 64;
  int baseline_samples = 16;
  int joint_action_limit = 4096;
  std::string checkpoint_path;
  int checkpoint_every = 0;  // updates between checkpoints; 0 writes only the final one

  void validate() const {
    hyper.validate();
    if (episodes < 0) throw ConfigError("train: episodes must be non-negative");
    if (net.actor_hidden.empty() || net.embed < 1 || net.key < 1 || net.value < 1 || net.critic_hidden < 1) {
      throw ConfigError("train: network widths must be positive");
    }
    if (baseline_samples < 1) throw ConfigError("train: baseline_samples must be at least 1");
    if (joint_action_limit < 1) throw ConfigError("train: joint_action_limit must be at least 1");
    if (checkpoint_every < 0) throw ConfigError("train: checkpoint_every must be non-negative");
  }
};

inline TrainConfig train_config_for(Profile p) {
  TrainConfig c;
  c.net = NetworkShape::for_profile(p);
  c.episodes = p == Profile::kPaper ? 150000 : 2000;
  return c;
}

// ---------------------------------------------------------------------------
// Advantage estimation.

/// GAE targets: delta(n) = r(n) + gamma Q(n+1) - Q(n) with Q after the last
/// step taken as 0; Qhat(n) = sum_k (gamma lambda)^(k-n) delta(k) + Q(n).
inline std::vector<double> gae_targets(std::span<const double> rewards, std::span<const double> q_old,
                                       double gamma, double lambda) {
  if (rewards.size() != q_old.size()) throw ShapeError("gae_targets: rewards and values differ in length");
  const size_t n = rewards.size();
  std::vector<double> q_hat(n);
  double running = 0.0;
  for (size_t k = n; k-- > 0;) {
    const double next = k + 1 < n ? q_old[k + 1] : 0.0;
    const double delta = rewards[k] + gamma * next - q_old[k];
    running = delta + gamma * lambda * running;
    q_hat[k] = running + q_old[k];
  }
  return q_hat;
}

/// A(n) = Qhat(n) - baseline(n).
inline std::vector<double> gae_advantage(std::span<const double> rewards, std::span<const double> q_old,
                                         std::span<const double> baseline, const PpoHyper& hyper) {
  if (baseline.size() != rewards.size()) throw ShapeError("gae_advantage: baseline length mismatch");
  std::vector<double> a = gae_targets(rewards, q_old, hyper.gamma, hyper.lambda);
  for (size_t i = 0; i < a.size(); ++i) a[i] -= baseline[i];
  return a;
}

/// sum_a' pi(a') Q(a').
inline double counterfactual_baseline(std::span<const double> policy, std::span<const double> q) {
  if (policy.size() != q.size()) throw ShapeError("counterfactual_baseline: policy and Q differ in length");
  double b = 0.0;
  for (size_t i = 0; i < q.size(); ++i) b += policy[i] * q[i];
  return b;
}

inline double counterfactual_advantage(double q_executed, std::span<const double> policy,
                                       std::span<const double> q) {
  return q_executed - counterfactual_baseline(policy, q);
}

/// min(ratio A, clip(ratio, 1 - eps, 1 + eps) A).
inline double clipped_surrogate(double ratio, double advantage, double clip) {
  return std::min(ratio * advantage, std::clamp(ratio, 1.0 - clip, 1.0 + clip) * advantage);
}

// ---------------------------------------------------------------------------
// Experience.

struct UnitSample {
  Observation obs;
  std::vector<double> mask;   // per action column; ones on inactive heads
  std::vector<double> probs;  // behaviour policy per action column
  std::vector<int> actions;   // per head, -1 when the head is inactive
  bool active = false;
  double logp_old = 0.0;
  double reward = 0.0;
  double q_old = 0.0;
  double baseline = 0.0;
  double q_hat = 0.0;
  double advantage = 0.0;
};

struct Sample {
  int episode = 0;
  std::vector<UnitSample> units;
};

/// Minibatch view, one matrix per unit.
struct Batch {
  Eigen::Index rows = 0;
  std::vector<Matrix> obs;
  std::vector<Matrix> mask;
  std::vector<Matrix> onehot;
  std::vector<Matrix> head_active;              // rows x heads
  std::vector<std::vector<std::vector<int>>> actions;  // [unit][head][row], 0 when inactive
  std::vector<Matrix> active;                   // rows x 1
  std::vector<Matrix> logp_old, advantage, q_hat;
};

struct LossStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
};

struct JointDecision {
  std::vector<int> actions;    // menu index per agent, -1 without decision
  std::vector<double> shares;  // per agent, empty unless shares are learned
};

// ---------------------------------------------------------------------------
// Policy and critics.

class Learner {
 public:
  Learner() = default;

  Learner(const Environment& env, const TrainConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {
    cfg_.validate();
    agents_ = env.num_agents();
    if (agents_ < 1) throw ConfigError("train: scenario has no satellite agents");
    std::vector<std::string> layer_names;
    for (int a = 0; a < agents_; ++a) {
      layer_names.push_back(env.agent_layer(a) == Layer::kCubeSat ? "cubesat" : "lms");
    }
    if (cfg_.mode == TrainMode::kCoMappo) {
      units_ = agents_;
      obs_width_ = kObservationWidth;
      head_sizes_.push_back(kMenuSize);
      if (cfg_.learned_shares) head_sizes_.push_back(static_cast<int>(kShareLevels.size()));
      for (int a = 0; a < agents_; ++a) {
        curve_class_of_.push_back(class_index(curve_classes_, layer_names[a]));
        class_of_.push_back(cfg_.share_by_class ? class_index(net_classes_, layer_names[a])
                                                : class_index(net_classes_, "sat" + std::to_string(a)));
      }
    } else {
      units_ = 1;
      obs_width_ = kObservationWidth * agents_;
      const double joint = std::pow(static_cast<double>(kMenuSize), agents_);
      joint_ = joint <= cfg_.joint_action_limit;
      if (joint_) {
        head_sizes_.push_back(static_cast<int>(joint));
      } else {
        for (int a = 0; a < agents_; ++a) head_sizes_.push_back(kMenuSize);
      }
      if (cfg_.learned_shares) {
        for (int a = 0; a < agents_; ++a) head_sizes_.push_back(static_cast<int>(kShareLevels.size()));
      }
      curve_classes_ = {"central"};
      net_classes_ = {"central"};
      curve_class_of_ = {0};
      class_of_ = {0};
    }
    head_offsets_.assign(head_sizes_.size(), 0);
    for (size_t h = 1; h < head_sizes_.size(); ++h) head_offsets_[h] = head_offsets_[h - 1] + head_sizes_[h - 1];
    action_width_ = head_offsets_.back() + head_sizes_.back();

    const NetworkShape& n = cfg_.net;
    for (const auto& name : net_classes_) {
      std::vector<int> widths{obs_width_};
      widths.insert(widths.end(), n.actor_hidden.begin(), n.actor_hidden.end());
      widths.push_back(action_width_);
      actors_.emplace_back(widths, Activation::kRelu, Activation::kLinear, rng_, "actor." + name);
      actors_.back().scale_output_layer(0.01);
      g_.emplace_back(std::vector<int>{obs_width_ + action_width_, n.embed}, Activation::kRelu, Activation::kRelu,
                      rng_, "critic_g." + name);
      f_.emplace_back(std::vector<int>{n.embed + n.value, n.critic_hidden, 1}, Activation::kRelu,
                      Activation::kLinear, rng_, "critic_f." + name);
    }
    attention_ = AttentionHead(n.embed, n.key, n.value, rng_, Activation::kRelu, "critic_attention");
    actor_adam_.learning_rate = cfg_.hyper.learning_rate;
    critic_adam_.learning_rate = cfg_.hyper.learning_rate;
  }

  const TrainConfig& config() const { return cfg_; }
  int agent_count() const { return agents_; }
  int unit_count() const { return units_; }
  int head_count() const { return static_cast<int>(head_sizes_.size()); }
  int head_size(int h) const { return head_sizes_[h]; }
  int action_width() const { return action_width_; }
  int observation_width() const { return obs_width_; }
  const std::vector<std::string>& curve_classes() const { return curve_classes_; }
  int curve_class_of(int unit) const { return curve_class_of_[unit]; }
  int net_class_of(int unit) const { return class_of_[unit]; }
  Mlp& actor(int cls) { return actors_[cls]; }
  Mlp& critic_embed(int cls) { return g_[cls]; }
  Mlp& critic_head(int cls) { return f_[cls]; }
  AttentionHead& attention() { return attention_; }
  std::mt19937_64& rng() { return rng_; }
  AdamState& actor_adam() { return actor_adam_; }
  AdamState& critic_adam() { return critic_adam_; }

  /// Size of the joint action space of one unit.
  double joint_action_count() const {
    double n = 1.0;
    for (int k : head_sizes_) n *= k;
    return n;
  }

  std::vector<Parameter*> actor_parameters() {
    std::vector<Parameter*> out;
    for (auto& a : actors_) {
      for (auto* p : a.parameters()) out.push_back(p);
    }
    return out;
  }

  std::vector<Parameter*> critic_parameters() {
    std::vector<Parameter*> out;
    for (size_t c = 0; c < g_.size(); ++c) {
      for (auto* p : g_[c].parameters()) out.push_back(p);
      for (auto* p : f_[c].parameters()) out.push_back(p);
    }
    for (auto* p : attention_.parameters()) out.push_back(p);
    return out;
  }

  /// Observation, mask and active heads of every unit at the current slot.
  std::vector<UnitSample> view(const Environment& env) const {
    if (env.num_agents() != agents_) throw ShapeError("learner: agent count differs from the environment");
    std::vector<UnitSample> out(units_);
    for (int u = 0; u < units_; ++u) {
      UnitSample& s = out[u];
      s.mask.assign(action_width_, 1.0);
      s.actions.assign(head_sizes_.size(), -1);
      s.probs.assign(action_width_, 0.0);
    }
    if (cfg_.mode == TrainMode::kCoMappo) {
      for (int a = 0; a < agents_; ++a) {
        UnitSample& s = out[a];
        s.obs = env.observe(a);
        s.active = env.has_decision(a);
        if (s.active) {
          const auto m = env.action_mask(a);
          for (int k = 0; k < kMenuSize; ++k) s.mask[k] = m[k] ? 1.0 : 0.0;
        }
      }
    } else {
      UnitSample& s = out[0];
      s.obs.reserve(obs_width_);
      std::vector<std::array<bool, kMenuSize>> masks(agents_);
      for (int a = 0; a < agents_; ++a) {
        const Observation z = env.observe(a);
        s.obs.insert(s.obs.end(), z.begin(), z.end());
        if (env.has_decision(a)) {
          s.active = true;
          masks[a] = env.action_mask(a);
          if (!joint_) {
            for (int k = 0; k < kMenuSize; ++k) s.mask[head_offsets_[a] + k] = masks[a][k] ? 1.0 : 0.0;
          }
        }
      }
      if (joint_) {
        // Agents without a decision are pinned to digit 0.
        for (int j = 0; j < head_sizes_[0]; ++j) {
          int rem = j;
          bool ok = true;
          for (int a = 0; a < agents_ && ok; ++a) {
            const int digit = rem % kMenuSize;
            rem /= kMenuSize;
            ok = env.has_decision(a) ? masks[a][digit] : digit == 0;
          }
          s.mask[j] = ok ? 1.0 : 0.0;
        }
      }
    }
    return out;
  }

  /// True when head h of unit u is live at this slot.
  bool head_live(const Environment& env, int unit, int h) const {
    if (joint_ && h == 0) {
      for (int a = 0; a < agents_; ++a) {
        if (env.has_decision(a)) return true;
      }
      return false;
    }
    return env.has_decision(agent_of_head(unit, h));
  }

  /// Agent driven by head h; -1 for the joint menu head.
  int agent_of_head(int unit, int h) const {
    if (cfg_.mode == TrainMode::kCoMappo) return unit;
    if (joint_) return h == 0 ? -1 : h - 1;
    return h % agents_;
  }

  /// True when CC-PPO uses a single head over the joint menu choice.
  bool joint_head() const { return joint_; }

  /// Picks actions for every unit. Fills probabilities, actions and log
  /// probabilities into `units`.
  JointDecision act(const Environment& env, std::vector<UnitSample>& units, bool greedy,
                    std::mt19937_64& rng) const {
    JointDecision d;
    d.actions.assign(agents_, -1);
    if (cfg_.learned_shares) d.shares.assign(agents_, 1.0);
    for (int u = 0; u < units_; ++u) {
      UnitSample& s = units[u];
      if (!s.active) continue;
      const std::vector<double> logits = actors_[class_of_[u]].forward(s.obs);
      s.logp_old = 0.0;
      for (int h = 0; h < head_count(); ++h) {
        if (!head_live(env, u, h)) continue;
        const int off = head_offsets_[h], k = head_sizes_[h];
        std::vector<bool> valid(k);
        for (int j = 0; j < k; ++j) valid[j] = s.mask[off + j] != 0.0;
        const std::vector<double> p = masked_probs(std::span<const double>(logits).subspan(off, k), valid);
        for (int j = 0; j < k; ++j) s.probs[off + j] = p[j];
        const int choice = greedy ? argmax(p) : draw(p, rng);
        s.actions[h] = choice;
        s.logp_old += std::log(p[choice]);
        const int agent = agent_of_head(u, h);
        if (agent < 0) {
          int rem = choice;
          for (int a = 0; a < agents_; ++a) {
            if (env.has_decision(a)) d.actions[a] = rem % kMenuSize;
            rem /= kMenuSize;
          }
        } else if (is_share_head(h)) {
          d.shares[agent] = kShareLevels[choice];
        } else {
          d.actions[agent] = choice;
        }
      }
    }
    return d;
  }

  /// Critic values for every unit. obs[u] and onehot[u] are rows x widths.
  std::vector<Var> critic_forward(Tape& tape, const std::vector<Matrix>& obs, const std::vector<Matrix>& onehot) {
    if (static_cast<int>(obs.size()) != units_ || static_cast<int>(onehot.size()) != units_) {
      throw ShapeError("critic: expected " + std::to_string(units_) + " units, got " + std::to_string(obs.size()));
    }
    std::vector<Var> e;
    for (int u = 0; u < units_; ++u) {
      Matrix x(obs[u].rows(), obs_width_ + action_width_);
      x << obs[u], onehot[u];
      e.push_back(g_[class_of_[u]].forward(tape, tape.constant(std::move(x))));
    }
    const std::vector<Var> psi = attention_.forward(tape, e);
    std::vector<Var> q;
    for (int u = 0; u < units_; ++u) q.push_back(f_[class_of_[u]].forward(tape, tape.concat_cols({e[u], psi[u]})));
    return q;
  }

  /// Q of one unit for a single joint observation and action (menu index per
  /// head, -1 for inactive heads).
  double centralized_q(int unit, const std::vector<Observation>& z, const std::vector<std::vector<int>>& a) {
    if (static_cast<int>(z.size()) != units_ || static_cast<int>(a.size()) != units_) {
      throw ShapeError("centralized_q: expected one observation and action per unit (" + std::to_string(units_) +
                       "), got " + std::to_string(z.size()) + " and " + std::to_string(a.size()));
    }
    std::vector<Matrix> obs, onehot;
    for (int u = 0; u < units_; ++u) {
      obs.push_back(row_matrix(z[u]));
      onehot.push_back(onehot_row(a[u]));
    }
    Tape tape;
    return tape.scalar(critic_forward(tape, obs, onehot)[unit]);
  }

  Matrix onehot_row(std::span<const int> actions) const {
    Matrix m = Matrix::Zero(1, action_width_);
    for (int h = 0; h < head_count(); ++h) {
      if (actions[h] >= 0) m(0, head_offsets_[h] + actions[h]) = 1.0;
    }
    return m;
  }

  Batch make_batch(const std::vector<Sample>& pool, std::span<const size_t> idx) const {
    Batch b;
    b.rows = static_cast<Eigen::Index>(idx.size());
    const int heads = head_count();
    for (int u = 0; u < units_; ++u) {
      Matrix obs(b.rows, obs_width_), mask(b.rows, action_width_), onehot = Matrix::Zero(b.rows, action_width_);
      Matrix live = Matrix::Zero(b.rows, heads), active(b.rows, 1), lp(b.rows, 1), adv(b.rows, 1), qh(b.rows, 1);
      std::vector<std::vector<int>> acts(heads, std::vector<int>(b.rows, 0));
      for (Eigen::Index r = 0; r < b.rows; ++r) {
        const UnitSample& s = pool[idx[r]].units[u];
        for (int j = 0; j < obs_width_; ++j) obs(r, j) = s.obs[j];
        for (int j = 0; j < action_width_; ++j) mask(r, j) = s.mask[j];
        for (int h = 0; h < heads; ++h) {
          if (s.actions[h] < 0) continue;
          live(r, h) = 1.0;
          acts[h][r] = s.actions[h];
          onehot(r, head_offsets_[h] + s.actions[h]) = 1.0;
        }
        active(r, 0) = s.active ? 1.0 : 0.0;
        lp(r, 0) = s.logp_old;
        adv(r, 0) = s.advantage;
        qh(r, 0) = s.q_hat;
      }
      b.obs.push_back(std::move(obs));
      b.mask.push_back(std::move(mask));
      b.onehot.push_back(std::move(onehot));
      b.head_active.push_back(std::move(live));
      b.actions.push_back(std::move(acts));
      b.active.push_back(std::move(active));
      b.logp_old.push_back(std::move(lp));
      b.advantage.push_back(std::move(adv));
      b.q_hat.push_back(std::move(qh));
    }
    return b;
  }

  /// Log probability (rows x 1) and entropy (rows x 1) of the batch actions
  /// under the current actor of unit u.
  std::pair<Var, Var> log_prob(Tape& tape, const Batch& b, int u) {
    const Var logits = actors_[class_of_[u]].forward(tape, tape.constant(b.obs[u]));
    Var logp{}, ent{};
    for (int h = 0; h < head_count(); ++h) {
      const int off = head_offsets_[h], k = head_sizes_[h];
      const Matrix mask = b.mask[u].middleCols(off, k);
      const Var l = tape.masked_log_softmax(tape.slice_cols(logits, off, k), mask);
      const Var live = tape.constant(b.head_active[u].col(h));
      const Var lp = tape.mul(tape.gather_cols(l, b.actions[u][h]), live);
      const Var hh = tape.mul(tape.scale(tape.row_sum(tape.mul(tape.exp(l), l)), -1.0), live);
      logp = h == 0 ? lp : tape.add(logp, lp);
      ent = h == 0 ? hh : tape.add(ent, hh);
    }
    return {logp, ent};
  }

  /// Clipped surrogate plus entropy bonus, averaged over active unit rows.
  /// `per_class` (optional) receives policy loss and entropy per curve class.
  Var actor_objective(Tape& tape, const Batch& b, std::vector<LossStats>* per_class = nullptr) {
    const double eps = cfg_.hyper.clip;
    double n_active = 0.0;
    for (int u = 0; u < units_; ++u) n_active += b.active[u].sum();
    std::vector<double> class_rows(curve_classes_.size(), 0.0);
    Var total = tape.constant(Matrix::Zero(1, 1));
    for (int u = 0; u < units_; ++u) {
      const double rows = b.active[u].sum();
      if (rows == 0.0) continue;
      const auto [logp, ent] = log_prob(tape, b, u);
      const Var ratio = tape.exp(tape.sub(logp, tape.constant(b.logp_old[u])));
      const Var adv = tape.constant(b.advantage[u]);
      const Var surr = tape.minimum(tape.mul(ratio, adv), tape.mul(tape.clamp(ratio, 1.0 - eps, 1.0 + eps), adv));
      const Var act = tape.constant(b.active[u]);
      const Var term = tape.mul(tape.add(surr, tape.scale(ent, cfg_.hyper.entropy_coef)), act);
      total = tape.add(total, tape.sum(term));
      if (per_class) {
        LossStats& st = (*per_class)[curve_class_of_[u]];
        st.policy_loss -= tape.value(surr).cwiseProduct(b.active[u]).sum();
        st.entropy += tape.value(ent).cwiseProduct(b.active[u]).sum();
        class_rows[curve_class_of_[u]] += rows;
      }
    }
    if (per_class) {
      for (size_t c = 0; c < class_rows.size(); ++c) {
        if (class_rows[c] > 0.0) {
          (*per_class)[c].policy_loss /= class_rows[c];
          (*per_class)[c].entropy /= class_rows[c];
        }
      }
    }
    return tape.scale(total, n_active > 0.0 ? 1.0 / n_active : 0.0);
  }

  /// Mean (Qhat - Q)^2 over active unit rows under the current critic.
  Var value_loss(Tape& tape, const Batch& b, std::vector<LossStats>* per_class = nullptr) {
    const std::vector<Var> q = critic_forward(tape, b.obs, b.onehot);
    double n_active = 0.0;
    for (int u = 0; u < units_; ++u) n_active += b.active[u].sum();
    std::vector<double> class_rows(curve_classes_.size(), 0.0);
    Var total = tape.constant(Matrix::Zero(1, 1));
    for (int u = 0; u < units_; ++u) {
      const double rows = b.active[u].sum();
      if (rows == 0.0) continue;
      const Var err = tape.mul(tape.square(tape.sub(q[u], tape.constant(b.q_hat[u]))), tape.constant(b.active[u]));
      total = tape.add(total, tape.sum(err));
      if (per_class) {
        (*per_class)[curve_class_of_[u]].value_loss += tape.value(err).sum();
        class_rows[curve_class_of_[u]] += rows;
      }
    }
    if (per_class) {
      for (size_t c = 0; c < class_rows.size(); ++c) {
        if (class_rows[c] > 0.0) (*per_class)[c].value_loss /= class_rows[c];
      }
    }
    return tape.scale(total, n_active > 0.0 ? 1.0 / n_active : 0.0);
  }

  /// Fills q_old, baseline, q_hat and advantage for every active unit sample.
  void estimate_advantages(std::vector<Sample>& pool) {
    if (pool.empty()) return;
    std::vector<size_t> all(pool.size());
    std::iota(all.begin(), all.end(), size_t{0});
    const Batch b = make_batch(pool, all);
    std::vector<Matrix> q_old;
    {
      Tape tape;
      for (Var v : critic_forward(tape, b.obs, b.onehot)) q_old.push_back(tape.value(v));
    }
    const std::vector<Matrix> baseline = baselines(pool, b);
    for (int u = 0; u < units_; ++u) {
      for (size_t i = 0; i < pool.size(); ++i) {
        pool[i].units[u].q_old = q_old[u](static_cast<Eigen::Index>(i), 0);
        pool[i].units[u].baseline = baseline[u](static_cast<Eigen::Index>(i), 0);
      }
      // Each unit's active samples, in order, form one trajectory per episode.
      size_t start = 0;
      while (start < pool.size()) {
        size_t end = start;
        while (end < pool.size() && pool[end].episode == pool[start].episode) ++end;
        std::vector<size_t> rows;
        for (size_t i = start; i < end; ++i) {
          if (pool[i].units[u].active) rows.push_back(i);
        }
        std::vector<double> r, q;
        for (size_t i : rows) {
          r.push_back(pool[i].units[u].reward);
          q.push_back(pool[i].units[u].q_old);
        }
        const std::vector<double> q_hat = gae_targets(r, q, cfg_.hyper.gamma, cfg_.hyper.lambda);
        for (size_t j = 0; j < rows.size(); ++j) {
          UnitSample& s = pool[rows[j]].units[u];
          s.q_hat = q_hat[j];
          s.advantage = q_hat[j] - s.baseline;
        }
        start = end;
      }
    }
    if (cfg_.hyper.normalize_advantages) {
      double sum = 0.0, sq = 0.0, n = 0.0;
      for (const auto& s : pool) {
        for (const auto& us : s.units) {
          if (!us.active) continue;
          sum += us.advantage;
          sq += us.advantage * us.advantage;
          n += 1.0;
        }
      }
      if (n > 1.0) {
        const double mean = sum / n;
        const double sd = std::sqrt(std::max(0.0, sq / n - mean * mean));
        for (auto& s : pool) {
          for (auto& us : s.units) {
            if (us.active) us.advantage = (us.advantage - mean) / (sd + 1e-8);
          }
        }
      }
    }
  }

  /// One PPO update over the pool: K epochs of shuffled minibatches.
  /// Returns per-class averages of the losses.
  std::vector<LossStats> ppo_update(std::vector<Sample>& pool, std::vector<std::string>* warnings = nullptr) {
    std::vector<LossStats> avg(curve_classes_.size());
    if (pool.empty()) {
      if (warnings) warnings->push_back("ppo_update: empty experience pool, update skipped");
      return avg;
    }
    estimate_advantages(pool);
    auto actor_params = actor_parameters();
    auto critic_params = critic_parameters();
    std::vector<size_t> order(pool.size());
    std::iota(order.begin(), order.end(), size_t{0});
    const size_t mb = static_cast<size_t>(cfg_.hyper.minibatch);
    int batches = 0;
    for (int epoch = 0; epoch < cfg_.hyper.epochs; ++epoch) {
      shuffle(order);
      for (size_t start = 0; start < order.size(); start += mb) {
        const size_t end = std::min(order.size(), start + mb);
        const Batch b = make_batch(pool, std::span<const size_t>(order).subspan(start, end - start));
        std::vector<LossStats> stats(curve_classes_.size());

        zero_gradients(critic_params);
        {
          Tape tape;
          const Var loss = value_loss(tape, b, &stats);
          check_finite(tape.scalar(loss), "value loss");
          tape.backward(loss);
        }
        clip_gradients(critic_params, cfg_.hyper.max_grad_norm);
        adam_step(critic_params, critic_adam_, Direction::kDescent);

        zero_gradients(actor_params);
        {
          Tape tape;
          const Var objective = actor_objective(tape, b, &stats);
          check_finite(tape.scalar(objective), "policy objective");
          tape.backward(objective);
        }
        clip_gradients(actor_params, cfg_.hyper.max_grad_norm);
        adam_step(actor_params, actor_adam_, Direction::kAscent);

        for (size_t c = 0; c < avg.size(); ++c) {
          avg[c].policy_loss += stats[c].policy_loss;
          avg[c].value_loss += stats[c].value_loss;
          avg[c].entropy += stats[c].entropy;
        }
        ++batches;
      }
    }
    for (auto& s : avg) {
      s.policy_loss /= batches;
      s.value_loss /= batches;
      s.entropy /= batches;
    }
    return avg;
  }

  void write(std::ostream& os) {
    io::write_string(os, train_mode_name(cfg_.mode));
    io::write_pod<std::int32_t>(os, units_);
    io::write_pod<std::int32_t>(os, action_width_);
    const auto ap = actor_parameters();
    const auto cp = critic_parameters();
    io::write_parameters(os, ap);
    io::write_parameters(os, cp);
    io::write_adam(os, actor_adam_);
    io::write_adam(os, critic_adam_);
    io::write_rng(os, rng_);
  }

  void read(std::istream& is) {
    const std::string mode = io::read_string(is);
    if (mode != train_mode_name(cfg_.mode)) {
      throw ConfigError("checkpoint: trained with " + mode + ", expected " + train_mode_name(cfg_.mode));
    }
    if (io::read_pod<std::int32_t>(is) != units_ || io::read_pod<std::int32_t>(is) != action_width_) {
      throw ConfigError("checkpoint: unit layout does not match the scenario");
    }
    const auto ap = actor_parameters();
    const auto cp = critic_parameters();
    io::read_parameters(is, ap);
    io::read_parameters(is, cp);
    actor_adam_ = io::read_adam(is);
    critic_adam_ = io::read_adam(is);
    rng_ = io::read_rng(is);
  }

  /// Uniform double in [0, 1) from the top 53 bits.
  static double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

  static std::vector<double> masked_probs(std::span<const double> logits, const std::vector<bool>& valid) {
    std::vector<double> p(logits.size(), 0.0);
    double m = -std::numeric_limits<double>::infinity();
    for (size_t j = 0; j < logits.size(); ++j) {
      if (valid[j]) m = std::max(m, logits[j]);
    }
    if (!std::isfinite(m)) throw DomainError("policy: no valid action");
    double z = 0.0;
    for (size_t j = 0; j < logits.size(); ++j) {
      if (valid[j]) z += (p[j] = std::exp(logits[j] - m));
    }
    for (double& v : p) v /= z;
    return p;
  }

  static int argmax(const std::vector<double>& p) {
    int best = 0;
    for (int j = 1; j < static_cast<int>(p.size()); ++j) {
      if (p[j] > p[best]) best = j;
    }
    return best;
  }

  static int draw(const std::vector<double>& p, std::mt19937_64& rng) {
    const double u = uniform01(rng);
    double cum = 0.0;
    int last = -1;
    for (int j = 0; j < static_cast<int>(p.size()); ++j) {
      if (p[j] <= 0.0) continue;
      cum += p[j];
      last = j;
      if (u < cum) return j;
    }
    return last;
  }

 private:
  static int class_index(std::vector<std::string>& names, const std::string& name) {
    for (size_t i = 0; i < names.size(); ++i) {
      if (names[i] == name) return static_cast<int>(i);
    }
    names.push_back(name);
    return static_cast<int>(names.size()) - 1;
  }

  bool is_share_head(int h) const {
    if (!cfg_.learned_shares) return false;
    if (cfg_.mode == TrainMode::kCoMappo) return h == 1;
    return joint_ ? h >= 1 : h >= agents_;
  }

  static Matrix row_matrix(const std::vector<double>& v) {
    Matrix m(1, static_cast<Eigen::Index>(v.size()));
    for (size_t i = 0; i < v.size(); ++i) m(0, static_cast<Eigen::Index>(i)) = v[i];
    return m;
  }

  void shuffle(std::vector<size_t>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(uniform01(rng_) * static_cast<double>(i));
      std::swap(v[i - 1], v[std::min(j, i - 1)]);
    }
  }

  static void check_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw NumericError(std::string("ppo_update: non-finite ") + what);
  }

  /// Counterfactual baselines of every unit: the unit's own action is swept
  /// under its behaviour policy with the other units' actions held fixed.
  /// Exact enumeration when the joint action space is small, sampled
  /// otherwise.
  std::vector<Matrix> baselines(const std::vector<Sample>& pool, const Batch& b) {
    const Eigen::Index rows = b.rows;
    std::vector<Matrix> out;
    const double joint = joint_action_count();
    const bool exact = joint <= cfg_.exact_baseline_limit;
    for (int u = 0; u < units_; ++u) {
      Matrix acc = Matrix::Zero(rows, 1);
      std::vector<Matrix> onehot = b.onehot;
      auto evaluate = [&](const Matrix& alt) {
        onehot[u] = alt;
        Tape tape;
        return Matrix(tape.value(critic_forward(tape, b.obs, onehot)[u]));
      };
      if (exact) {
        const int total = static_cast<int>(joint);
        for (int j = 0; j < total; ++j) {
          Matrix alt = Matrix::Zero(rows, action_width_);
          Matrix w = Matrix::Zero(rows, 1);
          bool any = false;
          for (Eigen::Index r = 0; r < rows; ++r) {
            const UnitSample& s = pool[r].units[u];
            if (!s.active) continue;
            double weight = 1.0;
            int rem = j;
            for (int h = 0; h < head_count(); ++h) {
              const int c = rem % head_sizes_[h];
              rem /= head_sizes_[h];
              if (s.actions[h] < 0) {
                if (c != 0) weight = 0.0;
                continue;
              }
              weight *= s.probs[head_offsets_[h] + c];
              alt(r, head_offsets_[h] + c) = 1.0;
            }
            w(r, 0) = weight;
            any = any || weight > 0.0;
          }
          if (any) acc += w.cwiseProduct(evaluate(alt));
        }
      } else {
        for (int k = 0; k < cfg_.baseline_samples; ++k) {
          Matrix alt = Matrix::Zero(rows, action_width_);
          for (Eigen::Index r = 0; r < rows; ++r) {
            const UnitSample& s = pool[r].units[u];
            if (!s.active) continue;
            for (int h = 0; h < head_count(); ++h) {
              if (s.actions[h] < 0) continue;
              const int off = head_offsets_[h];
              std::vector<double> p(s.probs.begin() + off, s.probs.begin() + off + head_sizes_[h]);
              alt(r, off + draw(p, rng_)) = 1.0;
            }
          }
          acc += evaluate(alt);
        }
        acc /= cfg_.baseline_samples;
      }
      out.push_back(std::move(acc));
    }
    return out;
  }

  TrainConfig cfg_;
  std::mt19937_64 rng_;
  int agents_ = 0;
  int units_ = 0;
  bool joint_ = false;
  int obs_width_ = 0;
  int action_width_ = 0;
  std::vector<int> head_sizes_;
  std::vector<int> head_offsets_;
  std::vector<std::string> curve_classes_;
  std::vector<std::string> net_classes_;
  std::vector<int> curve_class_of_;
  std::vector<int> class_of_;
  std::vector<Mlp> actors_;
  std::vector<Mlp> g_;
  std::vector<Mlp> f_;
  AttentionHead attention_;
  AdamState actor_adam_;
  AdamState critic_adam_;
};

// ---------------------------------------------------------------------------
// Training loop.

struct CurveRow {
  int episode = 0;
  std::string agent_class;
  double cumulative_reward = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
};

inline void write_learning_curve_csv(std::ostream& os, std::span<const CurveRow> rows) {
  os << "episode,agent_class,cumulative_reward,policy_loss,value_loss,entropy\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%s,%.10g,%.10g,%.10g,%.10g\n", r.episode, r.agent_class.c_str(),
                  r.cumulative_reward, r.policy_loss, r.value_loss, r.entropy);
    os << buf;
  }
}

inline AllocatorHook hook_for(const TrainConfig& cfg, const EnvConfig& env_cfg) {
  return cfg.learned_shares ? learned_share_hook(env_cfg.learned_cns_rate) : AllocatorHook(closed_form_hook);
}

/// Runs one episode with the learner's policy. Appends experience to `pool`
/// when given. Returns the summed reward per unit.
inline std::vector<double> run_episode(const Learner& learner, Environment& env, const AllocatorHook& hook,
                                       bool greedy, std::mt19937_64& rng, int episode = 0,
                                       std::vector<Sample>* pool = nullptr,
                                       std::vector<double>* agent_rewards = nullptr) {
  env.reset(static_cast<std::uint64_t>(episode));
  std::vector<double> per_unit(learner.unit_count(), 0.0);
  if (agent_rewards) agent_rewards->assign(learner.agent_count(), 0.0);
  const bool shared = learner.config().mode == TrainMode::kCentral || learner.config().team_reward;
  while (!env.done()) {
    std::vector<UnitSample> units = learner.view(env);
    const JointDecision d = learner.act(env, units, greedy, rng);
    const StepResult out = env.step(d.actions, hook, d.shares);
    for (int u = 0; u < learner.unit_count(); ++u) {
      double r = 0.0;
      if (shared) {
        for (const auto& rr : out.rewards) r += rr.value;
      } else {
        r = out.rewards[u].value;
      }
      units[u].reward = r;
      per_unit[u] += r;
    }
    if (agent_rewards) {
      for (size_t a = 0; a < out.rewards.size(); ++a) (*agent_rewards)[a] += out.rewards[a].value;
    }
    const bool any = std::any_of(units.begin(), units.end(), [](const UnitSample& s) { return s.active; });
    if (pool && any) pool->push_back({episode, std::move(units)});
  }
  return per_unit;
}

class Trainer {
 public:
  Trainer(const Scenario& scenario, EnvConfig env_cfg, TrainConfig cfg)
      : env_(scenario, env_cfg), env_cfg_(env_cfg), learner_(env_, cfg), hook_(hook_for(cfg, env_cfg)) {
    last_stats_.assign(learner_.curve_classes().size(), LossStats{});
    for (int a = 0; a < env_.num_agents(); ++a) {
      layer_class_.push_back(env_.agent_layer(a) == Layer::kCubeSat ? "cubesat" : "lms");
    }
    last_good_ = snapshot();
  }

  Learner& learner() { return learner_; }
  const Learner& learner() const { return learner_; }
  Environment& environment() { return env_; }
  int episodes_done() const { return episode_; }
  int updates() const { return updates_; }
  const std::vector<CurveRow>& curve() const { return curve_; }
  const std::vector<double>& episode_rewards() const { return episode_rewards_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  /// Trains until config().episodes episodes have run.
  void run() {
    const TrainConfig& cfg = learner_.config();
    while (episode_ < cfg.episodes) {
      std::vector<double> agent_rewards;
      const std::vector<double> per_unit =
          run_episode(learner_, env_, hook_, false, learner_.rng(), episode_, &pool_, &agent_rewards);
      double total = 0.0;
      for (double r : agent_rewards) total += r;
      episode_rewards_.push_back(total);
      ++episode_;
      ++since_update_;
      const bool last = episode_ == cfg.episodes;
      if (since_update_ >= cfg.hyper.episodes_per_update ||
          static_cast<int>(pool_.size()) >= cfg.hyper.pool_capacity || last) {
        update();
      }
      record_curve(agent_rewards, per_unit);
    }
    if (!cfg.checkpoint_path.empty()) save(cfg.checkpoint_path);
  }

  void save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot write checkpoint " + path);
    os << snapshot();
    if (!os) throw ConfigError("failed writing checkpoint " + path);
  }

  void load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot read checkpoint " + path);
    restore(is);
    last_good_ = snapshot();
  }

  /// Serialized state at the last update boundary.
  std::string snapshot() const {
    std::ostringstream os(std::ios::binary);
    io::write_header(os);
    const_cast<Learner&>(learner_).write(os);
    io::write_pod<std::int32_t>(os, episode_);
    io::write_pod<std::int32_t>(os, updates_);
    io::write_pod<std::uint64_t>(os, last_stats_.size());
    for (const auto& s : last_stats_) {
      io::write_pod(os, s.policy_loss);
      io::write_pod(os, s.value_loss);
      io::write_pod(os, s.entropy);
    }
    io::write_pod<std::uint64_t>(os, curve_.size());
    for (const auto& r : curve_) {
      io::write_pod<std::int32_t>(os, r.episode);
      io::write_string(os, r.agent_class);
      io::write_pod(os, r.cumulative_reward);
      io::write_pod(os, r.policy_loss);
      io::write_pod(os, r.value_loss);
      io::write_pod(os, r.entropy);
    }
    io::write_pod<std::uint64_t>(os, episode_rewards_.size());
    for (double r : episode_rewards_) io::write_pod(os, r);
    return os.str();
  }

 private:
  void restore(std::istream& is) {
    io::read_header(is);
    learner_.read(is);
    episode_ = io::read_pod<std::int32_t>(is);
    updates_ = io::read_pod<std::int32_t>(is);
    const auto n_stats = io::read_pod<std::uint64_t>(is);
    if (n_stats != last_stats_.size()) throw ConfigError("checkpoint: class count mismatch");
    for (auto& s : last_stats_) {
      s.policy_loss = io::read_pod<double>(is);
      s.value_loss = io::read_pod<double>(is);
      s.entropy = io::read_pod<double>(is);
    }
    curve_.resize(io::read_pod<std::uint64_t>(is));
    for (auto& r : curve_) {
      r.episode = io::read_pod<std::int32_t>(is);
      r.agent_class = io::read_string(is);
      r.cumulative_reward = io::read_pod<double>(is);
      r.policy_loss = io::read_pod<double>(is);
      r.value_loss = io::read_pod<double>(is);
      r.entropy = io::read_pod<double>(is);
    }
    episode_rewards_.resize(io::read_pod<std::uint64_t>(is));
    for (double& r : episode_rewards_) r = io::read_pod<double>(is);
    pool_.clear();
    since_update_ = 0;
  }

  void update() {
    const TrainConfig& cfg = learner_.config();
    try {
      last_stats_ = learner_.ppo_update(pool_, &warnings_);
    } catch (const NumericError& e) {
      std::string where;
      std::istringstream is(last_good_, std::ios::binary);
      restore(is);
      if (!cfg.checkpoint_path.empty()) {
        std::ofstream os(cfg.checkpoint_path, std::ios::binary);
        os << last_good_;
        where = "; last good state saved to " + cfg.checkpoint_path;
      }
      throw NumericError(std::string(e.what()) + " at episode " + std::to_string(episode_) + where);
    }
    pool_.clear();
    since_update_ = 0;
    ++updates_;
    pending_curve_ = true;
  }

  void record_curve(const std::vector<double>& agent_rewards, const std::vector<double>& per_unit) {
    const int episode = episode_ - 1;
    const bool central = learner_.config().mode == TrainMode::kCentral;
    const auto& classes = learner_.curve_classes();
    for (size_t c = 0; c < classes.size(); ++c) {
      CurveRow row;
      row.episode = episode;
      row.agent_class = classes[c];
      if (central) {
        row.cumulative_reward = per_unit[0];
      } else {
        double sum = 0.0;
        int count = 0;
        for (size_t a = 0; a < agent_rewards.size(); ++a) {
          if (layer_class_[a] == classes[c]) {
            sum += agent_rewards[a];
            ++count;
          }
        }
        row.cumulative_reward = count > 0 ? sum / count : 0.0;
      }
      row.policy_loss = last_stats_[c].policy_loss;
      row.value_loss = last_stats_[c].value_loss;
      row.entropy = last_stats_[c].entropy;
      curve_.push_back(row);
    }
    if (pending_curve_) {
      last_good_ = snapshot();
      pending_curve_ = false;
      const TrainConfig& cfg = learner_.config();
      if (!cfg.checkpoint_path.empty() && cfg.checkpoint_every > 0 && updates_ % cfg.checkpoint_every == 0) {
        save(cfg.checkpoint_path);
      }
    }
  }

  Environment env_;
  EnvConfig env_cfg_;
  Learner learner_;
  AllocatorHook hook_;
  std::vector<std::string> layer_class_;
  std::vector<Sample> pool_;
  std::vector<LossStats> last_stats_;
  std::vector<CurveRow> curve_;
  std::vector<double> episode_rewards_;
  std::vector<std::string> warnings_;
  std::string last_good_;
  int episode_ = 0;
  int updates_ = 0;
  int since_update_ = 0;
  bool pending_curve_ = false;
};

struct TrainResult {
  Learner policy;
  std::vector<CurveRow> curve;
  std::vector<double> episode_rewards;
  int updates = 0;
};

/// Co-MAPPO training on one scenario.
inline TrainResult train(const Scenario& scenario, const EnvConfig& env_cfg, TrainConfig cfg) {
  cfg.mode = TrainMode::kCoMappo;
  Trainer t(scenario, env_cfg, cfg);
  t.run();
  return {t.learner(), t.curve(), t.episode_rewards(), t.updates()};
}

/// CC-PPO: one super-agent deciding for every satellite.
inline TrainResult cc_ppo_train(const Scenario& scenario, const EnvConfig& env_cfg, TrainConfig cfg) {
  cfg.mode = TrainMode::kCentral;
  Trainer t(scenario, env_cfg, cfg);
  t.run();
  return {t.learner(), t.curve(), t.episode_rewards(), t.updates()};
}

}  // namespace satoffload

#endif  // SATOFFLOAD_MAPPO_HPP_
