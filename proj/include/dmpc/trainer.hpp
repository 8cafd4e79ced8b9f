// Copyright 2026 The dmpc Authors
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

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dmpc/batch.hpp"
#include "dmpc/mlp.hpp"
#include "dmpc/policy.hpp"
#include "dmpc/raceenv.hpp"

namespace dmpc {

struct TrainConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  int steps_per_update = 256;  // per environment
  int minibatch_size = 2048;
  int sgd_epochs = 10;
  double clip_range = 0.2;
  double lr_start = 3e-4;
  double lr_end = 3e-5;
  double entropy_coef = 0.0;
  double value_coef = 0.5;
  double grad_clip = 0.5;
  std::int64_t total_steps = 200000;
  int num_envs = 16;
  int checkpoint_every = 10;  // updates; 0 disables periodic checkpoints

  void validate() const;
};

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// A_t = delta_t + gamma lambda (1 - done_t) A_{t+1}, with
// delta_t = r_t + gamma (1 - done_t) V_{t+1} - V_t and V_T = bootstrap.
// done_t marks that the episode ended on the transition out of step t.
GaeResult gae(const std::vector<double>& rewards, const std::vector<double>& values,
              const std::vector<char>& dones, double bootstrap, double gamma, double lambda);

// Transitions of one collection phase, flattened step-major:
// index = step * num_envs + env.
struct RolloutBuffer {
  int num_envs = 0;
  int steps = 0;
  Mat obs;      // obs_dim x N
  Mat actions;  // nu x N, pre-clamp samples
  std::vector<Vec> x_init;  // controller-frame states
  std::vector<std::vector<Vec>> warm;
  std::vector<double> log_probs;
  std::vector<double> values;
  std::vector<double> rewards;
  std::vector<char> dones;
  std::vector<double> bootstrap;  // per env, value after the last step
  std::vector<double> advantages;
  std::vector<double> returns;

  int size() const { return static_cast<int>(rewards.size()); }
  // GAE per environment. ppo_update normalizes the advantages.
  void compute_advantages(double gamma, double lambda);
};

struct Optimizers {
  Adam actor;
  Adam log_std;
  Adam critic;

  explicit Optimizers(const ActorCritic& policy);
};

struct UpdateMetrics {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  double approx_grad_frac = 0.0;
  int minibatches = 0;
  int aborted_minibatches = 0;
};

UpdateMetrics ppo_update(RolloutBuffer& buffer, ActorCritic& policy, Optimizers& opt,
                         const TrainConfig& config, double lr, std::mt19937_64& rng,
                         BatchExecutor& exec);

struct MetricsRow {
  int update = 0;
  std::int64_t step = 0;
  double mean_reward = 0.0;
  double lap_rate = 0.0;
  double mean_solver_iters = 0.0;
  double approx_grad_frac = 0.0;
  double steps_per_sec = 0.0;
};

// Header: update,step,mean_reward,lap_rate,mean_solver_iters,approx_grad_frac,steps_per_sec
void write_metrics_header(std::ostream& os);
void write_metrics_row(std::ostream& os, const MetricsRow& row);

struct TrainOptions {
  std::uint64_t seed = 0;
  int workers = 1;
  std::string out_dir;        // empty: nothing written
  std::string resume_from;    // checkpoint path, optional
  std::string config_json;    // echoed into checkpoints; hashed
};

struct TrainResult {
  std::vector<MetricsRow> metrics;
  std::vector<long> rss_kb;  // resident set size after each update
  std::int64_t steps = 0;
  int updates = 0;
  std::string checkpoint_path;
};

TrainResult train(const TrainConfig& config, const RaceEnv& env, ActorCritic& policy,
                  const TrainOptions& options);

Checkpoint make_checkpoint(const ActorCritic& policy, const Optimizers* opt, std::int64_t step,
                           int update, const std::string& config_json);
ActorCritic policy_from_checkpoint(const Checkpoint& ck);

struct EpisodeResult {
  DoneReason reason = DoneReason::kNone;
  std::optional<double> lap_time;
  double total_reward = 0.0;
  int gates_passed = 0;
  std::vector<TrajectoryRow> trajectory;
};

// Deterministic (explore = false) episode from a seeded spawn.
EpisodeResult run_episode(const ActorCritic& policy, const RaceEnv& env, std::uint64_t seed,
                          bool explore = false);

// Resident set size of this process in kB, from /proc/self/statm.
long resident_kb();

}  // namespace dmpc
