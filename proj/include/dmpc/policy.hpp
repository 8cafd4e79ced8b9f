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
#include <random>
#include <string>
#include <vector>

#include "dmpc/batch.hpp"
#include "dmpc/dynamics.hpp"
#include "dmpc/ilqr.hpp"
#include "dmpc/mlp.hpp"
#include "dmpc/qcost.hpp"

namespace dmpc {

enum class PolicyKind { kAcMpc, kAcMlp };
std::string to_string(PolicyKind k);
PolicyKind parse_policy_kind(const std::string& s);

// Affine map from sigmoid outputs to cost parameters. Layout per timestep:
// [diag(C_t) (nz), c_t (nz)], timesteps concatenated.
struct CostHeadScaling {
  int horizon = 0;
  int nz = 0;
  Vec lo;
  Vec hi;

  static CostHeadScaling uniform(int horizon, int nz, double C_lo, double C_hi, double c_lo,
                                 double c_hi);
  int size() const { return static_cast<int>(lo.size()); }
  void validate() const;
};

struct PolicyConfig {
  PolicyKind kind = PolicyKind::kAcMpc;
  std::vector<int> hidden{512, 512};
  double C_lo = 1e-3;
  double C_hi = 10.0;
  double c_lo = -10.0;
  double c_hi = 10.0;
  double sigma_init_frac = 0.1;  // of (u_max - u_min)
  double actor_output_gain = 0.01;
  // Per-timestep cost the untrained cost head starts at (through its output
  // bias). Empty: the built-in hover damping cost for the planar quadrotor.
  // With only nominal_C_diag given, the quadrotor's c centers u on hover.
  Vec nominal_C_diag;
  Vec nominal_c;
};

struct PolicyAction {
  Vec u_mpc;      // deterministic policy output (MPC first control, or MLP mean)
  Vec u_raw;      // sample before clamping; log_prob is evaluated here
  Vec u_sampled;  // executed control, clamped to bounds
  double log_prob = 0.0;
  Vec sigma;
  // MPC diagnostics; empty / zero for the MLP policy.
  std::vector<Vec> U_plan;
  int solver_iterations = 0;
  bool converged = true;
  bool failed = false;
  std::string error;
};

// Forward pass of the actor over a batch, kept for the backward pass.
struct ActorEval {
  Mlp::Cache cache;
  Mat head;     // raw outputs, one column per sample
  Mat squashed; // sigmoid(head)
  Mat mean;     // nu x N action means
  std::vector<StageCostParams> params;
  std::vector<SolveResult> solves;
  std::vector<char> valid;  // 0 where the solve failed
  int approximate = 0;      // solves that had not converged
};

class ActorCritic {
 public:
  // `model` is the controller's prediction model; `settings` carries horizon,
  // iteration budget and bounds. For kAcMlp only the bounds are used.
  ActorCritic(int obs_dim, const DynModel& model, const SolveSettings& settings,
              const PolicyConfig& config, std::uint64_t seed);

  PolicyKind kind() const { return kind_; }
  int obs_dim() const { return actor_.inputs(); }
  int nu() const { return model_.nu(); }
  const DynModel& model() const { return model_; }
  const SolveSettings& settings() const { return settings_; }
  const CostHeadScaling& scaling() const { return scaling_; }
  void set_scaling(CostHeadScaling s);
  const PolicyConfig& config() const { return config_; }

  Mlp& actor() { return actor_; }
  const Mlp& actor() const { return actor_; }
  Mlp& critic() { return critic_; }
  const Mlp& critic() const { return critic_; }
  Vec& log_std() { return log_std_; }
  const Vec& log_std() const { return log_std_; }
  Vec sigma() const { return log_std_.array().exp(); }

  // Cost parameters for one observation (kAcMpc).
  StageCostParams actor_forward(const Vec& obs) const;
  StageCostParams cost_from_head(const Vec& squashed_column) const;
  Vec critic_forward(const Mat& obs) const;  // one value per column

  // Batched evaluation. For kAcMpc x_init and warm are the controller-frame
  // states and warm starts per column; they are ignored for kAcMlp.
  ActorEval evaluate_actor(const Mat& obs, const std::vector<Vec>& x_init,
                           const std::vector<std::vector<Vec>>& warm, BatchExecutor& exec) const;
  // Accumulates the actor parameter gradient for dLoss/dmean (nu x N).
  // Returns the number of samples whose MPC gradient was flagged approximate.
  int actor_backward(const ActorEval& eval, const Mat& d_mean, Vec& grad, BatchExecutor& exec) const;

  std::vector<PolicyAction> act(const Mat& obs, const std::vector<Vec>& x_init,
                                const std::vector<std::vector<Vec>>& warm, bool explore,
                                std::mt19937_64& rng, BatchExecutor& exec) const;
  PolicyAction act(const Vec& obs, const Vec& x_init, const std::vector<Vec>& warm,
                   bool explore, std::mt19937_64& rng) const;

  // Diagonal Gaussian log-density at `a` around `mean`.
  double log_prob(const Vec& a, const Vec& mean) const;

  std::vector<Vec> hover_warm_start() const;

 private:
  PolicyKind kind_;
  DynModel model_;
  SolveSettings settings_;
  PolicyConfig config_;
  CostHeadScaling scaling_;
  Mlp actor_;
  Mlp critic_;
  Vec log_std_;
};

// Versioned binary container: 8-byte magic, u32 version, u64 header length,
// a JSON header describing the blocks, then each block as raw little-endian
// float64 in header order.
struct Checkpoint {
  std::string header_json;  // free-form metadata (config, counters)
  std::vector<std::pair<std::string, Vec>> blocks;

  const Vec& block(const std::string& name) const;
  bool has(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

// 64-bit FNV-1a, used as the config hash in checkpoints.
std::uint64_t fnv1a(const std::string& s);

}  // namespace dmpc
