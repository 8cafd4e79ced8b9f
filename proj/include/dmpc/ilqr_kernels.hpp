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

// Per-instance, per-timestep pieces of an iLQR iteration. The serial solver
// and the batched executor both drive these; only the loop nesting differs,
// so every instance sees the same floating-point operations in the same order.

#include <string>
#include <vector>

#include "dmpc/ilqr.hpp"

namespace dmpc::kernels {

struct Candidate {
  Trajectory traj;
  double cost = 0.0;
  bool diverged = false;
  Vec dx;  // scratch
  Vec du;
};

struct InstanceWorkspace {
  Vec x_init;
  const StageCostParams* params = nullptr;

  Trajectory nominal;
  double cost = 0.0;
  std::vector<Mat> A;
  std::vector<Mat> B;
  Gains gains;
  Mat V;  // value Hessian at t+1 during the backward sweep
  Vec v;  // value gradient at t+1
  std::vector<Candidate> candidates;

  std::vector<double> cost_history;
  std::vector<double> alpha_history;
  int iterations = 0;
  bool converged = false;
  bool active = false;
  bool failed = false;
  std::string error;

  // Sizes every buffer and clamps the warm start into the bounds. Throws
  // ConfigError on dimension mismatches.
  void init(const DynModel& model, const Vec& x0, const StageCostParams& p,
            const std::vector<Vec>& U_warm, const SolveSettings& settings);

  bool runnable() const { return active && !failed; }
  void fail(const std::string& what);
};

// Initial rollout: X[t+1] = f(X[t], U[t]) and cost += l_t(X[t], U[t]).
void rollout_step(const DynModel& model, InstanceWorkspace& ws, int t);
// After the last rollout_step: records the warm-start cost, arms the instance.
void rollout_finish(InstanceWorkspace& ws, const SolveSettings& settings);

// Stage 1: Jacobians about the nominal.
void linearize_step(const DynModel& model, InstanceWorkspace& ws, int t);

// Stage 2: Riccati recursion, called for t = T-1 down to 0.
void backward_begin(InstanceWorkspace& ws);
void backward_step(InstanceWorkspace& ws, const SolveSettings& settings, int t);

// Stage 3: candidate `a` advanced by one timestep.
void linesearch_begin(InstanceWorkspace& ws, int a);
void linesearch_step(const DynModel& model, InstanceWorkspace& ws,
                     const SolveSettings& settings, int a, int t);
// Per-instance reduction over candidates; updates convergence state.
void linesearch_select(InstanceWorkspace& ws, const SolveSettings& settings);

SolveResult finish(InstanceWorkspace&& ws, const SolveSettings& settings);

// One stage of the box-constrained Riccati recursion. On entry (V, v) hold the
// value function at t+1; on exit, at t. Shared by backward_step and
// backward_pass.
void riccati_stage(const Mat& A, const Mat& B, const Mat& C, const Vec& c, double uu_lift,
                   const Vec& x, const Vec& u, const SolveSettings& settings, int t,
                   Mat& V, Vec& v, Mat& K, Vec& k);

}  // namespace dmpc::kernels
