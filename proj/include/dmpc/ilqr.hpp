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

#include <string>
#include <tuple>
#include <vector>

#include "dmpc/boxqp.hpp"
#include "dmpc/dynamics.hpp"
#include "dmpc/qcost.hpp"
#include "dmpc/types.hpp"

namespace dmpc {

using BoolVec = Eigen::Array<bool, Eigen::Dynamic, 1>;

// du_t = K_t dx_t + k_t. Rows of K_t for controls clamped by the stage QP are
// zero.
struct Gains {
  std::vector<Mat> K;
  std::vector<Vec> k;
};

struct SolveSettings {
  int horizon = 10;
  int max_iter = 10;
  Vec u_min;
  Vec u_max;
  std::vector<double> alphas{1.0, 0.5, 0.25, 0.1};
  // Relative cost decrease |J_prev - J| / max(1, |J_prev|) that ends a solve.
  double conv_tol = 1e-6;
  BoxQpSettings boxqp;
  // Q_uu shifts tried in order until the stage Hessian factors.
  std::vector<double> reg_schedule{0.0, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2};

  // Throws ConfigError when inconsistent with `nu` controls.
  void validate(int nu) const;
  // Unbounded controls.
  static SolveSettings unbounded(int nu, int horizon, int max_iter = 10);
};

struct SolveResult {
  Trajectory traj;
  Gains gains;
  double cost = 0.0;
  int iterations = 0;
  bool converged = false;
  // T x nu, true where the control sits on u_min or u_max.
  std::vector<BoolVec> clamped_mask;
  // Accepted costs: warm-start cost first, then one entry per iteration.
  std::vector<double> cost_history;
  // Step size accepted per iteration; 0 means the nominal was kept.
  std::vector<double> alpha_history;
  bool failed = false;
  std::string error;
};

// Exact equality of every field, including the bits of every double.
bool bitwise_equal(const SolveResult& a, const SolveResult& b);

// X[0] = x_init, X[t+1] = step(X[t], U[t]). Throws DivergenceError carrying the
// first timestep whose successor state is non-finite.
Trajectory rollout(const DynModel& model, const Vec& x_init, const std::vector<Vec>& U);

// (A_t, B_t) at every (X[t], U[t]).
std::vector<LinPoint> linearize(const DynModel& model, const Trajectory& traj);

// Box-constrained Riccati sweep about `traj` (Gauss-Newton: no second-order
// dynamics terms). Throws NumericError naming the stage whose Q_uu cannot be
// made positive definite by the regularization schedule.
Gains backward_pass(const std::vector<LinPoint>& lin, const StageCostParams& p,
                    const Trajectory& traj, const SolveSettings& settings);

struct LineSearchOutcome {
  Trajectory traj;
  double cost = 0.0;
  double alpha = 0.0;  // 0: no candidate improved on the nominal
};

LineSearchOutcome forward_linesearch(const DynModel& model, const StageCostParams& p,
                                     const Trajectory& nominal, const Gains& gains,
                                     const SolveSettings& settings);

// Full control-limited iLQR solve. This is the serial reference for the
// batched executor: both run the same per-timestep kernels in the same order.
SolveResult solve(const DynModel& model, const Vec& x_init, const StageCostParams& p,
                  const std::vector<Vec>& U_warm, const SolveSettings& settings);

// Receding-horizon warm start: drop U[0] and repeat the last control.
std::vector<Vec> shift_warm_start(const std::vector<Vec>& U);

}  // namespace dmpc
