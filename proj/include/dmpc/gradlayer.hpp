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
#include <vector>

#include "dmpc/dynamics.hpp"
#include "dmpc/ilqr.hpp"
#include "dmpc/qcost.hpp"

namespace dmpc {

// Upstream gradient of a scalar loss w.r.t. the optimal trajectory.
struct BackwardSeed {
  std::vector<Vec> dL_dX;  // T+1
  std::vector<Vec> dL_dU;  // T

  static BackwardSeed zero(int nx, int nu, int horizon);
  BackwardSeed operator+(const BackwardSeed& other) const;
};

struct GradOutput {
  std::vector<Mat> dC;  // symmetric, (nx+nu)^2 per timestep
  std::vector<Vec> dc;
  Vec dx_init;
  // Set when the forward solve had not converged: the gradients are those of
  // the LQR approximation at a point that is not a KKT point.
  bool approximate = false;
  bool failed = false;
  std::string error;
};

// Implicit differentiation of the converged solve. Builds the auxiliary LQR
// with the solve's (A_t, B_t, C_t), no dynamics offset and the seed as linear
// cost, with clamped controls eliminated, and solves it once. The result
// depends only on the fixed point, not on how many iterations reached it.
//
// `lin` must be the linearization about result.traj. Throws ConfigError on
// shape mismatches and NumericError when the reduced Q_uu is singular.
GradOutput backward(const SolveResult& result, const std::vector<LinPoint>& lin,
                    const StageCostParams& p, const BackwardSeed& seed);

namespace kernels {

struct GradWorkspace {
  const SolveResult* result = nullptr;
  const std::vector<LinPoint>* lin = nullptr;
  const StageCostParams* params = nullptr;
  const BackwardSeed* seed = nullptr;

  std::vector<Mat> K;
  std::vector<Vec> k;
  Mat V;
  Vec v;
  std::vector<Vec> dx;  // T+1
  std::vector<Vec> du;  // T
  Vec lambda;           // co-state, carried backward
  GradOutput out;

  void init(const SolveResult& r, const std::vector<LinPoint>& l, const StageCostParams& p,
            const BackwardSeed& s);
  void fail(const std::string& what);
};

// Auxiliary Riccati sweep, t = T-1 down to 0.
void grad_riccati_step(GradWorkspace& ws, int t);
// Differential rollout from dx_0 = 0, t = 0 .. T-1.
void grad_rollout_step(GradWorkspace& ws, int t);
// Co-state recursion and parameter gradients, t = T-1 down to 0.
void grad_costate_step(GradWorkspace& ws, int t);
GradOutput grad_finish(GradWorkspace&& ws);

}  // namespace kernels
}  // namespace dmpc
