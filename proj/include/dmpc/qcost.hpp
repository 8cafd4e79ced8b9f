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

#include <vector>

#include "dmpc/types.hpp"

namespace dmpc {

// State and control sequences over a horizon T: X has T+1 entries, U has T.
struct Trajectory {
  std::vector<Vec> X;
  std::vector<Vec> U;

  int horizon() const { return static_cast<int>(U.size()); }
  bool operator==(const Trajectory&) const = default;
};

// Per-timestep quadratic stage cost 1/2 z'C_t z + c_t'z over z = [x; u].
//
// Construction symmetrizes every C_t and records, per timestep, the diagonal
// shift that lifts the smallest eigenvalue of the control-control block to
// kCostRegularization. Cost evaluation uses C_t as given; the Riccati sweeps
// add the shift to their control Hessian. There is no terminal cost.
class StageCostParams {
 public:
  StageCostParams() = default;
  StageCostParams(int nx, int nu, std::vector<Mat> C, std::vector<Vec> c);

  static StageCostParams zero(int nx, int nu, int horizon);
  // Same C_t and c_t at every timestep.
  static StageCostParams constant(int nx, int nu, int horizon, const Mat& C,
                                  const Vec& c);
  // diag(C_t) and c_t given as rows of length nx+nu. Diagonal entries must
  // already respect the regularization floor on the control block.
  static StageCostParams diagonal(int nx, int nu, const std::vector<Vec>& diag,
                                  const std::vector<Vec>& c);

  int nx() const { return nx_; }
  int nu() const { return nu_; }
  int nz() const { return nx_ + nu_; }
  int horizon() const { return static_cast<int>(C_.size()); }
  const Mat& C(int t) const { return C_[t]; }
  const Vec& c(int t) const { return c_[t]; }
  // Diagonal shift on C_uu at t; zero unless C_uu is nearly singular.
  double uu_lift(int t) const { return lift_[t]; }
  // True if any C_uu block needed lifting at construction.
  bool regularized() const { return regularized_; }

 private:
  int nx_ = 0;
  int nu_ = 0;
  std::vector<Mat> C_;
  std::vector<Vec> c_;
  std::vector<double> lift_;
  bool regularized_ = false;
};

double stage_cost(const StageCostParams& p, int t, const Vec& x, const Vec& u);
double total_cost(const StageCostParams& p, const Trajectory& traj);

// Unchecked inner-loop form of stage_cost.
double stage_cost_unchecked(const Mat& C, const Vec& c,
                            const Eigen::Ref<const Vec>& x,
                            const Eigen::Ref<const Vec>& u);

}  // namespace dmpc
