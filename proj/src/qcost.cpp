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

#include "dmpc/qcost.hpp"

#include <string>
#include <utility>

#include <Eigen/Eigenvalues>

namespace dmpc {

StageCostParams::StageCostParams(int nx, int nu, std::vector<Mat> C,
                                 std::vector<Vec> c)
    : nx_(nx), nu_(nu), C_(std::move(C)), c_(std::move(c)) {
  if (nx < 1 || nu < 1) throw ConfigError("stage cost: nx and nu must be >= 1");
  if (C_.size() != c_.size()) {
    throw ConfigError("stage cost: C and c must have the same horizon");
  }
  const int nz = nx + nu;
  lift_.assign(C_.size(), 0.0);
  for (std::size_t t = 0; t < C_.size(); ++t) {
    Mat& Ct = C_[t];
    if (Ct.rows() != nz || Ct.cols() != nz || c_[t].size() != nz) {
      throw ConfigError("stage cost: timestep " + std::to_string(t) +
                        " has wrong dimensions (expected " + std::to_string(nz) + ")");
    }
    if (!Ct.allFinite() || !c_[t].allFinite()) {
      throw NumericError("stage cost: non-finite entry at timestep " + std::to_string(t));
    }
    Ct = 0.5 * (Ct + Ct.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Mat> eig(Ct.bottomRightCorner(nu, nu), Eigen::EigenvaluesOnly);
    const double min_eig = eig.eigenvalues().minCoeff();
    if (min_eig < kCostRegularization) {
      lift_[t] = kCostRegularization - min_eig;
      regularized_ = true;
    }
  }
}

StageCostParams StageCostParams::zero(int nx, int nu, int horizon) {
  return constant(nx, nu, horizon, Mat::Zero(nx + nu, nx + nu), Vec::Zero(nx + nu));
}

StageCostParams StageCostParams::constant(int nx, int nu, int horizon,
                                          const Mat& C, const Vec& c) {
  return StageCostParams(nx, nu, std::vector<Mat>(horizon, C),
                         std::vector<Vec>(horizon, c));
}

StageCostParams StageCostParams::diagonal(int nx, int nu,
                                          const std::vector<Vec>& diag,
                                          const std::vector<Vec>& c) {
  std::vector<Mat> C;
  C.reserve(diag.size());
  for (const Vec& d : diag) C.push_back(d.asDiagonal());
  return StageCostParams(nx, nu, std::move(C), c);
}

double stage_cost_unchecked(const Mat& C, const Vec& c,
                            const Eigen::Ref<const Vec>& x,
                            const Eigen::Ref<const Vec>& u) {
  const Eigen::Index nx = x.size();
  const Eigen::Index nz = C.rows();
  auto z = [&](Eigen::Index i) { return i < nx ? x(i) : u(i - nx); };
  double total = 0.0;
  for (Eigen::Index i = 0; i < nz; ++i) {
    double row = 0.0;
    for (Eigen::Index j = 0; j < nz; ++j) row += C(i, j) * z(j);
    total += z(i) * (0.5 * row + c(i));
  }
  return total;
}

double stage_cost(const StageCostParams& p, int t, const Vec& x, const Vec& u) {
  if (t < 0 || t >= p.horizon()) {
    throw RangeError("stage_cost: timestep " + std::to_string(t) +
                     " outside horizon " + std::to_string(p.horizon()));
  }
  if (x.size() != p.nx() || u.size() != p.nu()) {
    throw ConfigError("stage_cost: dimension mismatch");
  }
  return stage_cost_unchecked(p.C(t), p.c(t), x, u);
}

double total_cost(const StageCostParams& p, const Trajectory& traj) {
  if (traj.horizon() != p.horizon() ||
      traj.X.size() != static_cast<std::size_t>(p.horizon() + 1)) {
    throw ConfigError("total_cost: trajectory horizon " + std::to_string(traj.horizon()) +
                      " does not match cost horizon " + std::to_string(p.horizon()));
  }
  double total = 0.0;
  for (int t = 0; t < p.horizon(); ++t) {
    total += stage_cost(p, t, traj.X[t], traj.U[t]);
  }
  return total;
}

}  // namespace dmpc
