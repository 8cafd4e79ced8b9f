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

#include "dmpc/gradlayer.hpp"

#include <string>
#include <utility>

namespace dmpc {

BackwardSeed BackwardSeed::zero(int nx, int nu, int horizon) {
  BackwardSeed s;
  s.dL_dX.assign(horizon + 1, Vec::Zero(nx));
  s.dL_dU.assign(horizon, Vec::Zero(nu));
  return s;
}

BackwardSeed BackwardSeed::operator+(const BackwardSeed& other) const {
  if (dL_dX.size() != other.dL_dX.size() || dL_dU.size() != other.dL_dU.size()) {
    throw ConfigError("BackwardSeed: horizon mismatch");
  }
  BackwardSeed s = *this;
  for (std::size_t t = 0; t < dL_dX.size(); ++t) s.dL_dX[t] += other.dL_dX[t];
  for (std::size_t t = 0; t < dL_dU.size(); ++t) s.dL_dU[t] += other.dL_dU[t];
  return s;
}

namespace kernels {

void GradWorkspace::init(const SolveResult& r, const std::vector<LinPoint>& l,
                         const StageCostParams& p, const BackwardSeed& s) {
  const int T = r.traj.horizon();
  const int nx = p.nx();
  const int nu = p.nu();
  if (p.horizon() != T || static_cast<int>(l.size()) != T ||
      static_cast<int>(r.clamped_mask.size()) != T) {
    throw ConfigError("gradlayer: horizon mismatch between result, linearization and cost");
  }
  if (static_cast<int>(s.dL_dX.size()) != T + 1 || static_cast<int>(s.dL_dU.size()) != T) {
    throw ConfigError("gradlayer: seed horizon does not match the solve");
  }
  for (const Vec& g : s.dL_dX) {
    if (g.size() != nx) throw ConfigError("gradlayer: seed state gradient has wrong size");
  }
  for (const Vec& g : s.dL_dU) {
    if (g.size() != nu) throw ConfigError("gradlayer: seed control gradient has wrong size");
  }
  result = &r;
  lin = &l;
  params = &p;
  seed = &s;
  K.assign(T, Mat::Zero(nu, nx));
  k.assign(T, Vec::Zero(nu));
  V = Mat::Zero(nx, nx);
  v = s.dL_dX[T];
  dx.assign(T + 1, Vec::Zero(nx));
  du.assign(T, Vec::Zero(nu));
  lambda = s.dL_dX[T];
  out = GradOutput{};
  out.dC.assign(T, Mat::Zero(nx + nu, nx + nu));
  out.dc.assign(T, Vec::Zero(nx + nu));
  out.dx_init = Vec::Zero(nx);
  out.approximate = !r.converged;
}

void GradWorkspace::fail(const std::string& what) {
  out.failed = true;
  out.error = what;
}

void grad_riccati_step(GradWorkspace& ws, int t) {
  if (ws.out.failed) return;
  const Mat& A = (*ws.lin)[t].A;
  const Mat& B = (*ws.lin)[t].B;
  const Mat& C = ws.params->C(t);
  const Eigen::Index nx = A.rows();
  const Eigen::Index nu = B.cols();
  const BoolVec& clamped = ws.result->clamped_mask[t];

  Vec Qx = ws.seed->dL_dX[t];
  Qx.noalias() += A.transpose() * ws.v;
  Vec Qu = ws.seed->dL_dU[t];
  Qu.noalias() += B.transpose() * ws.v;
  Mat VA(nx, nx);
  VA.noalias() = ws.V * A;
  Mat VB(nx, nu);
  VB.noalias() = ws.V * B;
  Mat Qxx = C.topLeftCorner(nx, nx);
  Qxx.noalias() += A.transpose() * VA;
  Mat Qux = C.bottomLeftCorner(nu, nx);
  Qux.noalias() += B.transpose() * VA;
  Mat Quu = C.bottomRightCorner(nu, nu);
  Quu.noalias() += B.transpose() * VB;
  Quu = (0.5 * (Quu + Quu.transpose())).eval();
  Quu.diagonal().array() += ws.params->uu_lift(t);

  for (Eigen::Index i = 0; i < nu; ++i) {
    if (!clamped(i)) continue;
    Qu(i) = 0.0;
    Qux.row(i).setZero();
    Quu.row(i).setZero();
    Quu.col(i).setZero();
    Quu(i, i) = 1.0;
  }

  Eigen::LLT<Mat> llt(Quu);
  if (llt.info() != Eigen::Success) {
    throw NumericError("gradlayer: reduced Q_uu is singular at stage " + std::to_string(t));
  }
  Mat& K = ws.K[t];
  Vec& k = ws.k[t];
  K = -llt.solve(Qux);
  k = -llt.solve(Qu);

  const Vec Quu_k = Quu * k;
  ws.v = Qx;
  ws.v.noalias() += K.transpose() * Quu_k;
  ws.v.noalias() += K.transpose() * Qu;
  ws.v.noalias() += Qux.transpose() * k;
  Mat Quu_K(nu, nx);
  Quu_K.noalias() = Quu * K;
  ws.V = Qxx;
  ws.V.noalias() += K.transpose() * Quu_K;
  ws.V.noalias() += K.transpose() * Qux;
  ws.V.noalias() += Qux.transpose() * K;
  ws.V = (0.5 * (ws.V + ws.V.transpose())).eval();
}

void grad_rollout_step(GradWorkspace& ws, int t) {
  if (ws.out.failed) return;
  const Mat& A = (*ws.lin)[t].A;
  const Mat& B = (*ws.lin)[t].B;
  ws.du[t] = ws.k[t];
  ws.du[t].noalias() += ws.K[t] * ws.dx[t];
  ws.dx[t + 1].noalias() = A * ws.dx[t];
  ws.dx[t + 1].noalias() += B * ws.du[t];
}

void grad_costate_step(GradWorkspace& ws, int t) {
  if (ws.out.failed) return;
  const Mat& A = (*ws.lin)[t].A;
  const Mat& C = ws.params->C(t);
  const Eigen::Index nx = A.rows();
  const Eigen::Index nu = ws.du[t].size();

  Vec dz(nx + nu);
  dz << ws.dx[t], ws.du[t];
  Vec z(nx + nu);
  z << ws.result->traj.X[t], ws.result->traj.U[t];

  // lambda_t = dL/dx_t + [C dz]_x + A' lambda_{t+1}
  Vec next = ws.seed->dL_dX[t];
  next.noalias() += C.topRows(nx) * dz;
  next.noalias() += A.transpose() * ws.lambda;
  ws.lambda = std::move(next);

  ws.out.dc[t] = dz;
  Mat outer(nx + nu, nx + nu);
  outer.noalias() = dz * z.transpose();
  ws.out.dC[t] = 0.5 * (outer + outer.transpose());
}

GradOutput grad_finish(GradWorkspace&& ws) {
  if (!ws.out.failed) ws.out.dx_init = ws.lambda;
  return std::move(ws.out);
}

}  // namespace kernels

GradOutput backward(const SolveResult& result, const std::vector<LinPoint>& lin,
                    const StageCostParams& p, const BackwardSeed& seed) {
  const int T = result.traj.horizon();
  kernels::GradWorkspace ws;
  ws.init(result, lin, p, seed);
  for (int t = T - 1; t >= 0; --t) kernels::grad_riccati_step(ws, t);
  for (int t = 0; t < T; ++t) kernels::grad_rollout_step(ws, t);
  for (int t = T - 1; t >= 0; --t) kernels::grad_costate_step(ws, t);
  return kernels::grad_finish(std::move(ws));
}

}  // namespace dmpc
