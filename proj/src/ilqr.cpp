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

#include "dmpc/ilqr.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <string>
#include <utility>

#include "dmpc/ilqr_kernels.hpp"

namespace dmpc {

void SolveSettings::validate(int nu) const {
  if (horizon < 0) throw ConfigError("solver: horizon must be >= 0");
  if (max_iter < 0) throw ConfigError("solver: max_iter must be >= 0");
  if (u_min.size() != nu || u_max.size() != nu) {
    throw ConfigError("solver: u_min/u_max must have " + std::to_string(nu) + " entries");
  }
  if (!(u_min.array() < u_max.array()).all()) {
    throw ConfigError("solver: u_min must be strictly below u_max");
  }
  if (alphas.empty()) throw ConfigError("solver: alphas must not be empty");
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    if (!(alphas[i] > 0.0 && alphas[i] <= 1.0)) {
      throw ConfigError("solver: alphas must lie in (0, 1]");
    }
    if (i > 0 && !(alphas[i] < alphas[i - 1])) {
      throw ConfigError("solver: alphas must be strictly decreasing");
    }
  }
  if (!(conv_tol >= 0.0)) throw ConfigError("solver: conv_tol must be >= 0");
  if (reg_schedule.empty()) throw ConfigError("solver: reg_schedule must not be empty");
}

SolveSettings SolveSettings::unbounded(int nu, int horizon, int max_iter) {
  SolveSettings s;
  s.horizon = horizon;
  s.max_iter = max_iter;
  s.u_min = Vec::Constant(nu, -std::numeric_limits<double>::infinity());
  s.u_max = Vec::Constant(nu, std::numeric_limits<double>::infinity());
  return s;
}

namespace {

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }

template <typename Derived>
bool same_bits(const Eigen::MatrixBase<Derived>& a, const Eigen::MatrixBase<Derived>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      if (!same_bits(a(i, j), b(i, j))) return false;
    }
  }
  return true;
}

template <typename T>
bool same_bits(const std::vector<T>& a, const std::vector<T>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!same_bits(a[i], b[i])) return false;
  }
  return true;
}

}  // namespace

bool bitwise_equal(const SolveResult& a, const SolveResult& b) {
  if (a.iterations != b.iterations || a.converged != b.converged ||
      a.failed != b.failed || a.error != b.error) {
    return false;
  }
  if (!same_bits(a.cost, b.cost)) return false;
  if (!same_bits(a.traj.X, b.traj.X) || !same_bits(a.traj.U, b.traj.U)) return false;
  if (!same_bits(a.gains.K, b.gains.K) || !same_bits(a.gains.k, b.gains.k)) return false;
  if (!same_bits(a.cost_history, b.cost_history)) return false;
  if (!same_bits(a.alpha_history, b.alpha_history)) return false;
  if (a.clamped_mask.size() != b.clamped_mask.size()) return false;
  for (std::size_t t = 0; t < a.clamped_mask.size(); ++t) {
    if ((a.clamped_mask[t] != b.clamped_mask[t]).any()) return false;
  }
  return true;
}

namespace kernels {

void InstanceWorkspace::init(const DynModel& model, const Vec& x0,
                             const StageCostParams& p, const std::vector<Vec>& U_warm,
                             const SolveSettings& settings) {
  const int nx = model.nx();
  const int nu = model.nu();
  const int T = settings.horizon;
  if (x0.size() != nx) throw ConfigError("solve: x_init has wrong dimension");
  if (!x0.allFinite()) throw NumericError("solve: non-finite x_init");
  if (p.nx() != nx || p.nu() != nu) {
    throw ConfigError("solve: cost dimensions do not match the model");
  }
  if (p.horizon() != T) {
    throw ConfigError("solve: cost horizon " + std::to_string(p.horizon()) +
                      " does not match solver horizon " + std::to_string(T));
  }
  if (!U_warm.empty() && static_cast<int>(U_warm.size()) != T) {
    throw ConfigError("solve: warm start has wrong horizon");
  }

  x_init = x0;
  params = &p;
  nominal.X.assign(T + 1, Vec::Zero(nx));
  nominal.U.assign(T, Vec::Zero(nu));
  nominal.X[0] = x0;
  for (int t = 0; t < T; ++t) {
    const Vec u = U_warm.empty() ? Vec::Zero(nu) : U_warm[t];
    if (u.size() != nu) throw ConfigError("solve: warm-start control has wrong dimension");
    if (!u.allFinite()) throw NumericError("solve: non-finite warm start");
    nominal.U[t] = u.cwiseMax(settings.u_min).cwiseMin(settings.u_max);
  }
  cost = 0.0;
  A.assign(T, Mat::Zero(nx, nx));
  B.assign(T, Mat::Zero(nx, nu));
  gains.K.assign(T, Mat::Zero(nu, nx));
  gains.k.assign(T, Vec::Zero(nu));
  V = Mat::Zero(nx, nx);
  v = Vec::Zero(nx);
  candidates.assign(settings.alphas.size(), Candidate{});
  for (Candidate& cand : candidates) {
    cand.traj = nominal;
    cand.dx = Vec::Zero(nx);
    cand.du = Vec::Zero(nu);
  }
  cost_history.clear();
  alpha_history.clear();
  iterations = 0;
  converged = false;
  active = true;
  failed = false;
  error.clear();
}

void InstanceWorkspace::fail(const std::string& what) {
  failed = true;
  active = false;
  error = what;
}

void rollout_step(const DynModel& model, InstanceWorkspace& ws, int t) {
  const Vec& x = ws.nominal.X[t];
  const Vec& u = ws.nominal.U[t];
  ws.cost += stage_cost_unchecked(ws.params->C(t), ws.params->c(t), x, u);
  step_into(model, x, u, ws.nominal.X[t + 1]);
  if (!ws.nominal.X[t + 1].allFinite()) {
    throw DivergenceError("rollout diverged at timestep " + std::to_string(t), t);
  }
}

void rollout_finish(InstanceWorkspace& ws, const SolveSettings& settings) {
  ws.cost_history.push_back(ws.cost);
  if (settings.horizon == 0) {
    ws.converged = true;
    ws.active = false;
  } else {
    ws.active = settings.max_iter > 0;
  }
}

void linearize_step(const DynModel& model, InstanceWorkspace& ws, int t) {
  jacobians_into(model, ws.nominal.X[t], ws.nominal.U[t], ws.A[t], ws.B[t]);
}

void backward_begin(InstanceWorkspace& ws) {
  ws.V.setZero();
  ws.v.setZero();
}

void riccati_stage(const Mat& A, const Mat& B, const Mat& C, const Vec& c, double uu_lift,
                   const Vec& x, const Vec& u, const SolveSettings& settings, int t,
                   Mat& V, Vec& v, Mat& K, Vec& k) {
  const Eigen::Index nx = A.rows();
  const Eigen::Index nu = B.cols();

  // The cost is quadratic, so its expansion about (x, u) is exact.
  Vec lz = c;
  lz.noalias() += C.leftCols(nx) * x;
  lz.noalias() += C.rightCols(nu) * u;

  Vec Qx = lz.head(nx);
  Qx.noalias() += A.transpose() * v;
  Vec Qu = lz.tail(nu);
  Qu.noalias() += B.transpose() * v;
  Mat VA(nx, nx);
  VA.noalias() = V * A;
  Mat VB(nx, nu);
  VB.noalias() = V * B;
  Mat Qxx = C.topLeftCorner(nx, nx);
  Qxx.noalias() += A.transpose() * VA;
  Mat Qux = C.bottomLeftCorner(nu, nx);
  Qux.noalias() += B.transpose() * VA;
  Mat Quu = C.bottomRightCorner(nu, nu);
  Quu.noalias() += B.transpose() * VB;
  Quu = (0.5 * (Quu + Quu.transpose())).eval();
  Quu.diagonal().array() += uu_lift;

  Mat Quu_reg(nu, nu);
  Eigen::LLT<Mat> llt;
  bool factored = false;
  for (double lambda : settings.reg_schedule) {
    Quu_reg = Quu;
    Quu_reg.diagonal().array() += lambda;
    llt.compute(Quu_reg);
    if (llt.info() == Eigen::Success) {
      factored = true;
      break;
    }
  }
  if (!factored) {
    throw NumericError("backward pass: Q_uu not positive definite at stage " +
                       std::to_string(t));
  }

  const Vec lo = settings.u_min - u;
  const Vec hi = settings.u_max - u;
  const BoxQpResult qp = boxqp(Quu_reg, Qu, lo, hi, Vec::Zero(nu), settings.boxqp);
  k = qp.u;

  K.setZero();
  std::vector<Eigen::Index> free_idx;
  for (Eigen::Index i = 0; i < nu; ++i) {
    if (qp.free(i)) free_idx.push_back(i);
  }
  if (!free_idx.empty()) {
    const auto nf = static_cast<Eigen::Index>(free_idx.size());
    Mat Hff(nf, nf);
    Mat Qux_f(nf, nx);
    for (Eigen::Index a = 0; a < nf; ++a) {
      for (Eigen::Index b = 0; b < nf; ++b) Hff(a, b) = Quu_reg(free_idx[a], free_idx[b]);
      Qux_f.row(a) = Qux.row(free_idx[a]);
    }
    Eigen::LLT<Mat> llt_free(Hff);
    if (llt_free.info() != Eigen::Success) {
      throw NumericError("backward pass: free block of Q_uu not positive definite at stage " +
                         std::to_string(t));
    }
    const Mat K_free = -llt_free.solve(Qux_f);
    for (Eigen::Index a = 0; a < nf; ++a) K.row(free_idx[a]) = K_free.row(a);
  }

  const Vec Quu_k = Quu * k;
  v = Qx;
  v.noalias() += K.transpose() * Quu_k;
  v.noalias() += K.transpose() * Qu;
  v.noalias() += Qux.transpose() * k;

  Mat Quu_K(nu, nx);
  Quu_K.noalias() = Quu * K;
  V = Qxx;
  V.noalias() += K.transpose() * Quu_K;
  V.noalias() += K.transpose() * Qux;
  V.noalias() += Qux.transpose() * K;
  V = (0.5 * (V + V.transpose())).eval();
}

void backward_step(InstanceWorkspace& ws, const SolveSettings& settings, int t) {
  riccati_stage(ws.A[t], ws.B[t], ws.params->C(t), ws.params->c(t),
                ws.params->uu_lift(t), ws.nominal.X[t],
                ws.nominal.U[t], settings, t, ws.V, ws.v, ws.gains.K[t], ws.gains.k[t]);
}

void linesearch_begin(InstanceWorkspace& ws, int a) {
  Candidate& cand = ws.candidates[a];
  cand.traj.X[0] = ws.x_init;
  cand.cost = 0.0;
  cand.diverged = false;
}

void linesearch_step(const DynModel& model, InstanceWorkspace& ws,
                     const SolveSettings& settings, int a, int t) {
  Candidate& cand = ws.candidates[a];
  if (cand.diverged) return;
  const double alpha = settings.alphas[a];
  const Vec& x = cand.traj.X[t];
  Vec& u = cand.traj.U[t];
  cand.dx = x - ws.nominal.X[t];
  cand.du.noalias() = ws.gains.K[t] * cand.dx;
  u = ws.nominal.U[t] + alpha * ws.gains.k[t] + cand.du;
  u = u.cwiseMax(settings.u_min).cwiseMin(settings.u_max);
  cand.cost += stage_cost_unchecked(ws.params->C(t), ws.params->c(t), x, u);
  step_into(model, x, u, cand.traj.X[t + 1]);
  if (!cand.traj.X[t + 1].allFinite() || !std::isfinite(cand.cost)) {
    cand.diverged = true;
    cand.cost = std::numeric_limits<double>::infinity();
  }
}

void linesearch_select(InstanceWorkspace& ws, const SolveSettings& settings) {
  int best = -1;
  double best_cost = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < ws.candidates.size(); ++a) {
    const Candidate& cand = ws.candidates[a];
    if (!cand.diverged && cand.cost < best_cost) {
      best = static_cast<int>(a);
      best_cost = cand.cost;
    }
  }
  if (best < 0) {
    throw DivergenceError("line search: every candidate diverged", settings.horizon);
  }

  // Improvements at rounding level count as ties, and ties keep the nominal.
  const double previous = ws.cost;
  const double noise = 64.0 * std::numeric_limits<double>::epsilon() *
                       std::max(1.0, std::abs(previous));
  double alpha = 0.0;
  if (best_cost < previous - noise) {
    alpha = settings.alphas[best];
    std::swap(ws.nominal, ws.candidates[best].traj);
    ws.cost = best_cost;
  }
  ws.iterations += 1;
  ws.cost_history.push_back(ws.cost);
  ws.alpha_history.push_back(alpha);

  const double rel = std::abs(previous - ws.cost) / std::max(1.0, std::abs(previous));
  if (alpha == 0.0 || rel <= settings.conv_tol) {
    ws.converged = true;
    ws.active = false;
  } else if (ws.iterations >= settings.max_iter) {
    ws.active = false;
  }
}

SolveResult finish(InstanceWorkspace&& ws, const SolveSettings& settings) {
  SolveResult r;
  r.traj = std::move(ws.nominal);
  r.gains = std::move(ws.gains);
  r.cost = ws.cost;
  r.iterations = ws.iterations;
  r.converged = ws.converged;
  r.cost_history = std::move(ws.cost_history);
  r.alpha_history = std::move(ws.alpha_history);
  r.failed = ws.failed;
  r.error = std::move(ws.error);
  r.clamped_mask.reserve(r.traj.U.size());
  for (const Vec& u : r.traj.U) {
    BoolVec mask(u.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      const double lo = settings.u_min(i);
      const double hi = settings.u_max(i);
      const double tol_lo = 1e-9 * std::max(1.0, std::abs(lo));
      const double tol_hi = 1e-9 * std::max(1.0, std::abs(hi));
      mask(i) = (std::isfinite(lo) && u(i) - lo <= tol_lo) ||
                (std::isfinite(hi) && hi - u(i) <= tol_hi);
    }
    r.clamped_mask.push_back(std::move(mask));
  }
  return r;
}

}  // namespace kernels

Trajectory rollout(const DynModel& model, const Vec& x_init, const std::vector<Vec>& U) {
  if (x_init.size() != model.nx()) throw ConfigError("rollout: x_init has wrong dimension");
  if (!x_init.allFinite()) throw NumericError("rollout: non-finite x_init");
  Trajectory traj;
  traj.U = U;
  traj.X.assign(U.size() + 1, Vec::Zero(model.nx()));
  traj.X[0] = x_init;
  for (std::size_t t = 0; t < U.size(); ++t) {
    if (U[t].size() != model.nu()) throw ConfigError("rollout: control has wrong dimension");
    if (!U[t].allFinite()) throw NumericError("rollout: non-finite control");
    step_into(model, traj.X[t], U[t], traj.X[t + 1]);
    if (!traj.X[t + 1].allFinite()) {
      throw DivergenceError("rollout diverged at timestep " + std::to_string(t),
                            static_cast<int>(t));
    }
  }
  return traj;
}

std::vector<LinPoint> linearize(const DynModel& model, const Trajectory& traj) {
  std::vector<LinPoint> lin;
  lin.reserve(traj.U.size());
  for (int t = 0; t < traj.horizon(); ++t) lin.push_back(jacobians(model, traj.X[t], traj.U[t]));
  return lin;
}

Gains backward_pass(const std::vector<LinPoint>& lin, const StageCostParams& p,
                    const Trajectory& traj, const SolveSettings& settings) {
  const int T = traj.horizon();
  if (static_cast<int>(lin.size()) != T || p.horizon() != T) {
    throw ConfigError("backward_pass: horizon mismatch");
  }
  const int nx = p.nx();
  const int nu = p.nu();
  settings.validate(nu);
  Gains gains;
  gains.K.assign(T, Mat::Zero(nu, nx));
  gains.k.assign(T, Vec::Zero(nu));
  Mat V = Mat::Zero(nx, nx);
  Vec v = Vec::Zero(nx);
  for (int t = T - 1; t >= 0; --t) {
    kernels::riccati_stage(lin[t].A, lin[t].B, p.C(t), p.c(t), p.uu_lift(t), traj.X[t], traj.U[t],
                           settings, t, V, v, gains.K[t], gains.k[t]);
  }
  return gains;
}

LineSearchOutcome forward_linesearch(const DynModel& model, const StageCostParams& p,
                                     const Trajectory& nominal, const Gains& gains,
                                     const SolveSettings& settings) {
  const int T = nominal.horizon();
  if (p.horizon() != T || static_cast<int>(gains.K.size()) != T ||
      static_cast<int>(gains.k.size()) != T) {
    throw ConfigError("forward_linesearch: horizon mismatch");
  }
  settings.validate(model.nu());
  SolveSettings s = settings;
  s.horizon = T;
  kernels::InstanceWorkspace ws;
  ws.init(model, nominal.X[0], p, nominal.U, s);
  ws.nominal = nominal;
  ws.cost = total_cost(p, nominal);
  ws.gains = gains;
  for (std::size_t a = 0; a < s.alphas.size(); ++a) {
    kernels::linesearch_begin(ws, static_cast<int>(a));
    for (int t = 0; t < T; ++t) kernels::linesearch_step(model, ws, s, static_cast<int>(a), t);
  }
  s.max_iter = 1;
  kernels::linesearch_select(ws, s);
  return {std::move(ws.nominal), ws.cost, ws.alpha_history.back()};
}

SolveResult solve(const DynModel& model, const Vec& x_init, const StageCostParams& p,
                  const std::vector<Vec>& U_warm, const SolveSettings& settings) {
  settings.validate(model.nu());
  const int T = settings.horizon;
  const int num_alphas = static_cast<int>(settings.alphas.size());

  kernels::InstanceWorkspace ws;
  ws.init(model, x_init, p, U_warm, settings);
  for (int t = 0; t < T; ++t) kernels::rollout_step(model, ws, t);
  kernels::rollout_finish(ws, settings);

  while (ws.runnable()) {
    for (int t = 0; t < T; ++t) kernels::linearize_step(model, ws, t);
    kernels::backward_begin(ws);
    for (int t = T - 1; t >= 0; --t) kernels::backward_step(ws, settings, t);
    for (int a = 0; a < num_alphas; ++a) {
      kernels::linesearch_begin(ws, a);
      for (int t = 0; t < T; ++t) kernels::linesearch_step(model, ws, settings, a, t);
    }
    kernels::linesearch_select(ws, settings);
  }
  return kernels::finish(std::move(ws), settings);
}

std::vector<Vec> shift_warm_start(const std::vector<Vec>& U) {
  if (U.empty()) return U;
  std::vector<Vec> shifted(U.begin() + 1, U.end());
  shifted.push_back(U.back());
  return shifted;
}

}  // namespace dmpc
