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

#include "dmpc/dynamics.hpp"

#include <cmath>
#include <utility>

namespace dmpc {

DynModel DynModel::double_integrator(int dim, double dt) {
  if (dim < 1) throw ConfigError("double integrator: dim must be >= 1");
  if (!(dt > 0.0)) throw ConfigError("double integrator: dt must be > 0");
  DynModel m;
  m.kind_ = ModelKind::kDoubleIntegrator;
  m.dim_ = dim;
  m.nx_ = 2 * dim;
  m.nu_ = dim;
  m.dt_ = dt;
  m.A_ = Mat::Identity(m.nx_, m.nx_);
  m.A_.topRightCorner(dim, dim) = dt * Mat::Identity(dim, dim);
  m.B_ = Mat::Zero(m.nx_, m.nu_);
  m.B_.bottomRows(dim) = dt * Mat::Identity(dim, dim);
  return m;
}

DynModel DynModel::planar_quadrotor(double dt, QuadrotorParams params) {
  if (!(dt > 0.0)) throw ConfigError("planar quadrotor: dt must be > 0");
  if (!(params.mass > 0.0)) throw ConfigError("planar quadrotor: mass must be > 0");
  if (!(params.inertia > 0.0)) {
    throw ConfigError("planar quadrotor: inertia must be > 0");
  }
  if (!(params.arm_length > 0.0)) {
    throw ConfigError("planar quadrotor: arm_length must be > 0");
  }
  DynModel m;
  m.kind_ = ModelKind::kPlanarQuadrotor;
  m.nx_ = 6;
  m.nu_ = 2;
  m.dt_ = dt;
  m.quad_ = params;
  return m;
}

DynModel DynModel::linear(Mat A, Mat B, double dt) {
  if (A.rows() == 0 || A.rows() != A.cols()) {
    throw ConfigError("linear model: A must be square and non-empty");
  }
  if (B.rows() != A.rows() || B.cols() == 0) {
    throw ConfigError("linear model: B must have as many rows as A");
  }
  if (!A.allFinite() || !B.allFinite()) {
    throw NumericError("linear model: non-finite A or B");
  }
  DynModel m;
  m.kind_ = ModelKind::kLinear;
  m.nx_ = static_cast<int>(A.rows());
  m.nu_ = static_cast<int>(B.cols());
  m.dt_ = dt;
  m.A_ = std::move(A);
  m.B_ = std::move(B);
  return m;
}

std::string DynModel::name() const {
  switch (kind_) {
    case ModelKind::kDoubleIntegrator:
      return "double_integrator";
    case ModelKind::kPlanarQuadrotor:
      return "planar_quadrotor";
    case ModelKind::kLinear:
      return "linear";
  }
  return "unknown";
}

void step_into(const DynModel& model, const Eigen::Ref<const Vec>& x,
               const Eigen::Ref<const Vec>& u, Eigen::Ref<Vec> out) {
  switch (model.kind_) {
    case ModelKind::kDoubleIntegrator:
    case ModelKind::kLinear:
      out.noalias() = model.A_ * x;
      out.noalias() += model.B_ * u;
      return;
    case ModelKind::kPlanarQuadrotor: {
      const QuadrotorParams& q = model.quad_;
      const double dt = model.dt_;
      const double theta = x(2);
      const double thrust = u(0) + u(1);
      const double s = std::sin(theta);
      const double c = std::cos(theta);
      out(0) = x(0) + dt * x(3);
      out(1) = x(1) + dt * x(4);
      out(2) = x(2) + dt * x(5);
      out(3) = x(3) + dt * (-thrust * s / q.mass);
      out(4) = x(4) + dt * (thrust * c / q.mass - q.gravity);
      out(5) = x(5) + dt * (q.arm_length * (u(1) - u(0)) / q.inertia);
      return;
    }
  }
}

void jacobians_into(const DynModel& model, const Eigen::Ref<const Vec>& x,
                    const Eigen::Ref<const Vec>& u, Eigen::Ref<Mat> A,
                    Eigen::Ref<Mat> B) {
  switch (model.kind_) {
    case ModelKind::kDoubleIntegrator:
    case ModelKind::kLinear:
      A = model.A_;
      B = model.B_;
      return;
    case ModelKind::kPlanarQuadrotor: {
      const QuadrotorParams& q = model.quad_;
      const double dt = model.dt_;
      const double theta = x(2);
      const double thrust = u(0) + u(1);
      const double s = std::sin(theta);
      const double c = std::cos(theta);
      A.setIdentity();
      A(0, 3) = dt;
      A(1, 4) = dt;
      A(2, 5) = dt;
      A(3, 2) = -dt * thrust * c / q.mass;
      A(4, 2) = -dt * thrust * s / q.mass;
      B.setZero();
      B(3, 0) = -dt * s / q.mass;
      B(3, 1) = -dt * s / q.mass;
      B(4, 0) = dt * c / q.mass;
      B(4, 1) = dt * c / q.mass;
      B(5, 0) = -dt * q.arm_length / q.inertia;
      B(5, 1) = dt * q.arm_length / q.inertia;
      return;
    }
  }
}

namespace {

void check_inputs(const DynModel& model, const Vec& x, const Vec& u) {
  if (x.size() != model.nx() || u.size() != model.nu()) {
    throw ConfigError("dynamics: expected x of size " + std::to_string(model.nx()) +
                      " and u of size " + std::to_string(model.nu()) + ", got " +
                      std::to_string(x.size()) + " and " + std::to_string(u.size()));
  }
  if (!x.allFinite() || !u.allFinite()) {
    throw NumericError("dynamics: non-finite state or control");
  }
}

}  // namespace

Vec step(const DynModel& model, const Vec& x, const Vec& u) {
  check_inputs(model, x, u);
  Vec out(model.nx());
  step_into(model, x, u, out);
  return out;
}

LinPoint jacobians(const DynModel& model, const Vec& x, const Vec& u) {
  check_inputs(model, x, u);
  LinPoint lp{Mat(model.nx(), model.nx()), Mat(model.nx(), model.nu())};
  jacobians_into(model, x, u, lp.A, lp.B);
  return lp;
}

}  // namespace dmpc
