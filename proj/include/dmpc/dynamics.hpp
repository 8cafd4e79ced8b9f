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

#include "dmpc/types.hpp"

namespace dmpc {

enum class ModelKind { kDoubleIntegrator, kPlanarQuadrotor, kLinear };

// Physical parameters of the planar quadrotor. The state is
// [p_x, p_y, theta, v_x, v_y, omega] with p_y pointing up, and the controls
// are the left and right rotor thrusts in newtons.
struct QuadrotorParams {
  double mass = 1.0;        // kg
  double arm_length = 0.25; // m
  double inertia = 0.05;    // kg m^2
  double gravity = 9.81;    // m/s^2
};

// Discrete-time dynamics x' = x + dt * f_c(x, u) (explicit Euler), or a
// user-supplied linear map for the kLinear kind.
class DynModel {
 public:
  // d-dimensional double integrator: x = [p; v], u = a.
  static DynModel double_integrator(int dim, double dt);
  static DynModel planar_quadrotor(double dt, QuadrotorParams params = {});
  // x' = A x + B u. dt is informational only.
  static DynModel linear(Mat A, Mat B, double dt = 1.0);

  ModelKind kind() const { return kind_; }
  int nx() const { return nx_; }
  int nu() const { return nu_; }
  double dt() const { return dt_; }
  const QuadrotorParams& quad() const { return quad_; }
  std::string name() const;

  // Thrust per rotor that holds the quadrotor at hover.
  double hover_thrust() const { return 0.5 * quad_.mass * quad_.gravity; }

 private:
  DynModel() = default;

  ModelKind kind_ = ModelKind::kDoubleIntegrator;
  int nx_ = 0;
  int nu_ = 0;
  int dim_ = 0;
  double dt_ = 0.0;
  QuadrotorParams quad_;
  Mat A_;  // kLinear and kDoubleIntegrator
  Mat B_;

  friend void step_into(const DynModel&, const Eigen::Ref<const Vec>&,
                        const Eigen::Ref<const Vec>&, Eigen::Ref<Vec>);
  friend void jacobians_into(const DynModel&, const Eigen::Ref<const Vec>&,
                             const Eigen::Ref<const Vec>&, Eigen::Ref<Mat>,
                             Eigen::Ref<Mat>);
};

struct LinPoint {
  Mat A;
  Mat B;
};

// Validating entry points.
Vec step(const DynModel& model, const Vec& x, const Vec& u);
LinPoint jacobians(const DynModel& model, const Vec& x, const Vec& u);

// Unchecked kernels for the solver's inner loops. `out` must not alias x.
void step_into(const DynModel& model, const Eigen::Ref<const Vec>& x,
               const Eigen::Ref<const Vec>& u, Eigen::Ref<Vec> out);
void jacobians_into(const DynModel& model, const Eigen::Ref<const Vec>& x,
                    const Eigen::Ref<const Vec>& u, Eigen::Ref<Mat> A,
                    Eigen::Ref<Mat> B);

}  // namespace dmpc
