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
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dmpc/dynamics.hpp"
#include "dmpc/types.hpp"

namespace dmpc {

struct Gate {
  Vec center;  // m, (x, y) with y up
  Vec normal;  // unit, direction of travel through the gate
  double width = 1.0;  // m
};

struct TrackSpec {
  std::string name;
  std::vector<Gate> gates;
  int laps = 1;
  Vec spawn;  // planar quadrotor state
  // Arena box; leaving it ends the episode.
  double x_min = -10.0, x_max = 10.0, y_min = 0.0, y_max = 10.0;

  void validate() const;
};

// JSON track file. Positions and widths in "m"; the "units" block is checked
// so a file written in other units is rejected rather than misread.
TrackSpec load_track(const std::string& path);
TrackSpec parse_track(const std::string& json_text);

struct EnvConfig {
  double progress_gain = 1.0;  // k_p
  double progress_cap = 1.0;   // |progress term| per step
  double gate_bonus = 10.0;
  double crash_penalty = 10.0;
  double time_penalty = 0.1;  // per second
  double timeout = 20.0;      // s
  double max_tilt = 1.4;      // rad
  // Spawn perturbation standard deviations.
  double spawn_sigma_pos = 0.1;
  double spawn_sigma_vel = 0.1;
  double spawn_sigma_theta = 0.05;
};

enum class DoneReason { kNone, kLapComplete, kGateMissed, kOutOfBounds, kTimeout };
std::string to_string(DoneReason r);

struct EnvState {
  Vec x;
  int next_gate = 0;
  int lap = 0;
  int steps = 0;
  double time = 0.0;  // steps * dt
  bool done = false;
  DoneReason reason = DoneReason::kNone;
  int gates_passed = 0;
};

// Observation layout, fixed scaling:
//   [0:2)  next gate center - position, / 5 m
//   [2:4)  next gate normal
//   [4:6)  gate after next center - position, / 5 m
//   [6]    sin(theta)   [7] cos(theta)
//   [8:10) velocity, / 5 m/s
//   [10]   angular rate, / 10 rad/s
inline constexpr int kObsDim = 11;

class RaceEnv {
 public:
  RaceEnv(TrackSpec track, DynModel model, EnvConfig config = {});

  const TrackSpec& track() const { return track_; }
  const DynModel& model() const { return model_; }
  const EnvConfig& config() const { return config_; }

  EnvState reset(std::mt19937_64& rng) const;
  Vec observe(const EnvState& s) const;
  // Controller frame: drone state with positions relative to the next gate.
  Vec mpc_state(const EnvState& s) const;

  struct StepResult {
    EnvState state;
    double reward = 0.0;
  };
  // u is clamped to [0, m g] per rotor.
  StepResult step(const EnvState& s, const Vec& u) const;

  Vec u_min() const;
  Vec u_max() const;
  // Gate after `next_gate`, wrapping to the next lap; the last gate of the
  // last lap points at itself.
  int gate_after(const EnvState& s) const;

 private:
  TrackSpec track_;
  DynModel model_;
  EnvConfig config_;
};

// Episode time at the final gate passage, or nothing if the episode did not
// complete its laps.
std::optional<double> lap_time(const std::vector<EnvState>& episode);

struct TrajectoryRow {
  double t = 0.0;
  Vec x;
  Vec u;
  int gate_idx = 0;
  double reward = 0.0;
};

// Header: t,x,y,theta,vx,vy,omega,u1,u2,gate_idx,reward
void write_trajectory_csv(std::ostream& os, const std::vector<TrajectoryRow>& rows);

}  // namespace dmpc
