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

#include "dmpc/raceenv.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace dmpc {
namespace {

using json = nlohmann::json;

Vec vec2(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 2) throw ConfigError(what + ": expected [x, y]");
  return Vec{{j[0].get<double>(), j[1].get<double>()}};
}

double cross2(const Vec& a, const Vec& b) { return a(0) * b(1) - a(1) * b(0); }

}  // namespace

void TrackSpec::validate() const {
  if (gates.size() < 2) throw ConfigError("track: need at least 2 gates");
  if (laps < 1) throw ConfigError("track: laps must be >= 1");
  if (spawn.size() != 6) throw ConfigError("track: spawn must be a 6-dim planar quadrotor state");
  for (std::size_t i = 0; i < gates.size(); ++i) {
    const Gate& g = gates[i];
    if (g.center.size() != 2 || g.normal.size() != 2) {
      throw ConfigError("track: gate " + std::to_string(i) + " needs 2-d center and normal");
    }
    if (!(g.width > 0.0)) throw ConfigError("track: gate " + std::to_string(i) + " width <= 0");
    if (std::abs(g.normal.norm() - 1.0) > 1e-9) {
      throw ConfigError("track: gate " + std::to_string(i) + " normal is not unit length");
    }
  }
  if (!(x_min < x_max && y_min < y_max)) throw ConfigError("track: empty arena");
}

TrackSpec parse_track(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("track: ") + e.what());
  }
  try {
    const json units = j.value("units", json::object());
    if (units.value("length", "m") != "m" || units.value("angle", "rad") != "rad") {
      throw ConfigError("track: units.length must be \"m\" and units.angle \"rad\"");
    }
    TrackSpec t;
    t.name = j.value("name", "track");
    t.laps = j.value("laps", 1);
    for (const json& g : j.at("gates")) {
      Gate gate;
      gate.center = vec2(g.at("center"), "track.gates.center");
      if (g.contains("normal")) {
        gate.normal = vec2(g.at("normal"), "track.gates.normal");
      } else {
        const double a = g.at("heading").get<double>();
        gate.normal = Vec{{std::cos(a), std::sin(a)}};
      }
      gate.width = g.at("width").get<double>();
      t.gates.push_back(std::move(gate));
    }
    const json& spawn = j.at("spawn");
    t.spawn = Vec::Zero(6);
    const Vec p = vec2(spawn.at("position"), "track.spawn.position");
    t.spawn(0) = p(0);
    t.spawn(1) = p(1);
    t.spawn(2) = spawn.value("theta", 0.0);
    if (spawn.contains("velocity")) {
      const Vec v = vec2(spawn.at("velocity"), "track.spawn.velocity");
      t.spawn(3) = v(0);
      t.spawn(4) = v(1);
    }
    t.spawn(5) = spawn.value("omega", 0.0);
    if (j.contains("arena")) {
      const json& a = j.at("arena");
      const Vec xs = vec2(a.at("x"), "track.arena.x");
      const Vec ys = vec2(a.at("y"), "track.arena.y");
      t.x_min = xs(0);
      t.x_max = xs(1);
      t.y_min = ys(0);
      t.y_max = ys(1);
    }
    t.validate();
    return t;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("track: ") + e.what());
  }
}

TrackSpec load_track(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("track: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_track(ss.str());
}

std::string to_string(DoneReason r) {
  switch (r) {
    case DoneReason::kNone: return "none";
    case DoneReason::kLapComplete: return "lap_complete";
    case DoneReason::kGateMissed: return "gate_missed";
    case DoneReason::kOutOfBounds: return "out_of_bounds";
    case DoneReason::kTimeout: return "timeout";
  }
  return "unknown";
}

RaceEnv::RaceEnv(TrackSpec track, DynModel model, EnvConfig config)
    : track_(std::move(track)), model_(std::move(model)), config_(config) {
  track_.validate();
  if (model_.kind() != ModelKind::kPlanarQuadrotor) {
    throw ConfigError("raceenv: the environment needs the planar quadrotor model");
  }
  if (!(config_.timeout > 0.0)) throw ConfigError("raceenv: timeout must be > 0");
}

Vec RaceEnv::u_min() const { return Vec::Zero(2); }
Vec RaceEnv::u_max() const { return Vec::Constant(2, 2.0 * model_.hover_thrust()); }

EnvState RaceEnv::reset(std::mt19937_64& rng) const {
  EnvState s;
  s.x = track_.spawn;
  std::normal_distribution<double> nd(0.0, 1.0);
  // Draw all six regardless of sigma so the stream position does not depend
  // on the configuration.
  double e[6];
  for (double& v : e) v = nd(rng);
  s.x(0) += config_.spawn_sigma_pos * e[0];
  s.x(1) += config_.spawn_sigma_pos * e[1];
  s.x(2) += config_.spawn_sigma_theta * e[2];
  s.x(3) += config_.spawn_sigma_vel * e[3];
  s.x(4) += config_.spawn_sigma_vel * e[4];
  s.x(5) += config_.spawn_sigma_theta * e[5];
  return s;
}

int RaceEnv::gate_after(const EnvState& s) const {
  const int n = static_cast<int>(track_.gates.size());
  if (s.next_gate + 1 < n) return s.next_gate + 1;
  return s.lap + 1 < track_.laps ? 0 : s.next_gate;
}

Vec RaceEnv::observe(const EnvState& s) const {
  const Gate& g1 = track_.gates[s.next_gate];
  const Gate& g2 = track_.gates[gate_after(s)];
  const Vec p = s.x.head(2);
  Vec o(kObsDim);
  o.segment(0, 2) = (g1.center - p) / 5.0;
  o.segment(2, 2) = g1.normal;
  o.segment(4, 2) = (g2.center - p) / 5.0;
  o(6) = std::sin(s.x(2));
  o(7) = std::cos(s.x(2));
  o.segment(8, 2) = s.x.segment(3, 2) / 5.0;
  o(10) = s.x(5) / 10.0;
  return o;
}

Vec RaceEnv::mpc_state(const EnvState& s) const {
  Vec x = s.x;
  x.head(2) -= track_.gates[s.next_gate].center;
  return x;
}

RaceEnv::StepResult RaceEnv::step(const EnvState& s, const Vec& u_in) const {
  if (s.done) throw ConfigError("raceenv: step on a finished episode");
  if (u_in.size() != 2) throw ConfigError("raceenv: control must be 2-dim");
  const Vec u = u_in.cwiseMax(u_min()).cwiseMin(u_max());
  StepResult r;
  EnvState& n = r.state;
  n = s;
  step_into(model_, s.x, u, n.x);
  n.steps = s.steps + 1;
  n.time = n.steps * model_.dt();

  double reward = -config_.time_penalty * model_.dt();
  if (!n.x.allFinite()) {
    n.x = s.x;
    n.done = true;
    n.reason = DoneReason::kOutOfBounds;
    r.reward = reward - config_.crash_penalty;
    return r;
  }

  const Gate& g = track_.gates[s.next_gate];
  const Vec p0 = s.x.head(2);
  const Vec p1 = n.x.head(2);
  const double progress = (g.center - p0).norm() - (g.center - p1).norm();
  reward += config_.progress_gain *
            std::clamp(progress, -config_.progress_cap, config_.progress_cap);

  // Gate plane crossing, negative side to non-negative side.
  const double d0 = g.normal.dot(p0 - g.center);
  const double d1 = g.normal.dot(p1 - g.center);
  if (d0 < 0.0 && d1 >= 0.0) {
    const double frac = d0 / (d0 - d1);
    const Vec hit = p0 + frac * (p1 - p0);
    const double lateral = std::abs(cross2(g.normal, hit - g.center));
    const double half = 0.5 * g.width;
    if (lateral <= half) {
      reward += config_.gate_bonus;
      ++n.gates_passed;
      if (s.next_gate + 1 < static_cast<int>(track_.gates.size())) {
        n.next_gate = s.next_gate + 1;
      } else if (s.lap + 1 < track_.laps) {
        n.next_gate = 0;
        n.lap = s.lap + 1;
      } else {
        n.done = true;
        n.reason = DoneReason::kLapComplete;
      }
    } else if (lateral <= g.width) {
      n.done = true;
      n.reason = DoneReason::kGateMissed;
    }
  }

  if (!n.done) {
    const bool outside = p1(0) < track_.x_min || p1(0) > track_.x_max || p1(1) < track_.y_min ||
                         p1(1) > track_.y_max || std::abs(n.x(2)) > config_.max_tilt;
    if (outside) {
      n.done = true;
      n.reason = DoneReason::kOutOfBounds;
    } else if (n.time >= config_.timeout - 1e-9) {
      n.done = true;
      n.reason = DoneReason::kTimeout;
    }
  }
  if (n.done && (n.reason == DoneReason::kGateMissed || n.reason == DoneReason::kOutOfBounds)) {
    reward -= config_.crash_penalty;
  }
  r.reward = reward;
  return r;
}

std::optional<double> lap_time(const std::vector<EnvState>& episode) {
  if (episode.empty()) return std::nullopt;
  const EnvState& last = episode.back();
  if (!last.done || last.reason != DoneReason::kLapComplete) return std::nullopt;
  return last.time;
}

void write_trajectory_csv(std::ostream& os, const std::vector<TrajectoryRow>& rows) {
  os << "t,x,y,theta,vx,vy,omega,u1,u2,gate_idx,reward\n";
  os << std::setprecision(10);
  for (const TrajectoryRow& r : rows) {
    os << r.t;
    for (int i = 0; i < 6; ++i) os << ',' << r.x(i);
    os << ',' << r.u(0) << ',' << r.u(1) << ',' << r.gate_idx << ',' << r.reward << '\n';
  }
}

}  // namespace dmpc
