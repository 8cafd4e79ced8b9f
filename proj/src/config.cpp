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

#include "dmpc/config.hpp"

#include <fstream>
#include <sstream>

#ifndef DMPC_DATA_DIR
#define DMPC_DATA_DIR "data"
#endif

namespace dmpc {
namespace {

using json = nlohmann::json;

bool same_kind(const json& def, const json& v) {
  if (def.is_number()) return v.is_number();
  if (def.is_array()) return v.is_array();
  return def.type() == v.type();
}

std::vector<std::string> split(const std::string& key) {
  std::vector<std::string> parts;
  std::stringstream ss(key);
  std::string p;
  while (std::getline(ss, p, '.')) parts.push_back(p);
  return parts;
}

Vec to_vec(const std::vector<double>& v) {
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

std::string bundled_data_dir() { return DMPC_DATA_DIR; }

json RunConfig::defaults() {
  return json::parse(R"({
    "model": {"kind": "planar_quadrotor", "dt": 0.05, "mass": 1.0, "arm_length": 0.25,
              "inertia": 0.05, "gravity": 9.81, "dim": 1},
    "solver": {"T": 2, "K": 5, "conv_tol": 1e-6, "alphas": [1.0, 0.5, 0.25, 0.1],
               "u_min": [], "u_max": [], "mode": "fused"},
    "policy": {"hidden": [512, 512], "C_lo": 1e-3, "C_hi": 10.0, "c_lo": -10.0, "c_hi": 10.0,
               "sigma_init_frac": 0.1, "actor_output_gain": 0.01,
               "nominal_C_diag": [], "nominal_c": []},
    "train": {"mode": "ac_mpc", "gamma": 0.99, "gae_lambda": 0.95, "steps_per_update": 256,
              "minibatch_size": 2048, "sgd_epochs": 10, "clip_range": 0.2, "lr_start": 3e-4,
              "lr_end": 3e-5, "entropy_coef": 0.0, "value_coef": 0.5, "grad_clip": 0.5,
              "total_steps": 200000, "num_envs": 16, "checkpoint_every": 10,
              "grid_T": [], "grid_K": [], "resume": ""},
    "env": {"track": "", "progress_gain": 1.0, "progress_cap": 1.0, "gate_bonus": 10.0,
            "crash_penalty": 10.0, "time_penalty": 0.1, "timeout": 20.0, "max_tilt": 1.4,
            "spawn_sigma_pos": 0.1, "spawn_sigma_vel": 0.1, "spawn_sigma_theta": 0.05},
    "solve": {"scenario": "hover", "problem": "", "B": 1},
    "bench": {"B": [1, 256], "T": [2, 10, 50], "K": 10, "reps": 10, "warmup": 1},
    "eval": {"episodes": 10, "checkpoints": [], "labels": [], "trajectories": true},
    "run": {"seed": 0, "workers": 1, "out": "out"}
  })");
}

RunConfig::RunConfig() : tree_(defaults()) {}

RunConfig RunConfig::from_json_text(const std::string& text) {
  json patch;
  try {
    patch = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: parse error: ") + e.what());
  }
  if (!patch.is_object()) throw ConfigError("config: top level must be an object");
  RunConfig cfg;
  cfg.merge(patch, "");
  return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

void RunConfig::merge(const json& patch, const std::string& prefix) {
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it->is_object()) {
      const json& existing = at(key);
      if (!existing.is_object()) throw ConfigError("config: key '" + key + "' is not a section");
      merge(*it, key);
    } else {
      set_json(key, *it);
    }
  }
}

const json& RunConfig::at(const std::string& dotted_key) const {
  const json* node = &tree_;
  for (const std::string& part : split(dotted_key)) {
    if (!node->is_object() || !node->contains(part)) {
      throw ConfigError("config: unknown key '" + dotted_key + "'");
    }
    node = &(*node)[part];
  }
  return *node;
}

void RunConfig::set_json(const std::string& dotted_key, const json& value) {
  const json& def = at(dotted_key);
  if (def.is_object()) throw ConfigError("config: key '" + dotted_key + "' is a section");
  if (!same_kind(def, value)) {
    throw ConfigError("config: key '" + dotted_key + "' expects " + def.type_name() + ", got " +
                      value.type_name());
  }
  json* node = &tree_;
  for (const std::string& part : split(dotted_key)) node = &(*node)[part];
  *node = value;
}

void RunConfig::set(const std::string& dotted_key, const std::string& value) {
  json v;
  try {
    v = json::parse(value);
  } catch (const json::parse_error&) {
    v = value;
  }
  // A bare word that happens to parse (true, 5) stays typed; a string
  // default accepts the raw text.
  if (at(dotted_key).is_string() && !v.is_string()) v = value;
  set_json(dotted_key, v);
}

std::string RunConfig::echo(bool include_solver) const {
  json t = tree_;
  if (!include_solver) t.erase("solver");
  return t.dump(2) + "\n";
}

DynModel RunConfig::model() const {
  const std::string kind = get<std::string>("model.kind");
  const double dt = get<double>("model.dt");
  if (kind == "planar_quadrotor") {
    QuadrotorParams q;
    q.mass = get<double>("model.mass");
    q.arm_length = get<double>("model.arm_length");
    q.inertia = get<double>("model.inertia");
    q.gravity = get<double>("model.gravity");
    return DynModel::planar_quadrotor(dt, q);
  }
  if (kind == "double_integrator") return DynModel::double_integrator(get<int>("model.dim"), dt);
  throw ConfigError("config: key 'model.kind' must be planar_quadrotor or double_integrator");
}

SolveSettings RunConfig::solver_settings(const DynModel& model) const {
  SolveSettings s;
  s.horizon = get<int>("solver.T");
  s.max_iter = get<int>("solver.K");
  s.conv_tol = get<double>("solver.conv_tol");
  s.alphas = get<std::vector<double>>("solver.alphas");
  const auto lo = get<std::vector<double>>("solver.u_min");
  const auto hi = get<std::vector<double>>("solver.u_max");
  const int nu = model.nu();
  if (model.kind() == ModelKind::kPlanarQuadrotor) {
    s.u_min = lo.empty() ? Vec(Vec::Zero(nu)) : to_vec(lo);
    s.u_max = hi.empty() ? Vec(Vec::Constant(nu, 2.0 * model.hover_thrust())) : to_vec(hi);
  } else {
    s.u_min = lo.empty() ? Vec(Vec::Constant(nu, -1.0)) : to_vec(lo);
    s.u_max = hi.empty() ? Vec(Vec::Constant(nu, 1.0)) : to_vec(hi);
  }
  try {
    s.validate(nu);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("config: solver section: ") + e.what());
  }
  return s;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.gamma = get<double>("train.gamma");
  t.gae_lambda = get<double>("train.gae_lambda");
  t.steps_per_update = get<int>("train.steps_per_update");
  t.minibatch_size = get<int>("train.minibatch_size");
  t.sgd_epochs = get<int>("train.sgd_epochs");
  t.clip_range = get<double>("train.clip_range");
  t.lr_start = get<double>("train.lr_start");
  t.lr_end = get<double>("train.lr_end");
  t.entropy_coef = get<double>("train.entropy_coef");
  t.value_coef = get<double>("train.value_coef");
  t.grad_clip = get<double>("train.grad_clip");
  t.total_steps = get<std::int64_t>("train.total_steps");
  t.num_envs = get<int>("train.num_envs");
  t.checkpoint_every = get<int>("train.checkpoint_every");
  t.validate();
  return t;
}

PolicyConfig RunConfig::policy_config() const {
  PolicyConfig p;
  p.kind = parse_policy_kind(get<std::string>("train.mode"));
  p.hidden = get<std::vector<int>>("policy.hidden");
  p.C_lo = get<double>("policy.C_lo");
  p.C_hi = get<double>("policy.C_hi");
  p.c_lo = get<double>("policy.c_lo");
  p.c_hi = get<double>("policy.c_hi");
  p.sigma_init_frac = get<double>("policy.sigma_init_frac");
  p.actor_output_gain = get<double>("policy.actor_output_gain");
  const auto C_nom = get<std::vector<double>>("policy.nominal_C_diag");
  const auto c_nom = get<std::vector<double>>("policy.nominal_c");
  p.nominal_C_diag = Eigen::Map<const Vec>(C_nom.data(), static_cast<Eigen::Index>(C_nom.size()));
  p.nominal_c = Eigen::Map<const Vec>(c_nom.data(), static_cast<Eigen::Index>(c_nom.size()));
  return p;
}

EnvConfig RunConfig::env_config() const {
  EnvConfig e;
  e.progress_gain = get<double>("env.progress_gain");
  e.progress_cap = get<double>("env.progress_cap");
  e.gate_bonus = get<double>("env.gate_bonus");
  e.crash_penalty = get<double>("env.crash_penalty");
  e.time_penalty = get<double>("env.time_penalty");
  e.timeout = get<double>("env.timeout");
  e.max_tilt = get<double>("env.max_tilt");
  e.spawn_sigma_pos = get<double>("env.spawn_sigma_pos");
  e.spawn_sigma_vel = get<double>("env.spawn_sigma_vel");
  e.spawn_sigma_theta = get<double>("env.spawn_sigma_theta");
  return e;
}

std::string RunConfig::track_path() const {
  const std::string p = get<std::string>("env.track");
  return p.empty() ? bundled_data_dir() + "/track.json" : p;
}

}  // namespace dmpc
