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

#include "dmpc/trainer.hpp"

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <ostream>

#include <json.hpp>

namespace dmpc {
namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

Vec from_std(const std::vector<double>& v) {
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t which) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(which)};
  return std::mt19937_64(seq);
}

}  // namespace

void TrainConfig::validate() const {
  auto fail = [](const std::string& key, const std::string& what) {
    throw ConfigError("train." + key + ": " + what);
  };
  if (!(gamma >= 0.0 && gamma <= 1.0)) fail("gamma", "must be in [0, 1]");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) fail("gae_lambda", "must be in [0, 1]");
  if (steps_per_update < 1) fail("steps_per_update", "must be >= 1");
  if (minibatch_size < 1) fail("minibatch_size", "must be >= 1");
  if (sgd_epochs < 1) fail("sgd_epochs", "must be >= 1");
  if (!(clip_range > 0.0)) fail("clip_range", "must be > 0");
  if (!(lr_start > 0.0) || !(lr_end >= 0.0)) fail("lr_start", "learning rates must be positive");
  if (!(value_coef >= 0.0)) fail("value_coef", "must be >= 0");
  if (!(grad_clip > 0.0)) fail("grad_clip", "must be > 0");
  if (total_steps < 0) fail("total_steps", "must be >= 0");
  if (num_envs < 1) fail("num_envs", "must be >= 1");
  if (checkpoint_every < 0) fail("checkpoint_every", "must be >= 0");
}

GaeResult gae(const std::vector<double>& rewards, const std::vector<double>& values,
              const std::vector<char>& dones, double bootstrap, double gamma, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n) {
    throw ConfigError("gae: rewards, values and dones must have the same length");
  }
  GaeResult out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double next_value = bootstrap;
  double next_adv = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    const double live = dones[k] ? 0.0 : 1.0;
    const double delta = rewards[k] + gamma * live * next_value - values[k];
    next_adv = delta + gamma * lambda * live * next_adv;
    out.advantages[k] = next_adv;
    out.returns[k] = next_adv + values[k];
    next_value = values[k];
  }
  return out;
}

void RolloutBuffer::compute_advantages(double gamma, double lambda) {
  const int N = size();
  advantages.assign(N, 0.0);
  returns.assign(N, 0.0);
  for (int e = 0; e < num_envs; ++e) {
    std::vector<double> r(steps), v(steps);
    std::vector<char> d(steps);
    for (int s = 0; s < steps; ++s) {
      const int i = s * num_envs + e;
      r[s] = rewards[i];
      v[s] = values[i];
      d[s] = dones[i];
    }
    const GaeResult g = gae(r, v, d, bootstrap[e], gamma, lambda);
    for (int s = 0; s < steps; ++s) {
      advantages[s * num_envs + e] = g.advantages[s];
      returns[s * num_envs + e] = g.returns[s];
    }
  }
}

Optimizers::Optimizers(const ActorCritic& policy)
    : actor(policy.actor().num_params()),
      log_std(static_cast<int>(policy.log_std().size())),
      critic(policy.critic().num_params()) {}

UpdateMetrics ppo_update(RolloutBuffer& buf, ActorCritic& policy, Optimizers& opt,
                         const TrainConfig& cfg, double lr, std::mt19937_64& rng,
                         BatchExecutor& exec) {
  const int N = buf.size();
  UpdateMetrics m;
  if (N == 0) return m;
  if (static_cast<int>(buf.advantages.size()) != N) {
    throw ConfigError("ppo_update: advantages have not been computed");
  }
  const bool mpc = policy.kind() == PolicyKind::kAcMpc;
  const int nu = policy.nu();
  const int obs_dim = policy.obs_dim();

  // Normalized advantages.
  const double mean = std::accumulate(buf.advantages.begin(), buf.advantages.end(), 0.0) / N;
  double var = 0.0;
  for (double a : buf.advantages) var += (a - mean) * (a - mean);
  const double stdev = std::sqrt(var / N);
  std::vector<double> adv(N);
  for (int i = 0; i < N; ++i) adv[i] = (buf.advantages[i] - mean) / (stdev + 1e-8);

  std::vector<int> order(N);
  std::iota(order.begin(), order.end(), 0);
  const int mb = std::min(cfg.minibatch_size, N);
  int grad_samples = 0;
  int approx_samples = 0;
  double kl_sum = 0.0, clip_sum = 0.0, pl_sum = 0.0, vl_sum = 0.0;
  int stat_samples = 0;

  for (int epoch = 0; epoch < cfg.sgd_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (int start = 0; start < N; start += mb) {
      const int n = std::min(mb, N - start);
      Mat obs(obs_dim, n);
      Mat act(nu, n);
      std::vector<Vec> x_init;
      std::vector<std::vector<Vec>> warm;
      if (mpc) {
        x_init.reserve(n);
        warm.reserve(n);
      }
      for (int j = 0; j < n; ++j) {
        const int i = order[start + j];
        obs.col(j) = buf.obs.col(i);
        act.col(j) = buf.actions.col(i);
        if (mpc) {
          x_init.push_back(buf.x_init[i]);
          warm.push_back(buf.warm[i]);
        }
      }
      ++m.minibatches;

      ActorEval ev;
      try {
        ev = policy.evaluate_actor(obs, x_init, warm, exec);
      } catch (const Error& e) {
        ++m.aborted_minibatches;
        continue;
      }
      const Vec sigma = policy.sigma();
      const Vec inv_var = sigma.array().square().inverse();
      int n_valid = 0;
      for (char v : ev.valid) n_valid += v ? 1 : 0;
      if (n_valid == 0) {
        ++m.aborted_minibatches;
        continue;
      }

      Mat d_mean = Mat::Zero(nu, n);
      Vec g_log_std = Vec::Zero(nu);
      double policy_loss = 0.0, kl = 0.0, clipped = 0.0;
      for (int j = 0; j < n; ++j) {
        if (!ev.valid[j]) continue;
        const int i = order[start + j];
        const Vec a = act.col(j);
        const Vec mu = ev.mean.col(j);
        const double logp = policy.log_prob(a, mu);
        const double ratio = std::exp(logp - buf.log_probs[i]);
        const double A = adv[i];
        const double clipped_ratio = std::clamp(ratio, 1.0 - cfg.clip_range, 1.0 + cfg.clip_range);
        policy_loss -= std::min(ratio * A, clipped_ratio * A) / n_valid;
        kl += (buf.log_probs[i] - logp) / n_valid;
        if (std::abs(ratio - 1.0) > cfg.clip_range) clipped += 1.0 / n_valid;
        const bool active = A >= 0.0 ? ratio <= 1.0 + cfg.clip_range : ratio >= 1.0 - cfg.clip_range;
        if (!active) continue;
        const double w = -A * ratio / n_valid;  // dLoss/dlogp
        const Vec diff = a - mu;
        d_mean.col(j) = w * diff.cwiseProduct(inv_var);
        g_log_std += w * (diff.cwiseProduct(diff).cwiseProduct(inv_var).array() - 1.0).matrix();
      }
      g_log_std.array() -= cfg.entropy_coef;

      Mlp::Cache ccache;
      Vec ret(n);
      for (int j = 0; j < n; ++j) ret(j) = buf.returns[order[start + j]];
      const Mat V = policy.critic().forward(obs, &ccache);
      const Vec err = V.row(0).transpose() - ret;
      const double value_loss = err.squaredNorm() / n;
      const double loss = policy_loss + cfg.value_coef * value_loss;
      if (!std::isfinite(loss)) {
        ++m.aborted_minibatches;
        continue;
      }

      Vec g_actor = Vec::Zero(policy.actor().num_params());
      Vec g_critic = Vec::Zero(policy.critic().num_params());
      approx_samples += policy.actor_backward(ev, d_mean, g_actor, exec);
      grad_samples += mpc ? n_valid : 0;
      const Mat dV = (cfg.value_coef * 2.0 / n) * err.transpose();
      policy.critic().backward(ccache, dV, g_critic);

      const double norm = std::sqrt(g_actor.squaredNorm() + g_critic.squaredNorm() +
                                    g_log_std.squaredNorm());
      if (!std::isfinite(norm)) {
        ++m.aborted_minibatches;
        continue;
      }
      if (norm > cfg.grad_clip) {
        const double s = cfg.grad_clip / norm;
        g_actor *= s;
        g_critic *= s;
        g_log_std *= s;
      }
      opt.actor.step(policy.actor().params(), g_actor, lr);
      opt.critic.step(policy.critic().params(), g_critic, lr);
      opt.log_std.step(policy.log_std(), g_log_std, lr);

      pl_sum += policy_loss;
      vl_sum += value_loss;
      kl_sum += kl;
      clip_sum += clipped;
      ++stat_samples;
    }
  }
  if (stat_samples > 0) {
    m.policy_loss = pl_sum / stat_samples;
    m.value_loss = vl_sum / stat_samples;
    m.approx_kl = kl_sum / stat_samples;
    m.clip_fraction = clip_sum / stat_samples;
  }
  m.approx_grad_frac = grad_samples > 0 ? static_cast<double>(approx_samples) / grad_samples : 0.0;
  return m;
}

void write_metrics_header(std::ostream& os) {
  os << "update,step,mean_reward,lap_rate,mean_solver_iters,approx_grad_frac,steps_per_sec\n";
}

void write_metrics_row(std::ostream& os, const MetricsRow& r) {
  os << r.update << ',' << r.step << ',' << std::setprecision(10) << r.mean_reward << ','
     << r.lap_rate << ',' << r.mean_solver_iters << ',' << r.approx_grad_frac << ','
     << std::setprecision(6) << r.steps_per_sec << '\n';
}

long resident_kb() {
  std::ifstream in("/proc/self/statm");
  long size = 0, resident = 0;
  if (!(in >> size >> resident)) return -1;
  return resident * (sysconf(_SC_PAGESIZE) / 1024);
}

Checkpoint make_checkpoint(const ActorCritic& policy, const Optimizers* opt, std::int64_t step,
                           int update, const std::string& config_json) {
  const PolicyConfig& pc = policy.config();
  const SolveSettings& s = policy.settings();
  const QuadrotorParams& q = policy.model().quad();
  json meta;
  meta["kind"] = to_string(policy.kind());
  meta["obs_dim"] = policy.obs_dim();
  meta["hidden"] = pc.hidden;
  meta["policy"] = {{"C_lo", pc.C_lo}, {"C_hi", pc.C_hi}, {"c_lo", pc.c_lo},
                    {"c_hi", pc.c_hi}, {"sigma_init_frac", pc.sigma_init_frac},
                    {"actor_output_gain", pc.actor_output_gain}};
  meta["solver"] = {{"T", s.horizon}, {"K", s.max_iter}, {"conv_tol", s.conv_tol},
                    {"u_min", to_std(s.u_min)}, {"u_max", to_std(s.u_max)},
                    {"alphas", s.alphas}};
  meta["model"] = {{"kind", policy.model().name()}, {"dt", policy.model().dt()},
                   {"mass", q.mass}, {"arm_length", q.arm_length}, {"inertia", q.inertia},
                   {"gravity", q.gravity}};
  meta["step"] = step;
  meta["update"] = update;
  meta["config_hash"] = fnv1a(config_json);
  if (!config_json.empty()) meta["config"] = json::parse(config_json);
  Checkpoint ck;
  ck.blocks.emplace_back("actor", policy.actor().params());
  ck.blocks.emplace_back("critic", policy.critic().params());
  ck.blocks.emplace_back("log_std", policy.log_std());
  if (policy.kind() == PolicyKind::kAcMpc) {
    ck.blocks.emplace_back("scaling_lo", policy.scaling().lo);
    ck.blocks.emplace_back("scaling_hi", policy.scaling().hi);
  }
  if (opt) {
    auto add = [&](const std::string& name, const Adam& a) {
      ck.blocks.emplace_back("adam." + name + ".m", a.first_moment());
      ck.blocks.emplace_back("adam." + name + ".v", a.second_moment());
      meta["adam_steps"][name] = a.steps();
    };
    add("actor", opt->actor);
    add("log_std", opt->log_std);
    add("critic", opt->critic);
  }
  ck.header_json = meta.dump();
  return ck;
}

ActorCritic policy_from_checkpoint(const Checkpoint& ck) {
  try {
    const json meta = json::parse(ck.header_json);
    PolicyConfig pc;
    pc.kind = parse_policy_kind(meta.at("kind").get<std::string>());
    pc.hidden = meta.at("hidden").get<std::vector<int>>();
    const json& p = meta.at("policy");
    pc.C_lo = p.at("C_lo");
    pc.C_hi = p.at("C_hi");
    pc.c_lo = p.at("c_lo");
    pc.c_hi = p.at("c_hi");
    pc.sigma_init_frac = p.at("sigma_init_frac");
    pc.actor_output_gain = p.at("actor_output_gain");
    const json& mj = meta.at("model");
    QuadrotorParams q;
    q.mass = mj.at("mass");
    q.arm_length = mj.at("arm_length");
    q.inertia = mj.at("inertia");
    q.gravity = mj.at("gravity");
    const DynModel model = DynModel::planar_quadrotor(mj.at("dt").get<double>(), q);
    const json& sj = meta.at("solver");
    SolveSettings s;
    s.horizon = sj.at("T");
    s.max_iter = sj.at("K");
    s.conv_tol = sj.at("conv_tol");
    s.u_min = from_std(sj.at("u_min").get<std::vector<double>>());
    s.u_max = from_std(sj.at("u_max").get<std::vector<double>>());
    s.alphas = sj.at("alphas").get<std::vector<double>>();
    ActorCritic policy(meta.at("obs_dim").get<int>(), model, s, pc, 0);
    auto assign = [&](Vec& dst, const std::string& name) {
      const Vec& src = ck.block(name);
      if (src.size() != dst.size()) throw ConfigError("checkpoint: block '" + name + "' has wrong size");
      dst = src;
    };
    assign(policy.actor().params(), "actor");
    assign(policy.critic().params(), "critic");
    assign(policy.log_std(), "log_std");
    if (pc.kind == PolicyKind::kAcMpc) {
      CostHeadScaling sc = policy.scaling();
      sc.lo = ck.block("scaling_lo");
      sc.hi = ck.block("scaling_hi");
      policy.set_scaling(std::move(sc));
    }
    return policy;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("checkpoint: bad metadata: ") + e.what());
  }
}

namespace {

void restore_optimizers(const Checkpoint& ck, Optimizers& opt) {
  const json meta = json::parse(ck.header_json);
  if (!meta.contains("adam_steps")) return;
  auto load = [&](const std::string& name, Adam& a) {
    a.restore(ck.block("adam." + name + ".m"), ck.block("adam." + name + ".v"),
              meta.at("adam_steps").at(name).get<std::int64_t>());
  };
  load("actor", opt.actor);
  load("log_std", opt.log_std);
  load("critic", opt.critic);
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const RaceEnv& env, ActorCritic& policy,
                  const TrainOptions& opts) {
  cfg.validate();
  if (policy.obs_dim() != kObsDim) throw ConfigError("train: policy observation size mismatch");
  const bool mpc = policy.kind() == PolicyKind::kAcMpc;
  const int E = cfg.num_envs;
  BatchExecutor exec(opts.workers);
  Optimizers opt(policy);
  TrainResult result;

  std::int64_t step = 0;
  int update = 0;
  if (!opts.resume_from.empty()) {
    const Checkpoint ck = load_checkpoint(opts.resume_from);
    ActorCritic loaded = policy_from_checkpoint(ck);
    if (loaded.actor().num_params() != policy.actor().num_params() ||
        loaded.kind() != policy.kind()) {
      throw ConfigError("train: checkpoint does not match the configured policy");
    }
    policy = std::move(loaded);
    restore_optimizers(ck, opt);
    const json meta = json::parse(ck.header_json);
    step = meta.at("step").get<std::int64_t>();
    update = meta.at("update").get<int>();
  }

  // Independent streams; offsetting by the update counter keeps resumed runs
  // from replaying the random numbers of the first run.
  std::mt19937_64 env_rng = stream(opts.seed, 1 + 4 * static_cast<std::uint64_t>(update));
  std::mt19937_64 act_rng = stream(opts.seed, 2 + 4 * static_cast<std::uint64_t>(update));
  std::mt19937_64 sgd_rng = stream(opts.seed, 3 + 4 * static_cast<std::uint64_t>(update));

  std::ofstream metrics_out;
  std::string ck_path;
  if (!opts.out_dir.empty()) {
    std::filesystem::create_directories(opts.out_dir);
    const std::string metrics_path = opts.out_dir + "/metrics.csv";
    const bool append = !opts.resume_from.empty() && std::filesystem::exists(metrics_path);
    metrics_out.open(metrics_path, append ? std::ios::app : std::ios::trunc);
    if (!append) write_metrics_header(metrics_out);
    ck_path = opts.out_dir + "/checkpoint.bin";
  }
  auto save = [&] {
    if (ck_path.empty()) return;
    save_checkpoint(ck_path, make_checkpoint(policy, &opt, step, update, opts.config_json));
    result.checkpoint_path = ck_path;
  };

  std::vector<EnvState> states(E);
  std::vector<std::vector<Vec>> warm(E);
  std::vector<double> ep_return(E, 0.0);
  for (int e = 0; e < E; ++e) {
    states[e] = env.reset(env_rng);
    if (mpc) warm[e] = policy.hover_warm_start();
  }
  double last_mean_reward = 0.0;
  double last_lap_rate = 0.0;

  while (step < cfg.total_steps) {
    const auto t0 = Clock::now();
    const std::int64_t step_before = step;
    RolloutBuffer buf;
    buf.num_envs = E;
    buf.steps = cfg.steps_per_update;
    const int N = E * cfg.steps_per_update;
    buf.obs.resize(kObsDim, N);
    buf.actions.resize(policy.nu(), N);
    if (mpc) {
      buf.x_init.resize(N);
      buf.warm.resize(N);
    }
    buf.log_probs.resize(N);
    buf.values.resize(N);
    buf.rewards.resize(N);
    buf.dones.resize(N);

    double finished_return = 0.0;
    int finished = 0, laps = 0;
    double iter_sum = 0.0;
    for (int s = 0; s < cfg.steps_per_update; ++s) {
      Mat obs(kObsDim, E);
      std::vector<Vec> x_init;
      if (mpc) x_init.reserve(E);
      for (int e = 0; e < E; ++e) {
        obs.col(e) = env.observe(states[e]);
        if (mpc) x_init.push_back(env.mpc_state(states[e]));
      }
      const Vec values = policy.critic_forward(obs);
      const std::vector<PolicyAction> actions =
          policy.act(obs, x_init, warm, true, act_rng, exec);
      for (int e = 0; e < E; ++e) {
        const int i = s * E + e;
        const PolicyAction& a = actions[e];
        buf.obs.col(i) = obs.col(e);
        buf.actions.col(i) = a.u_raw;
        if (mpc) {
          buf.x_init[i] = x_init[e];
          buf.warm[i] = warm[e];
        }
        buf.log_probs[i] = a.log_prob;
        buf.values[i] = values(e);
        iter_sum += a.solver_iterations;

        double reward = 0.0;
        bool done = false;
        bool lap = false;
        if (a.failed) {
          std::cerr << "train: update " << update << " env " << e << ": " << a.error
                    << "; resetting\n";
          done = true;
        } else {
          const RaceEnv::StepResult r = env.step(states[e], a.u_sampled);
          reward = r.reward;
          done = r.state.done;
          lap = r.state.reason == DoneReason::kLapComplete;
          states[e] = r.state;
        }
        buf.rewards[i] = reward;
        buf.dones[i] = done ? 1 : 0;
        ep_return[e] += reward;
        if (done) {
          finished_return += ep_return[e];
          ++finished;
          laps += lap ? 1 : 0;
          ep_return[e] = 0.0;
          states[e] = env.reset(env_rng);
          if (mpc) warm[e] = policy.hover_warm_start();
        } else if (mpc) {
          warm[e] = shift_warm_start(a.U_plan);
        }
      }
    }
    step += N;

    Mat last_obs(kObsDim, E);
    for (int e = 0; e < E; ++e) last_obs.col(e) = env.observe(states[e]);
    const Vec boot = policy.critic_forward(last_obs);
    buf.bootstrap.assign(boot.data(), boot.data() + E);
    buf.compute_advantages(cfg.gamma, cfg.gae_lambda);

    const double progress =
        std::min(1.0, static_cast<double>(step_before) / static_cast<double>(cfg.total_steps));
    const double lr = cfg.lr_start + (cfg.lr_end - cfg.lr_start) * progress;
    const UpdateMetrics um = ppo_update(buf, policy, opt, cfg, lr, sgd_rng, exec);
    ++update;

    if (finished > 0) {
      last_mean_reward = finished_return / finished;
      last_lap_rate = static_cast<double>(laps) / finished;
    }
    MetricsRow row;
    row.update = update;
    row.step = step;
    row.mean_reward = last_mean_reward;
    row.lap_rate = last_lap_rate;
    row.mean_solver_iters = mpc ? iter_sum / N : 0.0;
    row.approx_grad_frac = um.approx_grad_frac;
    row.steps_per_sec = N / std::chrono::duration<double>(Clock::now() - t0).count();
    result.metrics.push_back(row);
    result.rss_kb.push_back(resident_kb());
    if (metrics_out.is_open()) {
      write_metrics_row(metrics_out, row);
      metrics_out.flush();
    }
    if (cfg.checkpoint_every > 0 && update % cfg.checkpoint_every == 0) save();
  }
  result.steps = step;
  result.updates = update;
  save();
  return result;
}

EpisodeResult run_episode(const ActorCritic& policy, const RaceEnv& env, std::uint64_t seed,
                          bool explore) {
  std::mt19937_64 rng(seed);
  EnvState s = env.reset(rng);
  std::vector<Vec> warm = policy.hover_warm_start();
  EpisodeResult out;
  BatchExecutor exec(1);
  std::vector<EnvState> history{s};
  while (!s.done) {
    const Vec obs = env.observe(s);
    std::vector<Vec> x_init;
    if (policy.kind() == PolicyKind::kAcMpc) x_init.push_back(env.mpc_state(s));
    const std::vector<PolicyAction> a =
        policy.act(Mat(obs), x_init, {warm}, explore, rng, exec);
    if (a[0].failed) {
      out.reason = DoneReason::kOutOfBounds;
      break;
    }
    const RaceEnv::StepResult r = env.step(s, a[0].u_sampled);
    TrajectoryRow row;
    row.t = s.time;
    row.x = s.x;
    row.u = a[0].u_sampled;
    row.gate_idx = s.next_gate;
    row.reward = r.reward;
    out.trajectory.push_back(std::move(row));
    out.total_reward += r.reward;
    if (policy.kind() == PolicyKind::kAcMpc) warm = shift_warm_start(a[0].U_plan);
    s = r.state;
    history.push_back(s);
  }
  if (s.done) out.reason = s.reason;
  out.gates_passed = s.gates_passed;
  out.lap_time = lap_time(history);
  return out;
}

}  // namespace dmpc
