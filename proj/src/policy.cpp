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

#include "dmpc/policy.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include <json.hpp>

namespace dmpc {
namespace {

constexpr char kMagic[8] = {'D', 'M', 'P', 'C', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

double sigmoid(double y) { return 1.0 / (1.0 + std::exp(-y)); }

double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace

std::string to_string(PolicyKind k) { return k == PolicyKind::kAcMpc ? "ac_mpc" : "ac_mlp"; }

PolicyKind parse_policy_kind(const std::string& s) {
  if (s == "ac_mpc") return PolicyKind::kAcMpc;
  if (s == "ac_mlp") return PolicyKind::kAcMlp;
  throw ConfigError("unknown policy mode '" + s + "' (expected ac_mpc or ac_mlp)");
}

CostHeadScaling CostHeadScaling::uniform(int horizon, int nz, double C_lo, double C_hi,
                                         double c_lo, double c_hi) {
  CostHeadScaling s;
  s.horizon = horizon;
  s.nz = nz;
  s.lo.resize(2 * nz * horizon);
  s.hi.resize(2 * nz * horizon);
  for (int t = 0; t < horizon; ++t) {
    s.lo.segment(2 * nz * t, nz).setConstant(C_lo);
    s.hi.segment(2 * nz * t, nz).setConstant(C_hi);
    s.lo.segment(2 * nz * t + nz, nz).setConstant(c_lo);
    s.hi.segment(2 * nz * t + nz, nz).setConstant(c_hi);
  }
  s.validate();
  return s;
}

void CostHeadScaling::validate() const {
  if (lo.size() != 2 * nz * horizon || hi.size() != lo.size()) {
    throw ConfigError("cost head: bounds must have 2 * nz * T entries");
  }
  if (!((hi.array() > lo.array()).all())) throw ConfigError("cost head: need lo < hi");
  for (int t = 0; t < horizon; ++t) {
    if (lo.segment(2 * nz * t, nz).minCoeff() < kCostRegularization) {
      throw ConfigError("cost head: lower bound on diag(C) must be >= 1e-6");
    }
  }
}

ActorCritic::ActorCritic(int obs_dim, const DynModel& model, const SolveSettings& settings,
                         const PolicyConfig& config, std::uint64_t seed)
    : kind_(config.kind), model_(model), settings_(settings), config_(config) {
  const int nu = model_.nu();
  const int nz = model_.nx() + nu;
  if (settings_.u_min.size() != nu || settings_.u_max.size() != nu ||
      !settings_.u_min.allFinite() || !settings_.u_max.allFinite()) {
    throw ConfigError("policy: finite control bounds are required");
  }
  if (kind_ == PolicyKind::kAcMpc) settings_.validate(nu);
  if (!(config_.sigma_init_frac > 0.0)) throw ConfigError("policy: sigma_init_frac must be > 0");

  std::vector<int> actor_sizes{obs_dim};
  std::vector<int> critic_sizes{obs_dim};
  for (int h : config_.hidden) {
    actor_sizes.push_back(h);
    critic_sizes.push_back(h);
  }
  const int T = settings_.horizon;
  actor_sizes.push_back(kind_ == PolicyKind::kAcMpc ? 2 * nz * T : nu);
  critic_sizes.push_back(1);
  actor_ = Mlp(actor_sizes);
  critic_ = Mlp(critic_sizes);
  std::mt19937_64 rng(seed);
  actor_.init(rng, config_.actor_output_gain);
  critic_.init(rng, 1.0);

  if (kind_ == PolicyKind::kAcMpc) {
    scaling_ = CostHeadScaling::uniform(T, nz, config_.C_lo, config_.C_hi, config_.c_lo,
                                        config_.c_hi);
    Vec C_nom = config_.nominal_C_diag;
    Vec c_nom = config_.nominal_c;
    const bool quad = model_.kind() == ModelKind::kPlanarQuadrotor;
    if (C_nom.size() == 0 && quad) {
      // Rate and velocity damping, unit control weight centered on hover thrust.
      C_nom.resize(nz);
      C_nom << 0.01, 0.01, 0.01, 5.0, 5.0, 5.0, 1.0, 1.0;
    }
    if (C_nom.size() == nz && c_nom.size() == 0 && quad) {
      c_nom = Vec::Zero(nz);
      c_nom.tail(nu) = -C_nom.tail(nu) * model_.hover_thrust();
    }
    if (C_nom.size() != 0) {
      if (C_nom.size() != nz || c_nom.size() != nz) {
        throw ConfigError("policy: nominal cost must have nx + nu entries");
      }
      auto b = actor_.bias(actor_.num_layers() - 1);
      for (int t = 0; t < T; ++t) {
        for (int i = 0; i < 2 * nz; ++i) {
          const int k = 2 * nz * t + i;
          const double value = i < nz ? C_nom(i) : c_nom(i - nz);
          const double p = (value - scaling_.lo(k)) / (scaling_.hi(k) - scaling_.lo(k));
          if (!(p > 0.0 && p < 1.0)) {
            throw ConfigError("policy: nominal cost lies outside the cost-head bounds");
          }
          b(k) = logit(p);
        }
      }
    }
  }
  log_std_ = (config_.sigma_init_frac * (settings_.u_max - settings_.u_min)).array().log();
}

void ActorCritic::set_scaling(CostHeadScaling s) {
  s.validate();
  if (s.size() != scaling_.size()) throw ConfigError("policy: cost-head scaling has wrong size");
  scaling_ = std::move(s);
}

StageCostParams ActorCritic::cost_from_head(const Vec& s) const {
  const int nz = scaling_.nz;
  const int T = scaling_.horizon;
  std::vector<Vec> diag(T), c(T);
  for (int t = 0; t < T; ++t) {
    const int o = 2 * nz * t;
    diag[t] = scaling_.lo.segment(o, nz) +
              (scaling_.hi.segment(o, nz) - scaling_.lo.segment(o, nz)).cwiseProduct(s.segment(o, nz));
    c[t] = scaling_.lo.segment(o + nz, nz) +
           (scaling_.hi.segment(o + nz, nz) - scaling_.lo.segment(o + nz, nz))
               .cwiseProduct(s.segment(o + nz, nz));
  }
  return StageCostParams::diagonal(model_.nx(), model_.nu(), diag, c);
}

StageCostParams ActorCritic::actor_forward(const Vec& obs) const {
  if (kind_ != PolicyKind::kAcMpc) throw ConfigError("policy: the MLP actor has no cost head");
  if (obs.size() != obs_dim()) throw ConfigError("policy: observation has wrong dimension");
  if (!obs.allFinite()) throw NumericError("policy: non-finite observation");
  const Vec y = actor_.forward(obs);
  return cost_from_head(y.unaryExpr(&sigmoid));
}

Vec ActorCritic::critic_forward(const Mat& obs) const {
  return critic_.forward(obs).row(0).transpose();
}

ActorEval ActorCritic::evaluate_actor(const Mat& obs, const std::vector<Vec>& x_init,
                                      const std::vector<std::vector<Vec>>& warm,
                                      BatchExecutor& exec) const {
  if (obs.rows() != obs_dim()) throw ConfigError("policy: observation has wrong dimension");
  if (!obs.allFinite()) throw NumericError("policy: non-finite observation");
  const int N = static_cast<int>(obs.cols());
  const int nu = model_.nu();
  ActorEval ev;
  ev.head = actor_.forward(obs, &ev.cache);
  ev.squashed = ev.head.unaryExpr(&sigmoid);
  ev.mean.resize(nu, N);
  ev.valid.assign(N, 1);
  if (kind_ == PolicyKind::kAcMlp) {
    const Vec range = settings_.u_max - settings_.u_min;
    for (int b = 0; b < N; ++b) {
      ev.mean.col(b) = settings_.u_min + range.cwiseProduct(ev.squashed.col(b));
    }
    return ev;
  }
  if (static_cast<int>(x_init.size()) != N || static_cast<int>(warm.size()) != N) {
    throw ConfigError("policy: need one controller state and warm start per observation");
  }
  BatchProblem prob{model_, x_init, {}, warm, settings_};
  prob.params.reserve(N);
  for (int b = 0; b < N; ++b) prob.params.push_back(cost_from_head(ev.squashed.col(b)));
  BatchSolveOutput out = exec.solve_batch(prob, ExecMode::kFused);
  for (int b = 0; b < N; ++b) {
    const SolveResult& r = out.results[b];
    if (r.failed) {
      ev.valid[b] = 0;
      ev.mean.col(b) = warm[b].empty() ? Vec(0.5 * (settings_.u_min + settings_.u_max))
                                       : Vec(warm[b][0].cwiseMax(settings_.u_min)
                                                 .cwiseMin(settings_.u_max));
      continue;
    }
    ev.mean.col(b) = r.traj.U[0];
    if (!r.converged) ++ev.approximate;
  }
  ev.params = std::move(prob.params);
  ev.solves = std::move(out.results);
  return ev;
}

int ActorCritic::actor_backward(const ActorEval& ev, const Mat& d_mean, Vec& grad,
                                BatchExecutor& exec) const {
  const int N = static_cast<int>(ev.mean.cols());
  if (d_mean.rows() != ev.mean.rows() || d_mean.cols() != N) {
    throw ConfigError("policy: dmean has wrong shape");
  }
  const Mat dsig = ev.squashed.cwiseProduct((1.0 - ev.squashed.array()).matrix());
  Mat d_head(ev.head.rows(), N);
  int approximate = 0;
  if (kind_ == PolicyKind::kAcMlp) {
    const Vec range = settings_.u_max - settings_.u_min;
    for (int b = 0; b < N; ++b) {
      d_head.col(b) = d_mean.col(b).cwiseProduct(range).cwiseProduct(dsig.col(b));
    }
  } else {
    const int T = settings_.horizon;
    const int nz = scaling_.nz;
    std::vector<BackwardSeed> seeds;
    seeds.reserve(N);
    for (int b = 0; b < N; ++b) {
      BackwardSeed s = BackwardSeed::zero(model_.nx(), model_.nu(), T);
      if (T > 0 && ev.valid[b]) s.dL_dU[0] = d_mean.col(b);
      seeds.push_back(std::move(s));
    }
    const BatchGradOutput g =
        exec.backward_batch(model_, ev.solves, ev.params, seeds, ExecMode::kFused);
    const Vec range = scaling_.hi - scaling_.lo;
    for (int b = 0; b < N; ++b) {
      const GradOutput& gb = g.grads[b];
      if (gb.failed || !ev.valid[b]) {
        d_head.col(b).setZero();
        continue;
      }
      if (gb.approximate) ++approximate;
      for (int t = 0; t < T; ++t) {
        d_head.col(b).segment(2 * nz * t, nz) = gb.dC[t].diagonal();
        d_head.col(b).segment(2 * nz * t + nz, nz) = gb.dc[t];
      }
      d_head.col(b) = d_head.col(b).cwiseProduct(range).cwiseProduct(dsig.col(b));
    }
  }
  actor_.backward(ev.cache, d_head, grad);
  return approximate;
}

double ActorCritic::log_prob(const Vec& a, const Vec& mean) const {
  const Vec z = (a - mean).cwiseQuotient(sigma());
  return -0.5 * z.squaredNorm() - log_std_.sum() -
         0.5 * static_cast<double>(a.size()) * std::log(2.0 * std::numbers::pi);
}

std::vector<Vec> ActorCritic::hover_warm_start() const {
  const Vec hover = model_.kind() == ModelKind::kPlanarQuadrotor
                        ? Vec(Vec::Constant(model_.nu(), model_.hover_thrust()))
                        : Vec(0.5 * (settings_.u_min + settings_.u_max));
  return std::vector<Vec>(settings_.horizon, hover);
}

std::vector<PolicyAction> ActorCritic::act(const Mat& obs, const std::vector<Vec>& x_init,
                                           const std::vector<std::vector<Vec>>& warm,
                                           bool explore, std::mt19937_64& rng,
                                           BatchExecutor& exec) const {
  const ActorEval ev = evaluate_actor(obs, x_init, warm, exec);
  const int N = static_cast<int>(obs.cols());
  const Vec sig = sigma();
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<PolicyAction> out(N);
  for (int b = 0; b < N; ++b) {
    PolicyAction& a = out[b];
    a.u_mpc = ev.mean.col(b);
    a.sigma = sig;
    if (explore) {
      a.u_raw = a.u_mpc;
      for (int i = 0; i < a.u_raw.size(); ++i) a.u_raw(i) += sig(i) * nd(rng);
    } else {
      a.u_raw = a.u_mpc;
    }
    a.u_sampled = a.u_raw.cwiseMax(settings_.u_min).cwiseMin(settings_.u_max);
    a.log_prob = log_prob(a.u_raw, a.u_mpc);
    if (kind_ == PolicyKind::kAcMpc) {
      const SolveResult& r = ev.solves[b];
      a.U_plan = r.traj.U;
      a.solver_iterations = r.iterations;
      a.converged = r.converged;
      a.failed = r.failed;
      if (r.failed) a.error = "instance " + std::to_string(b) + ": " + r.error;
    }
  }
  return out;
}

PolicyAction ActorCritic::act(const Vec& obs, const Vec& x_init, const std::vector<Vec>& warm,
                              bool explore, std::mt19937_64& rng) const {
  BatchExecutor exec(1);
  std::vector<PolicyAction> a = act(Mat(obs), {x_init}, {warm}, explore, rng, exec);
  if (a[0].failed) throw NumericError("policy: MPC solve failed for " + a[0].error);
  return std::move(a[0]);
}

const Vec& Checkpoint::block(const std::string& name) const {
  for (const auto& [n, v] : blocks) {
    if (n == name) return v;
  }
  throw ConfigError("checkpoint: missing block '" + name + "'");
}

bool Checkpoint::has(const std::string& name) const {
  for (const auto& [n, v] : blocks) {
    if (n == name) return true;
  }
  return false;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  nlohmann::json header;
  header["meta"] = ck.header_json.empty() ? nlohmann::json::object()
                                          : nlohmann::json::parse(ck.header_json);
  header["blocks"] = nlohmann::json::array();
  for (const auto& [name, v] : ck.blocks) {
    header["blocks"].push_back({{"name", name}, {"size", v.size()}});
  }
  const std::string h = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("checkpoint: cannot write '" + path + "'");
  out.write(kMagic, sizeof(kMagic));
  const std::uint32_t version = kCheckpointVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  const std::uint64_t len = h.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  for (const auto& [name, v] : ck.blocks) {
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(sizeof(double) * v.size()));
  }
  if (!out) throw Error("checkpoint: write to '" + path + "' failed");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("checkpoint: cannot open '" + path + "'");
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw ConfigError("checkpoint: '" + path + "' is not a checkpoint file");
  }
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (version != kCheckpointVersion) {
    throw ConfigError("checkpoint: unsupported version " + std::to_string(version));
  }
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || len > (1u << 30)) throw ConfigError("checkpoint: corrupt header");
  std::string h(len, '\0');
  in.read(h.data(), static_cast<std::streamsize>(len));
  Checkpoint ck;
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(h);
    ck.header_json = header.at("meta").dump();
    for (const auto& b : header.at("blocks")) {
      Vec v(b.at("size").get<Eigen::Index>());
      in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(sizeof(double) * v.size()));
      ck.blocks.emplace_back(b.at("name").get<std::string>(), std::move(v));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("checkpoint: bad header: ") + e.what());
  }
  if (!in) throw ConfigError("checkpoint: truncated file '" + path + "'");
  return ck;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace dmpc
