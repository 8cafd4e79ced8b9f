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

#include "dmpc/batch.hpp"

#include <algorithm>
#include <chrono>
#include <iomanip>
#include <ostream>
#include <random>
#include <utility>

#include <omp.h>

#include "dmpc/ilqr_kernels.hpp"

namespace dmpc {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::string to_string(ExecMode mode) {
  return mode == ExecMode::kFused ? "fused" : "naive";
}

ExecMode parse_exec_mode(const std::string& s) {
  if (s == "fused") return ExecMode::kFused;
  if (s == "naive") return ExecMode::kNaive;
  throw ConfigError("unknown execution mode '" + s + "' (expected fused or naive)");
}

void BatchProblem::validate() const {
  const int B = size();
  if (B < 1) throw ConfigError("batch: need at least one instance");
  if (static_cast<int>(params.size()) != B) {
    throw ConfigError("batch: params and x_init sizes differ");
  }
  if (!U_warm.empty() && static_cast<int>(U_warm.size()) != B) {
    throw ConfigError("batch: U_warm and x_init sizes differ");
  }
  settings.validate(model.nu());
  for (const StageCostParams& p : params) {
    if (p.horizon() != settings.horizon || p.nx() != model.nx() || p.nu() != model.nu()) {
      throw ConfigError("batch: every instance must share the model and horizon");
    }
  }
}

BatchExecutor::BatchExecutor(int workers) : workers_(workers) {
  if (workers < 1) throw ConfigError("executor: workers must be >= 1");
}

template <typename Body>
void BatchExecutor::dispatch(int n, Body&& body) {
  ++dispatch_count_;
#pragma omp parallel for num_threads(workers_) schedule(static)
  for (int i = 0; i < n; ++i) body(i);
}

BatchSolveOutput BatchExecutor::solve_batch(const BatchProblem& prob, ExecMode mode) {
  prob.validate();
  const auto start = Clock::now();
  const std::int64_t dispatch_start = dispatch_count_;
  const SolveSettings& s = prob.settings;
  const DynModel& model = prob.model;
  const int B = prob.size();
  const int T = s.horizon;
  const int num_alphas = static_cast<int>(s.alphas.size());
  static const std::vector<Vec> kNoWarmStart;

  std::vector<kernels::InstanceWorkspace> ws(B);
  for (int b = 0; b < B; ++b) {
    try {
      ws[b].init(model, prob.x_init[b], prob.params[b],
                 prob.U_warm.empty() ? kNoWarmStart : prob.U_warm[b], s);
    } catch (const Error& e) {
      ws[b].fail(e.what());
    }
  }

  // Initial rollout.
  if (mode == ExecMode::kFused) {
    dispatch(B, [&](int b) {
      if (ws[b].failed) return;
      try {
        for (int t = 0; t < T; ++t) kernels::rollout_step(model, ws[b], t);
        kernels::rollout_finish(ws[b], s);
      } catch (const Error& e) {
        ws[b].fail(e.what());
      }
    });
  } else {
    for (int t = 0; t < T; ++t) {
      dispatch(B, [&](int b) {
        if (ws[b].failed) return;
        try {
          kernels::rollout_step(model, ws[b], t);
        } catch (const Error& e) {
          ws[b].fail(e.what());
        }
      });
    }
    for (int b = 0; b < B; ++b) {
      if (!ws[b].failed) kernels::rollout_finish(ws[b], s);
    }
  }

  int iterations = 0;
  auto any_runnable = [&] {
    return std::any_of(ws.begin(), ws.end(), [](const auto& w) { return w.runnable(); });
  };
  while (any_runnable()) {
    ++iterations;
    if (mode == ExecMode::kFused) {
      // Stage 1: linearization about the nominal.
      dispatch(B, [&](int b) {
        if (!ws[b].runnable()) return;
        for (int t = 0; t < T; ++t) kernels::linearize_step(model, ws[b], t);
      });
      // Stage 2: box-constrained Riccati sweep, sequential in t per instance.
      dispatch(B, [&](int b) {
        if (!ws[b].runnable()) return;
        try {
          kernels::backward_begin(ws[b]);
          for (int t = T - 1; t >= 0; --t) kernels::backward_step(ws[b], s, t);
        } catch (const Error& e) {
          ws[b].fail(e.what());
        }
      });
      // Stage 3: every (instance, alpha) candidate rollout at once.
      dispatch(B * num_alphas, [&](int i) {
        const int b = i / num_alphas;
        const int a = i % num_alphas;
        if (!ws[b].runnable()) return;
        kernels::linesearch_begin(ws[b], a);
        for (int t = 0; t < T; ++t) kernels::linesearch_step(model, ws[b], s, a, t);
      });
    } else {
      for (int t = 0; t < T; ++t) {
        dispatch(B, [&](int b) {
          if (ws[b].runnable()) kernels::linearize_step(model, ws[b], t);
        });
      }
      for (int t = T - 1; t >= 0; --t) {
        dispatch(B, [&](int b) {
          if (!ws[b].runnable()) return;
          try {
            if (t == T - 1) kernels::backward_begin(ws[b]);
            kernels::backward_step(ws[b], s, t);
          } catch (const Error& e) {
            ws[b].fail(e.what());
          }
        });
      }
      for (int t = 0; t < T; ++t) {
        dispatch(B * num_alphas, [&](int i) {
          const int b = i / num_alphas;
          const int a = i % num_alphas;
          if (!ws[b].runnable()) return;
          if (t == 0) kernels::linesearch_begin(ws[b], a);
          kernels::linesearch_step(model, ws[b], s, a, t);
        });
      }
    }
    // Per-instance reduction over candidates and convergence bookkeeping.
    for (int b = 0; b < B; ++b) {
      if (!ws[b].runnable()) continue;
      try {
        kernels::linesearch_select(ws[b], s);
      } catch (const Error& e) {
        ws[b].fail(e.what());
      }
    }
  }

  BatchSolveOutput out;
  out.results.reserve(B);
  for (int b = 0; b < B; ++b) out.results.push_back(kernels::finish(std::move(ws[b]), s));
  out.stats.dispatches_per_iteration = mode == ExecMode::kFused ? 3 : 3 * T;
  out.stats.total_dispatches = dispatch_count_ - dispatch_start;
  out.stats.iterations = iterations;
  out.stats.wall_time_forward = seconds_since(start);
  return out;
}

BatchGradOutput BatchExecutor::backward_batch(const std::vector<SolveResult>& results,
                                              const std::vector<std::vector<LinPoint>>& lins,
                                              const std::vector<StageCostParams>& params,
                                              const std::vector<BackwardSeed>& seeds,
                                              ExecMode mode) {
  return backward_impl(nullptr, results, &lins, params, seeds, mode);
}

BatchGradOutput BatchExecutor::backward_batch(const DynModel& model,
                                              const std::vector<SolveResult>& results,
                                              const std::vector<StageCostParams>& params,
                                              const std::vector<BackwardSeed>& seeds,
                                              ExecMode mode) {
  return backward_impl(&model, results, nullptr, params, seeds, mode);
}

BatchGradOutput BatchExecutor::backward_impl(const DynModel* model,
                                             const std::vector<SolveResult>& results,
                                             const std::vector<std::vector<LinPoint>>* lins,
                                             const std::vector<StageCostParams>& params,
                                             const std::vector<BackwardSeed>& seeds,
                                             ExecMode mode) {
  const int B = static_cast<int>(results.size());
  if (static_cast<int>(params.size()) != B || static_cast<int>(seeds.size()) != B ||
      (lins != nullptr && static_cast<int>(lins->size()) != B)) {
    throw ConfigError("backward_batch: results, linearizations, params and seeds must align");
  }
  const auto start = Clock::now();
  const std::int64_t dispatch_start = dispatch_count_;
  const int T = B > 0 ? results[0].traj.horizon() : 0;
  for (const SolveResult& r : results) {
    if (r.traj.horizon() != T) throw ConfigError("backward_batch: mixed horizons");
  }

  // Owned linearizations when the caller did not provide them.
  std::vector<std::vector<LinPoint>> own_lins;
  if (lins == nullptr) {
    own_lins.resize(B);
    for (int b = 0; b < B; ++b) {
      own_lins[b].assign(T, LinPoint{Mat::Zero(model->nx(), model->nx()),
                                     Mat::Zero(model->nx(), model->nu())});
    }
  }
  const std::vector<std::vector<LinPoint>>& L = lins ? *lins : own_lins;

  std::vector<kernels::GradWorkspace> ws(B);
  std::vector<char> skip(B, 0);
  auto setup = [&](int b) {
    if (results[b].failed) {
      ws[b].out.failed = true;
      ws[b].out.error = "forward solve failed: " + results[b].error;
      skip[b] = 1;
      return;
    }
    try {
      ws[b].init(results[b], L[b], params[b], seeds[b]);
    } catch (const Error& e) {
      ws[b].fail(e.what());
      skip[b] = 1;
    }
  };
  auto lin_step = [&](int b, int t) {
    if (lins == nullptr) {
      jacobians_into(*model, results[b].traj.X[t], results[b].traj.U[t], own_lins[b][t].A,
                     own_lins[b][t].B);
    }
  };
  auto guarded = [&](int b, auto&& fn) {
    if (skip[b] || ws[b].out.failed) return;
    try {
      fn();
    } catch (const Error& e) {
      ws[b].fail(e.what());
    }
  };

  for (int b = 0; b < B; ++b) setup(b);
  if (mode == ExecMode::kFused) {
    dispatch(B, [&](int b) {
      guarded(b, [&] {
        for (int t = T - 1; t >= 0; --t) {
          lin_step(b, t);
          kernels::grad_riccati_step(ws[b], t);
        }
        for (int t = 0; t < T; ++t) kernels::grad_rollout_step(ws[b], t);
        for (int t = T - 1; t >= 0; --t) kernels::grad_costate_step(ws[b], t);
      });
    });
  } else {
    for (int t = T - 1; t >= 0; --t) {
      dispatch(B, [&](int b) {
        guarded(b, [&] {
          lin_step(b, t);
          kernels::grad_riccati_step(ws[b], t);
        });
      });
    }
    for (int t = 0; t < T; ++t) {
      dispatch(B, [&](int b) { guarded(b, [&] { kernels::grad_rollout_step(ws[b], t); }); });
    }
    for (int t = T - 1; t >= 0; --t) {
      dispatch(B, [&](int b) { guarded(b, [&] { kernels::grad_costate_step(ws[b], t); }); });
    }
  }

  BatchGradOutput out;
  out.grads.reserve(B);
  for (int b = 0; b < B; ++b) {
    if (skip[b]) {
      out.grads.push_back(std::move(ws[b].out));
    } else {
      out.grads.push_back(kernels::grad_finish(std::move(ws[b])));
    }
  }
  out.stats.dispatches_per_iteration = mode == ExecMode::kFused ? 1 : 3 * T;
  out.stats.total_dispatches = dispatch_count_ - dispatch_start;
  out.stats.wall_time_backward = seconds_since(start);
  return out;
}

std::vector<std::vector<LinPoint>> linearize_batch(const DynModel& model,
                                                   const std::vector<SolveResult>& results) {
  std::vector<std::vector<LinPoint>> lins;
  lins.reserve(results.size());
  for (const SolveResult& r : results) lins.push_back(linearize(model, r.traj));
  return lins;
}

BatchProblem make_hover_problem(int batch, int horizon, int max_iter, std::uint64_t seed,
                                double dt) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> target_pos(-2.0, 2.0);
  std::normal_distribution<double> offset(0.0, 0.5);
  std::normal_distribution<double> tilt(0.0, 0.15);

  const DynModel model = DynModel::planar_quadrotor(dt);
  const double hover = model.hover_thrust();
  BatchProblem prob{model, {}, {}, {}, SolveSettings{}};
  prob.settings.horizon = horizon;
  prob.settings.max_iter = max_iter;
  prob.settings.u_min = Vec::Zero(2);
  prob.settings.u_max = Vec::Constant(2, 2.0 * hover);

  Vec weights(8);
  weights << 10.0, 10.0, 2.0, 1.0, 1.0, 0.5, 0.1, 0.1;
  const Mat C = weights.asDiagonal();
  for (int b = 0; b < batch; ++b) {
    Vec z_ref = Vec::Zero(8);
    z_ref(0) = target_pos(rng);
    z_ref(1) = target_pos(rng) + 3.0;
    z_ref(6) = hover;
    z_ref(7) = hover;
    const Vec c = -(C * z_ref);
    Vec x0 = Vec::Zero(6);
    x0(0) = z_ref(0) + offset(rng);
    x0(1) = z_ref(1) + offset(rng);
    x0(2) = tilt(rng);
    x0(3) = offset(rng);
    x0(4) = offset(rng);
    prob.x_init.push_back(x0);
    prob.params.push_back(StageCostParams::constant(6, 2, horizon, C, c));
    prob.U_warm.push_back(std::vector<Vec>(horizon, Vec::Constant(2, hover)));
  }
  return prob;
}

std::vector<LatencyRow> latency_probe(BatchExecutor& exec, const std::vector<int>& batch_sizes,
                                      const std::vector<int>& horizons, int max_iter, int reps,
                                      std::uint64_t seed, int warmup) {
  if (reps < 1) throw ConfigError("latency_probe: reps must be >= 1");
  std::vector<LatencyRow> rows;
  for (int B : batch_sizes) {
    for (int T : horizons) {
      const BatchProblem prob = make_hover_problem(B, T, max_iter, seed);
      for (ExecMode mode : {ExecMode::kFused, ExecMode::kNaive}) {
        LatencyRow row;
        row.mode = mode;
        row.B = B;
        row.T = T;
        row.K = max_iter;
        std::vector<double> fwd;
        std::vector<double> bwd;
        for (int rep = 0; rep < warmup + reps; ++rep) {
          BatchSolveOutput solved = exec.solve_batch(prob, mode);
          std::vector<BackwardSeed> seeds;
          seeds.reserve(B);
          for (const SolveResult& r : solved.results) {
            BackwardSeed seed_b = BackwardSeed::zero(6, 2, T);
            if (T > 0 && !r.failed && !r.traj.U.empty()) seed_b.dL_dU[0] = r.traj.U[0] - prob.U_warm[0][0];
            seeds.push_back(std::move(seed_b));
          }
          BatchGradOutput grads =
              exec.backward_batch(prob.model, solved.results, prob.params, seeds, mode);
          if (rep >= warmup) {
            fwd.push_back(1e3 * solved.stats.wall_time_forward);
            bwd.push_back(1e3 * grads.stats.wall_time_backward);
            row.dispatches = solved.stats.total_dispatches + grads.stats.total_dispatches;
          }
        }
        row.forward_ms = median(fwd);
        row.backward_ms = median(bwd);
        rows.push_back(row);
      }
    }
  }
  return rows;
}

void write_latency_csv(std::ostream& os, const std::vector<LatencyRow>& rows) {
  os << "mode,B,T,K,forward_ms,backward_ms,dispatches\n";
  for (const LatencyRow& r : rows) {
    os << to_string(r.mode) << ',' << r.B << ',' << r.T << ',' << r.K << ','
       << std::setprecision(6) << r.forward_ms << ',' << r.backward_ms << ',' << r.dispatches
       << '\n';
  }
}

}  // namespace dmpc
