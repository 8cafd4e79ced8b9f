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
#include <string>
#include <vector>

#include "dmpc/dynamics.hpp"
#include "dmpc/gradlayer.hpp"
#include "dmpc/ilqr.hpp"
#include "dmpc/qcost.hpp"

namespace dmpc {

// kFused submits one parallel job per iLQR stage covering every instance and
// timestep. kNaive submits one job per timestep per stage and batches only
// across instances inside it, the way a per-timestep host loop drives a
// device. Both run identical per-instance arithmetic.
enum class ExecMode { kFused, kNaive };

std::string to_string(ExecMode mode);
ExecMode parse_exec_mode(const std::string& s);

struct BatchProblem {
  DynModel model;
  std::vector<Vec> x_init;
  std::vector<StageCostParams> params;
  std::vector<std::vector<Vec>> U_warm;  // may be empty: zero warm start
  SolveSettings settings;

  int size() const { return static_cast<int>(x_init.size()); }
  void validate() const;
};

struct DispatchStats {
  int dispatches_per_iteration = 0;
  std::int64_t total_dispatches = 0;
  int iterations = 0;  // iterations executed by the batch (max over instances)
  double wall_time_forward = 0.0;   // seconds
  double wall_time_backward = 0.0;  // seconds
};

struct BatchSolveOutput {
  std::vector<SolveResult> results;
  DispatchStats stats;
};

struct BatchGradOutput {
  std::vector<GradOutput> grads;
  DispatchStats stats;
};

// Runs batched solves and implicit-gradient passes on an OpenMP team of
// `workers` threads. A dispatch is one parallel-for submission; the counter
// is bumped at submission.
class BatchExecutor {
 public:
  explicit BatchExecutor(int workers = 1);

  int workers() const { return workers_; }

  // Instances that fail (divergence, singular stage QP) come back with
  // failed = true; the others are unaffected.
  BatchSolveOutput solve_batch(const BatchProblem& prob, ExecMode mode);

  // lins[b] must be the linearization about results[b].traj.
  BatchGradOutput backward_batch(const std::vector<SolveResult>& results,
                                 const std::vector<std::vector<LinPoint>>& lins,
                                 const std::vector<StageCostParams>& params,
                                 const std::vector<BackwardSeed>& seeds,
                                 ExecMode mode = ExecMode::kFused);

  // Same, linearizing about each result inside the gradient kernels.
  BatchGradOutput backward_batch(const DynModel& model,
                                 const std::vector<SolveResult>& results,
                                 const std::vector<StageCostParams>& params,
                                 const std::vector<BackwardSeed>& seeds,
                                 ExecMode mode = ExecMode::kFused);

 private:
  template <typename Body>
  void dispatch(int n, Body&& body);

  BatchGradOutput backward_impl(const DynModel* model, const std::vector<SolveResult>& results,
                                const std::vector<std::vector<LinPoint>>* lins,
                                const std::vector<StageCostParams>& params,
                                const std::vector<BackwardSeed>& seeds, ExecMode mode);

  int workers_;
  std::int64_t dispatch_count_ = 0;
};

std::vector<std::vector<LinPoint>> linearize_batch(const DynModel& model,
                                                   const std::vector<SolveResult>& results);

// Hover regulation of the planar quadrotor around random targets: quadratic
// tracking cost, thrust bounds [0, m g] per rotor, random initial offsets.
BatchProblem make_hover_problem(int batch, int horizon, int max_iter, std::uint64_t seed,
                                double dt = 0.05);

struct LatencyRow {
  ExecMode mode = ExecMode::kFused;
  int B = 0;
  int T = 0;
  int K = 0;
  double forward_ms = 0.0;   // median over reps
  double backward_ms = 0.0;  // median over reps
  std::int64_t dispatches = 0;  // forward + backward, one rep
};

// Median forward/backward wall time of the hover task for every (B, T) and
// both modes. `warmup` untimed runs precede the `reps` timed ones.
std::vector<LatencyRow> latency_probe(BatchExecutor& exec, const std::vector<int>& batch_sizes,
                                      const std::vector<int>& horizons, int max_iter, int reps,
                                      std::uint64_t seed, int warmup = 1);

// Header: mode,B,T,K,forward_ms,backward_ms,dispatches
void write_latency_csv(std::ostream& os, const std::vector<LatencyRow>& rows);

}  // namespace dmpc
