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

// Forward and backward latency of the fused and naive batch executors next to
// the serial single-instance solver, on the hover task.

#include <thread>

#include <benchmark/benchmark.h>

#include "dmpc/batch.hpp"
#include "dmpc/gradlayer.hpp"
#include "dmpc/ilqr.hpp"

namespace {

constexpr int kIters = 10;

int workers() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

void forward(benchmark::State& state, dmpc::ExecMode mode) {
  const int B = static_cast<int>(state.range(0));
  const int T = static_cast<int>(state.range(1));
  const dmpc::BatchProblem prob = dmpc::make_hover_problem(B, T, kIters, 1);
  dmpc::BatchExecutor exec(workers());
  std::int64_t dispatches = 0;
  for (auto _ : state) {
    auto out = exec.solve_batch(prob, mode);
    dispatches = out.stats.total_dispatches;
    benchmark::DoNotOptimize(out);
  }
  state.counters["dispatches"] = static_cast<double>(dispatches);
}

void BM_ForwardFused(benchmark::State& s) { forward(s, dmpc::ExecMode::kFused); }
void BM_ForwardNaive(benchmark::State& s) { forward(s, dmpc::ExecMode::kNaive); }

void BM_ForwardSerial(benchmark::State& state) {
  const int B = static_cast<int>(state.range(0));
  const int T = static_cast<int>(state.range(1));
  const dmpc::BatchProblem prob = dmpc::make_hover_problem(B, T, kIters, 1);
  for (auto _ : state) {
    for (int b = 0; b < B; ++b) {
      auto r = dmpc::solve(prob.model, prob.x_init[b], prob.params[b], prob.U_warm[b],
                           prob.settings);
      benchmark::DoNotOptimize(r);
    }
  }
}

void backward(benchmark::State& state, dmpc::ExecMode mode) {
  const int B = static_cast<int>(state.range(0));
  const int T = static_cast<int>(state.range(1));
  const dmpc::BatchProblem prob = dmpc::make_hover_problem(B, T, kIters, 1);
  dmpc::BatchExecutor exec(workers());
  const auto fwd = exec.solve_batch(prob, dmpc::ExecMode::kFused);
  std::vector<dmpc::BackwardSeed> seeds;
  for (const auto& r : fwd.results) {
    dmpc::BackwardSeed s = dmpc::BackwardSeed::zero(prob.model.nx(), prob.model.nu(), T);
    s.dL_dU[0] = r.traj.U[0];
    seeds.push_back(std::move(s));
  }
  for (auto _ : state) {
    auto out = exec.backward_batch(prob.model, fwd.results, prob.params, seeds, mode);
    benchmark::DoNotOptimize(out);
  }
}

void BM_BackwardFused(benchmark::State& s) { backward(s, dmpc::ExecMode::kFused); }
void BM_BackwardNaive(benchmark::State& s) { backward(s, dmpc::ExecMode::kNaive); }

void grid(benchmark::internal::Benchmark* b) {
  for (int B : {1, 64, 256}) {
    for (int T : {2, 10, 50}) b->Args({B, T});
  }
  b->ArgNames({"B", "T"})->Unit(benchmark::kMillisecond);
}

}  // namespace

BENCHMARK(BM_ForwardFused)->Apply(grid);
BENCHMARK(BM_ForwardNaive)->Apply(grid);
BENCHMARK(BM_ForwardSerial)->Apply(grid);
BENCHMARK(BM_BackwardFused)->Apply(grid);
BENCHMARK(BM_BackwardNaive)->Apply(grid);

BENCHMARK_MAIN();
