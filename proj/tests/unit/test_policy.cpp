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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <doctest.h>

#include "dmpc/batch.hpp"
#include "dmpc/config.hpp"
#include "dmpc/policy.hpp"
#include "oracles.hpp"

using namespace dmpc;

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

PolicyConfig small(PolicyKind kind) {
  PolicyConfig pc;
  pc.kind = kind;
  pc.hidden = {8, 8};
  pc.actor_output_gain = 1.0;
  return pc;
}

SolveSettings quad_settings(const DynModel& m, int T) {
  SolveSettings s;
  s.horizon = T;
  s.max_iter = 5;
  s.u_min = Vec::Zero(2);
  s.u_max = Vec::Constant(2, 2.0 * m.hover_thrust());
  return s;
}

}  // namespace

TEST_CASE("untrained cost head sits at the nominal hover cost") {
  const DynModel m = RunConfig().model();
  PolicyConfig pc;
  const ActorCritic p(kObsDim, m, quad_settings(m, 3), pc, 1);
  const Vec b = p.actor().bias(p.actor().num_layers() - 1);
  const StageCostParams q = p.cost_from_head(b.unaryExpr(&sigmoid));
  for (int t = 0; t < 3; ++t) {
    CHECK(q.C(t)(3, 3) == doctest::Approx(5.0));
    CHECK(q.C(t)(6, 6) == doctest::Approx(1.0));
    CHECK(q.C(t)(0, 1) == 0.0);
    CHECK(q.c(t)(6) == doctest::Approx(-1.0 * m.hover_thrust()));
  }
}

TEST_CASE("cost head respects its bounds") {
  const DynModel m = RunConfig().model();
  const ActorCritic p(kObsDim, m, quad_settings(m, 2), small(PolicyKind::kAcMpc), 2);
  Vec sq = Vec::Zero(p.scaling().size());
  StageCostParams lo = p.cost_from_head(sq);
  sq.setOnes();
  StageCostParams hi = p.cost_from_head(sq);
  CHECK(lo.C(0)(0, 0) == doctest::Approx(1e-3));
  CHECK(hi.C(1)(7, 7) == doctest::Approx(10.0));
  CHECK(lo.c(0)(2) == doctest::Approx(-10.0));
  CHECK(hi.c(1)(2) == doctest::Approx(10.0));
  CHECK_THROWS_AS(CostHeadScaling::uniform(2, 8, 0.0, 1.0, -1.0, 1.0), ConfigError);
  CHECK_THROWS_AS(CostHeadScaling::uniform(2, 8, 1.0, 0.5, -1.0, 1.0), ConfigError);
}

TEST_CASE("untrained mlp actor outputs near hover with the configured sigma") {
  const DynModel m = RunConfig().model();
  PolicyConfig pc;
  pc.kind = PolicyKind::kAcMlp;
  pc.hidden = {32, 32};
  const ActorCritic p(kObsDim, m, quad_settings(m, 2), pc, 3);
  std::mt19937_64 rng(0);
  const auto a = p.act(Vec::Constant(kObsDim, 0.2), Vec::Zero(6), {}, false, rng);
  CHECK(a.u_mpc(0) == doctest::Approx(m.hover_thrust()).epsilon(0.02));
  CHECK(p.sigma()(0) == doctest::Approx(0.1 * 2.0 * m.hover_thrust()));
}

TEST_CASE("log_prob is the diagonal Gaussian density") {
  const DynModel m = RunConfig().model();
  const ActorCritic p(kObsDim, m, quad_settings(m, 2), small(PolicyKind::kAcMlp), 4);
  Vec a(2), mu(2);
  a << 5.0, 4.0;
  mu << 4.5, 4.9;
  const Vec s = p.sigma();
  double want = 0.0;
  for (int i = 0; i < 2; ++i) {
    const double z = (a(i) - mu(i)) / s(i);
    want += -0.5 * z * z - std::log(s(i)) - 0.5 * std::log(2.0 * M_PI);
  }
  CHECK(p.log_prob(a, mu) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("exploration samples are clamped and deterministic per seed") {
  const DynModel m = RunConfig().model();
  const ActorCritic p(kObsDim, m, quad_settings(m, 2), small(PolicyKind::kAcMpc), 5);
  std::mt19937_64 r1(8), r2(8);
  const Vec obs = Vec::Constant(kObsDim, 0.1);
  const auto a = p.act(obs, Vec::Zero(6), p.hover_warm_start(), true, r1);
  const auto b = p.act(obs, Vec::Zero(6), p.hover_warm_start(), true, r2);
  CHECK(a.u_raw == b.u_raw);
  CHECK((a.u_sampled.array() >= 0.0).all());
  CHECK((a.u_sampled.array() <= 2.0 * m.hover_thrust()).all());
  CHECK(a.log_prob == doctest::Approx(p.log_prob(a.u_raw, a.u_mpc)));
  CHECK(a.U_plan.size() == 2);
  const auto d = p.act(obs, Vec::Zero(6), p.hover_warm_start(), false, r1);
  CHECK(d.u_sampled == d.u_mpc.cwiseMax(0.0).cwiseMin(2.0 * m.hover_thrust()));
}

// d(sum w .* mean)/d(actor params) against central differences. With linear
// controller dynamics the MPC layer gradient is exact.
TEST_CASE("actor gradient matches central differences") {
  std::mt19937_64 rng(12);
  Mat A = Mat::Identity(6, 6);
  A.topRightCorner(3, 3) = 0.05 * Mat::Identity(3, 3);
  Mat B = Mat::Zero(6, 2);
  B(3, 0) = 0.05;
  B(4, 1) = 0.05;
  B(5, 0) = 0.1;
  B(5, 1) = -0.1;
  const DynModel lin = DynModel::linear(A, B, 0.05);
  for (PolicyKind kind : {PolicyKind::kAcMlp, PolicyKind::kAcMpc}) {
    CAPTURE(to_string(kind));
    PolicyConfig pc = small(kind);
    pc.nominal_C_diag = Vec::Constant(8, 1.0);
    pc.nominal_c = Vec::Constant(8, 0.5);
    SolveSettings s;
    s.horizon = 3;
    s.max_iter = 50;
    s.conv_tol = 1e-14;
    s.u_min = Vec::Constant(2, -100.0);
    s.u_max = Vec::Constant(2, 100.0);
    ActorCritic p(kObsDim, lin, s, pc, 9);
    const int N = 3;
    const Mat obs = oracle::random_vec(kObsDim * N, rng, 0.5).reshaped(kObsDim, N);
    std::vector<Vec> x0;
    std::vector<std::vector<Vec>> warm;
    for (int i = 0; i < N; ++i) {
      x0.push_back(oracle::random_vec(6, rng));
      warm.push_back(std::vector<Vec>(3, Vec::Zero(2)));
    }
    const Mat W = oracle::random_vec(2 * N, rng).reshaped(2, N);
    BatchExecutor exec(1);
    const ActorEval ev = p.evaluate_actor(obs, x0, warm, exec);
    Vec grad = Vec::Zero(p.actor().num_params());
    p.actor_backward(ev, W, grad, exec);
    auto loss = [&](const ActorCritic& q) {
      return q.evaluate_actor(obs, x0, warm, exec).mean.cwiseProduct(W).sum();
    };
    const double h = 1e-6;
    const int n = p.actor().num_params();
    double worst = 0.0;
    for (int i = n - 1; i >= n - 60; --i) {
      ActorCritic pp = p, pm = p;
      pp.actor().params()(i) += h;
      pm.actor().params()(i) -= h;
      const double fd = (loss(pp) - loss(pm)) / (2 * h);
      worst = std::max(worst, std::abs(fd - grad(i)) / std::max(1e-4, std::abs(fd)));
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("critic evaluates one value per column") {
  const DynModel m = RunConfig().model();
  const ActorCritic p(kObsDim, m, quad_settings(m, 2), small(PolicyKind::kAcMpc), 6);
  const Vec v = p.critic_forward(Mat::Ones(kObsDim, 5));
  CHECK(v.size() == 5);
  CHECK(v.allFinite());
}

TEST_CASE("policy validation") {
  const DynModel m = RunConfig().model();
  SolveSettings unbounded = quad_settings(m, 2);
  unbounded.u_max = Vec::Constant(2, std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(ActorCritic(kObsDim, m, unbounded, small(PolicyKind::kAcMpc), 1), ConfigError);
  PolicyConfig pc = small(PolicyKind::kAcMpc);
  pc.nominal_C_diag = Vec::Constant(8, 100.0);
  pc.nominal_c = Vec::Zero(8);
  CHECK_THROWS_AS(ActorCritic(kObsDim, m, quad_settings(m, 2), pc, 1), ConfigError);
  const ActorCritic p(kObsDim, m, quad_settings(m, 2), small(PolicyKind::kAcMpc), 1);
  CHECK_THROWS_AS(p.actor_forward(Vec::Zero(3)), ConfigError);
  CHECK_THROWS_AS(parse_policy_kind("ppo"), ConfigError);
}

TEST_CASE("checkpoint round trip and corruption") {
  const auto path = (std::filesystem::temp_directory_path() / "dmpc_test_ck.bin").string();
  Checkpoint ck;
  ck.header_json = R"({"meta": {"k": 1}})";
  ck.blocks.push_back({"a", Vec::LinSpaced(5, -1.0, 1.0)});
  ck.blocks.push_back({"b", Vec::Zero(0)});
  save_checkpoint(path, ck);
  const Checkpoint back = load_checkpoint(path);
  CHECK(back.block("a") == ck.block("a"));
  CHECK(back.has("b"));
  CHECK_FALSE(back.has("c"));
  CHECK_THROWS_AS(back.block("c"), ConfigError);
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 8);
  CHECK_THROWS_AS(load_checkpoint(path), ConfigError);
  {
    std::ofstream junk(path, std::ios::binary);
    junk << "NOTACKPT and more bytes";
  }
  CHECK_THROWS_AS(load_checkpoint(path), ConfigError);
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("zero actor weights and biases give the midpoint of every cost range") {
  const DynModel m = RunConfig().model();
  ActorCritic p(kObsDim, m, quad_settings(m, 2), small(PolicyKind::kAcMpc), 7);
  p.actor().params().setZero();
  const StageCostParams q = p.actor_forward(Vec::Constant(kObsDim, 0.3));
  for (int t = 0; t < 2; ++t) {
    for (int i = 0; i < 8; ++i) {
      CHECK(q.C(t)(i, i) == doctest::Approx(0.5 * (1e-3 + 10.0)));
      CHECK(q.c(t)(i) == doctest::Approx(0.0));
    }
  }
}

TEST_CASE("zero critic weights give zero value and batching matches single calls") {
  const DynModel m = RunConfig().model();
  ActorCritic p(kObsDim, m, quad_settings(m, 2), small(PolicyKind::kAcMpc), 8);
  std::mt19937_64 rng(1);
  const Mat obs = oracle::random_vec(kObsDim * 4, rng).reshaped(kObsDim, 4);
  const Vec batch = p.critic_forward(obs);
  for (int i = 0; i < 4; ++i) {
    CHECK(batch(i) == doctest::Approx(p.critic_forward(obs.col(i))(0)).epsilon(1e-12));
  }
  p.critic().params().setZero();
  CHECK(p.critic_forward(obs).isZero());
}

TEST_CASE("log_prob gradient in the mean matches finite differences") {
  const DynModel m = RunConfig().model();
  const ActorCritic p(kObsDim, m, quad_settings(m, 2), small(PolicyKind::kAcMlp), 9);
  Vec a(2), mu(2);
  a << 5.5, 3.0;
  mu << 4.0, 4.5;
  const Vec s2 = p.sigma().array().square();
  const Vec analytic = ((a - mu).array() / s2.array()).matrix();
  const double h = 1e-6;
  for (int i = 0; i < 2; ++i) {
    Vec up = mu, down = mu;
    up(i) += h;
    down(i) -= h;
    const double fd = (p.log_prob(a, up) - p.log_prob(a, down)) / (2 * h);
    CHECK(analytic(i) == doctest::Approx(fd).epsilon(1e-6));
  }
}
