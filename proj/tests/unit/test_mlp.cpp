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

#include <random>

#include <doctest.h>

#include "dmpc/mlp.hpp"
#include "oracles.hpp"

using namespace dmpc;

TEST_CASE("mlp shapes and parameter layout") {
  Mlp net({3, 5, 4, 2});
  CHECK(net.num_layers() == 3);
  CHECK(net.num_params() == 3 * 5 + 5 + 5 * 4 + 4 + 4 * 2 + 2);
  CHECK(net.weight(0).rows() == 5);
  CHECK(net.weight(0).cols() == 3);
  net.weight(1)(2, 3) = 7.0;
  net.bias(2)(1) = -2.0;
  CHECK(net.params().maxCoeff() == 7.0);
  CHECK(net.params().minCoeff() == -2.0);
  CHECK_THROWS(Mlp({3}));
}

TEST_CASE("mlp init bounds and output gain") {
  std::mt19937_64 rng(1);
  Mlp net({4, 16, 3});
  net.init(rng, 0.01);
  CHECK(net.weight(0).cwiseAbs().maxCoeff() <= 0.5);
  CHECK(net.weight(1).cwiseAbs().maxCoeff() <= 0.01 / 4.0);
  CHECK(net.bias(0).isZero());
}

TEST_CASE("mlp forward matches a hand computation") {
  Mlp net({2, 2, 1});
  net.weight(0) << 1.0, -1.0, 0.5, 2.0;
  net.bias(0) << 0.0, -1.0;
  net.weight(1) << 3.0, -2.0;
  net.bias(1) << 0.5;
  Mat X(2, 2);
  X << 1.0, -1.0, 2.0, 0.0;
  const Mat Y = net.forward(X);
  // column 0: h = relu([-1, 3.5]) = [0, 3.5]; column 1: h = relu([-1, -1.5]) = 0
  CHECK(Y(0, 0) == doctest::Approx(0.5 - 7.0));
  CHECK(Y(0, 1) == doctest::Approx(0.5));
}

TEST_CASE("mlp backward matches central differences") {
  std::mt19937_64 rng(3);
  Mlp net({3, 6, 5, 2});
  net.init(rng, 1.0);
  net.params() += 0.1 * oracle::random_vec(net.num_params(), rng);
  const Mat X = oracle::random_vec(12, rng).reshaped(3, 4);
  const Mat W = oracle::random_vec(8, rng).reshaped(2, 4);
  Mlp::Cache cache;
  net.forward(X, &cache);
  Vec grad = Vec::Zero(net.num_params());
  const Mat dX = net.backward(cache, W, grad);
  const double h = 1e-6;
  for (int i = 0; i < net.num_params(); ++i) {
    Mlp p = net, m = net;
    p.params()(i) += h;
    m.params()(i) -= h;
    const double fd = ((p.forward(X).cwiseProduct(W)).sum() - (m.forward(X).cwiseProduct(W)).sum()) / (2 * h);
    CHECK(grad(i) == doctest::Approx(fd).epsilon(1e-5));
  }
  for (int i = 0; i < X.size(); ++i) {
    Mat Xp = X, Xm = X;
    Xp(i) += h;
    Xm(i) -= h;
    const double fd = ((net.forward(Xp).cwiseProduct(W)).sum() - (net.forward(Xm).cwiseProduct(W)).sum()) / (2 * h);
    CHECK(dX(i) == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("mlp rejects bad input") {
  Mlp net({2, 3, 1});
  CHECK_THROWS(net.forward(Mat::Zero(3, 1)));
  Mat X = Mat::Zero(2, 1);
  X(0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(net.forward(X), NumericError);
}

TEST_CASE("adam first step moves each coordinate by lr against the gradient sign") {
  Adam opt(3);
  Vec p = Vec::Zero(3);
  Vec g(3);
  g << 2.0, -0.5, 0.0;
  opt.step(p, g, 0.1);
  CHECK(p(0) == doctest::Approx(-0.1).epsilon(1e-4));
  CHECK(p(1) == doctest::Approx(0.1).epsilon(1e-4));
  CHECK(p(2) == 0.0);
  CHECK(opt.steps() == 1);
}

TEST_CASE("adam matches the reference recursion and restores state") {
  std::mt19937_64 rng(9);
  Adam opt(4, 0.9, 0.999, 1e-5);
  Vec p = oracle::random_vec(4, rng), ref = p, m = Vec::Zero(4), v = Vec::Zero(4);
  for (int t = 1; t <= 5; ++t) {
    const Vec g = oracle::random_vec(4, rng);
    opt.step(p, g, 0.01);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g.cwiseProduct(g);
    const Vec mh = m / (1 - std::pow(0.9, t));
    const Vec vh = v / (1 - std::pow(0.999, t));
    ref -= (0.01 * mh.array() / (vh.array().sqrt() + 1e-5)).matrix();
  }
  CHECK((p - ref).cwiseAbs().maxCoeff() < 1e-12);
  Adam copy(4);
  copy.restore(opt.first_moment(), opt.second_moment(), opt.steps());
  Vec p1 = p, p2 = p;
  const Vec g = oracle::random_vec(4, rng);
  opt.step(p1, g, 0.01);
  copy.step(p2, g, 0.01);
  CHECK(p1 == p2);
}
