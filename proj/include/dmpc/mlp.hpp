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
#include <random>
#include <vector>

#include "dmpc/types.hpp"

namespace dmpc {

// Fully connected ReLU network with a linear output layer. All weights and
// biases live in one flat vector so optimizers, clipping and checkpoints can
// treat the network as a single parameter block. Inputs are column-major
// batches: one sample per column.
class Mlp {
 public:
  Mlp() = default;
  // sizes = {inputs, hidden..., outputs}
  explicit Mlp(std::vector<int> sizes);

  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases; the
  // output layer is additionally scaled by `output_gain`.
  void init(std::mt19937_64& rng, double output_gain = 1.0);

  int inputs() const { return sizes_.front(); }
  int outputs() const { return sizes_.back(); }
  const std::vector<int>& sizes() const { return sizes_; }
  int num_params() const { return static_cast<int>(params_.size()); }
  Vec& params() { return params_; }
  const Vec& params() const { return params_; }

  // Views into the flat parameter vector.
  Eigen::Map<Mat> weight(int layer);
  Eigen::Map<const Mat> weight(int layer) const;
  Eigen::Map<Vec> bias(int layer);
  Eigen::Map<const Vec> bias(int layer) const;
  int num_layers() const { return static_cast<int>(sizes_.size()) - 1; }

  struct Cache {
    std::vector<Mat> act;  // act[0] = input, act[l] = post-ReLU of hidden layer l
  };

  Mat forward(const Mat& X, Cache* cache = nullptr) const;
  // Accumulates d(sum of dOut .* output)/d(params) into `grad` and returns
  // the gradient w.r.t. the input batch.
  Mat backward(const Cache& cache, const Mat& dOut, Vec& grad) const;

 private:
  std::vector<int> sizes_;
  std::vector<int> w_offset_;
  std::vector<int> b_offset_;
  Vec params_;
};

class Adam {
 public:
  Adam() = default;
  explicit Adam(int n, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-5);

  void step(Vec& params, const Vec& grad, double lr);
  std::int64_t steps() const { return t_; }
  const Vec& first_moment() const { return m_; }
  const Vec& second_moment() const { return v_; }
  void restore(const Vec& m, const Vec& v, std::int64_t t);

 private:
  Vec m_;
  Vec v_;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-5;
  std::int64_t t_ = 0;
};

}  // namespace dmpc
