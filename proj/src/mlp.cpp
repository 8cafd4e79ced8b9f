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

#include "dmpc/mlp.hpp"

#include <cmath>
#include <utility>

namespace dmpc {

Mlp::Mlp(std::vector<int> sizes) : sizes_(std::move(sizes)) {
  if (sizes_.size() < 2) throw ConfigError("mlp: need at least an input and an output size");
  for (int s : sizes_) {
    if (s < 1) throw ConfigError("mlp: layer sizes must be >= 1");
  }
  int offset = 0;
  for (int l = 0; l < num_layers(); ++l) {
    w_offset_.push_back(offset);
    offset += sizes_[l] * sizes_[l + 1];
    b_offset_.push_back(offset);
    offset += sizes_[l + 1];
  }
  params_ = Vec::Zero(offset);
}

void Mlp::init(std::mt19937_64& rng, double output_gain) {
  for (int l = 0; l < num_layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
    std::uniform_real_distribution<double> dist(-bound, bound);
    auto W = weight(l);
    for (Eigen::Index i = 0; i < W.size(); ++i) W.data()[i] = dist(rng);
    if (l == num_layers() - 1) W *= output_gain;
    bias(l).setZero();
  }
}

Eigen::Map<Mat> Mlp::weight(int l) {
  return {params_.data() + w_offset_[l], sizes_[l + 1], sizes_[l]};
}
Eigen::Map<const Mat> Mlp::weight(int l) const {
  return {params_.data() + w_offset_[l], sizes_[l + 1], sizes_[l]};
}
Eigen::Map<Vec> Mlp::bias(int l) { return {params_.data() + b_offset_[l], sizes_[l + 1]}; }
Eigen::Map<const Vec> Mlp::bias(int l) const {
  return {params_.data() + b_offset_[l], sizes_[l + 1]};
}

Mat Mlp::forward(const Mat& X, Cache* cache) const {
  if (X.rows() != inputs()) throw ConfigError("mlp: input has wrong dimension");
  if (cache) {
    cache->act.clear();
    cache->act.push_back(X);
  }
  Mat h = X;
  for (int l = 0; l < num_layers(); ++l) {
    Mat z(sizes_[l + 1], X.cols());
    z.noalias() = weight(l) * h;
    z.colwise() += bias(l);
    if (l + 1 < num_layers()) {
      z = z.cwiseMax(0.0);
      if (cache) cache->act.push_back(z);
    }
    h = std::move(z);
  }
  if (!h.allFinite()) throw NumericError("mlp: non-finite activation");
  return h;
}

Mat Mlp::backward(const Cache& cache, const Mat& dOut, Vec& grad) const {
  if (grad.size() != num_params()) throw ConfigError("mlp: gradient buffer has wrong size");
  Mat delta = dOut;
  for (int l = num_layers() - 1; l >= 0; --l) {
    const Mat& input = cache.act[l];
    Eigen::Map<Mat> gW(grad.data() + w_offset_[l], sizes_[l + 1], sizes_[l]);
    Eigen::Map<Vec> gb(grad.data() + b_offset_[l], sizes_[l + 1]);
    gW.noalias() += delta * input.transpose();
    gb += delta.rowwise().sum();
    Mat prev(sizes_[l], delta.cols());
    prev.noalias() = weight(l).transpose() * delta;
    if (l > 0) prev = prev.cwiseProduct((input.array() > 0.0).cast<double>().matrix());
    delta = std::move(prev);
  }
  return delta;
}

Adam::Adam(int n, double beta1, double beta2, double eps)
    : m_(Vec::Zero(n)), v_(Vec::Zero(n)), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::restore(const Vec& m, const Vec& v, std::int64_t t) {
  if (m.size() != m_.size() || v.size() != v_.size() || t < 0) {
    throw ConfigError("adam: restored state does not match the parameter count");
  }
  m_ = m;
  v_ = v;
  t_ = t;
}

void Adam::step(Vec& params, const Vec& grad, double lr) {
  if (grad.size() != m_.size() || params.size() != m_.size()) {
    throw ConfigError("adam: parameter and gradient sizes differ");
  }
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

}  // namespace dmpc
