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

#include "dmpc/boxqp.hpp"

#include <vector>

namespace dmpc {
namespace {

using Mask = Eigen::Array<bool, Eigen::Dynamic, 1>;

double objective(const Mat& H, const Vec& g, const Vec& u) {
  return u.dot(g) + 0.5 * u.dot(H * u);
}

Vec clamp(const Vec& u, const Vec& lo, const Vec& hi) {
  return u.cwiseMax(lo).cwiseMin(hi);
}

Mask free_set(const Vec& u, const Vec& grad, const Vec& lo, const Vec& hi) {
  Mask free(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const bool clamped = (u(i) == lo(i) && grad(i) > 0.0) ||
                         (u(i) == hi(i) && grad(i) < 0.0);
    free(i) = !clamped;
  }
  return free;
}

}  // namespace

BoxQpResult boxqp(const Mat& H, const Vec& g, const Vec& lo, const Vec& hi,
                  const Vec& u0, const BoxQpSettings& settings) {
  const Eigen::Index n = g.size();
  if (H.rows() != n || H.cols() != n || lo.size() != n || hi.size() != n ||
      u0.size() != n) {
    throw ConfigError("boxqp: inconsistent dimensions");
  }
  if ((lo.array() > hi.array()).any()) throw ConfigError("boxqp: lo > hi");

  BoxQpResult result;
  Vec u = clamp(u0, lo, hi);
  double value = objective(H, g, u);
  result.status = BoxQpStatus::kMaxIterations;

  Mask free_prev;
  Eigen::LLT<Mat> llt;
  std::vector<Eigen::Index> free_idx;
  std::vector<Eigen::Index> clamped_idx;

  for (int iter = 0; iter < settings.max_iter; ++iter) {
    const Vec grad = g + H * u;
    const Mask free = free_set(u, grad, lo, hi);
    if (!free.any()) {
      result.status = BoxQpStatus::kAllClamped;
      break;
    }

    if (iter == 0 || (free != free_prev).any()) {
      free_idx.clear();
      clamped_idx.clear();
      for (Eigen::Index i = 0; i < n; ++i) {
        (free(i) ? free_idx : clamped_idx).push_back(i);
      }
      const auto nf = static_cast<Eigen::Index>(free_idx.size());
      Mat Hff(nf, nf);
      for (Eigen::Index a = 0; a < nf; ++a) {
        for (Eigen::Index b = 0; b < nf; ++b) Hff(a, b) = H(free_idx[a], free_idx[b]);
      }
      llt.compute(Hff);
      if (llt.info() != Eigen::Success) {
        throw NumericError("boxqp: Hessian is not positive definite on the free set");
      }
    }
    free_prev = free;

    const auto nf = static_cast<Eigen::Index>(free_idx.size());
    Vec grad_free(nf);
    for (Eigen::Index a = 0; a < nf; ++a) grad_free(a) = grad(free_idx[a]);
    if (grad_free.norm() < settings.tol) {
      result.status = BoxQpStatus::kConverged;
      break;
    }

    // Newton target on the free subspace with clamped dimensions held fixed.
    Vec rhs(nf);
    for (Eigen::Index a = 0; a < nf; ++a) {
      double r = g(free_idx[a]);
      for (Eigen::Index c : clamped_idx) r += H(free_idx[a], c) * u(c);
      rhs(a) = r;
    }
    const Vec target = -llt.solve(rhs);
    Vec search = Vec::Zero(n);
    for (Eigen::Index a = 0; a < nf; ++a) {
      search(free_idx[a]) = target(a) - u(free_idx[a]);
    }
    const double sdotg = search.dot(grad);
    if (sdotg >= 0.0) {
      result.status = BoxQpStatus::kNoProgress;
      break;
    }

    double step = 1.0;
    Vec candidate = clamp(u + step * search, lo, hi);
    double candidate_value = objective(H, g, candidate);
    bool accepted = true;
    while ((candidate_value - value) / (step * sdotg) < settings.armijo) {
      step *= settings.step_decrease;
      if (step < settings.min_step) {
        accepted = false;
        break;
      }
      candidate = clamp(u + step * search, lo, hi);
      candidate_value = objective(H, g, candidate);
    }
    if (!accepted) {
      result.status = BoxQpStatus::kLineSearchFailed;
      break;
    }
    result.iterations = iter + 1;
    if (candidate == u) {
      result.status = BoxQpStatus::kNoProgress;
      break;
    }
    u = candidate;
    value = candidate_value;
  }

  result.free = free_set(u, g + H * u, lo, hi);
  result.u = std::move(u);
  return result;
}

}  // namespace dmpc
