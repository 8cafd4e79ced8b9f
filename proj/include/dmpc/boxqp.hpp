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

#include "dmpc/types.hpp"

namespace dmpc {

struct BoxQpSettings {
  int max_iter = 20;
  double tol = 1e-9;        // gradient norm on the free set
  double armijo = 0.1;      // minimum fraction of the predicted decrease
  double step_decrease = 0.6;
  double min_step = 1e-22;
};

enum class BoxQpStatus {
  kConverged,      // free-set gradient below tol
  kAllClamped,     // every dimension pinned at a bound
  kNoProgress,     // Newton step left the iterate unchanged
  kMaxIterations,
  kLineSearchFailed,
};

struct BoxQpResult {
  Vec u;
  // true for dimensions not held at a bound by an outward-pointing gradient.
  Eigen::Array<bool, Eigen::Dynamic, 1> free;
  int iterations = 0;
  BoxQpStatus status = BoxQpStatus::kConverged;
};

// Minimizes 1/2 u'Hu + g'u subject to lo <= u <= hi by projected Newton:
// find the clamped set, take a Newton step on the free subspace, and
// backtrack along the projection arc. Bounds may be infinite.
//
// Throws NumericError when H restricted to the free set is not positive
// definite, and ConfigError on inconsistent sizes or lo > hi.
BoxQpResult boxqp(const Mat& H, const Vec& g, const Vec& lo, const Vec& hi,
                  const Vec& u0, const BoxQpSettings& settings = {});

}  // namespace dmpc
