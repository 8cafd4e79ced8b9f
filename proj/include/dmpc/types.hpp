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

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dmpc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Floor on the eigenvalues of the control-control cost block.
inline constexpr double kCostRegularization = 1e-6;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dimension mismatches, invalid settings, malformed files.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-finite inputs, matrices that fail to factor.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Index outside the horizon.
class RangeError : public Error {
 public:
  using Error::Error;
};

// A rollout produced a non-finite state.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, int timestep)
      : Error(what), timestep_(timestep) {}
  int timestep() const { return timestep_; }

 private:
  int timestep_;
};

inline bool all_finite(const Vec& v) { return v.allFinite(); }

}  // namespace dmpc
