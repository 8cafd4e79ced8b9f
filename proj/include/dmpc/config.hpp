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

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dmpc/dynamics.hpp"
#include "dmpc/ilqr.hpp"
#include "dmpc/policy.hpp"
#include "dmpc/raceenv.hpp"
#include "dmpc/trainer.hpp"

namespace dmpc {

// Effective configuration of a run: built-in defaults, then the config file,
// then dotted-path overrides. Every key must exist in the defaults, and a
// value must keep the type of its default; violations raise ConfigError
// naming the key.
class RunConfig {
 public:
  RunConfig();

  static nlohmann::json defaults();
  static RunConfig from_file(const std::string& path);
  static RunConfig from_json_text(const std::string& text);

  // "solver.T" = "5". The value is parsed as JSON when it parses, otherwise
  // taken as a string.
  void set(const std::string& dotted_key, const std::string& value);
  void set_json(const std::string& dotted_key, const nlohmann::json& value);

  const nlohmann::json& tree() const { return tree_; }
  const nlohmann::json& at(const std::string& dotted_key) const;

  template <typename T>
  T get(const std::string& dotted_key) const {
    const nlohmann::json& v = at(dotted_key);
    try {
      return v.get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("config: key '" + dotted_key + "' has the wrong type");
    }
  }

  // Effective config as written to config.json. `include_solver` false drops
  // the solver section (MLP-only runs).
  std::string echo(bool include_solver = true) const;

  DynModel model() const;
  SolveSettings solver_settings(const DynModel& model) const;
  TrainConfig train_config() const;
  PolicyConfig policy_config() const;
  EnvConfig env_config() const;
  std::string track_path() const;

 private:
  void merge(const nlohmann::json& patch, const std::string& prefix);
  nlohmann::json tree_;
};

// Directory of the bundled data files.
std::string bundled_data_dir();

}  // namespace dmpc
