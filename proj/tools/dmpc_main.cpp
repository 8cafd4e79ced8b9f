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

// Command-line entry point: solve | bench | train | eval.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dmpc/batch.hpp"
#include "dmpc/config.hpp"
#include "dmpc/policy.hpp"
#include "dmpc/raceenv.hpp"
#include "dmpc/trainer.hpp"

namespace fs = std::filesystem;
using dmpc::RunConfig;
using json = nlohmann::json;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw dmpc::Error("cannot write '" + path.string() + "'");
  out << text;
}

// Remaining "--a.b value" token pairs become config overrides.
void apply_overrides(RunConfig& cfg, const std::vector<std::string>& extras) {
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& tok = extras[i];
    if (tok.rfind("--", 0) != 0) throw dmpc::ConfigError("unexpected argument '" + tok + "'");
    const std::string key = tok.substr(2);
    if (i + 1 >= extras.size()) throw dmpc::ConfigError("override '" + tok + "' has no value");
    const std::string& value = extras[++i];
    if (key.find('.') == std::string::npos) {
      throw dmpc::ConfigError("unknown option '--" + key + "'");
    }
    cfg.set(key, value);
  }
}

std::vector<dmpc::Vec> json_vecs(const json& j, const std::string& what) {
  std::vector<dmpc::Vec> out;
  for (const json& row : j) {
    const auto v = row.get<std::vector<double>>();
    out.push_back(Eigen::Map<const dmpc::Vec>(v.data(), static_cast<Eigen::Index>(v.size())));
  }
  if (out.empty()) throw dmpc::ConfigError("problem file: '" + what + "' is empty");
  return out;
}

dmpc::Mat json_mat(const json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  dmpc::Mat m(rows.size(), rows.empty() ? 0 : rows[0].size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != static_cast<std::size_t>(m.cols())) {
      throw dmpc::ConfigError("problem file: ragged matrix");
    }
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
  }
  return m;
}

// Problem file: {"x_init": [[...], ...], "C": [[...]] or [[[...]]] per t,
// "c": [...] or [[...]] per t, "U_warm": optional [[...]] shared}.
dmpc::BatchProblem load_problem(const std::string& path, const dmpc::DynModel& model,
                                const dmpc::SolveSettings& settings) {
  std::ifstream in(path);
  if (!in) throw dmpc::ConfigError("solve.problem: cannot open '" + path + "'");
  json j;
  try {
    j = json::parse(in);
    dmpc::BatchProblem prob{model, json_vecs(j.at("x_init"), "x_init"), {}, {}, settings};
    const int T = settings.horizon;
    std::vector<dmpc::Mat> C;
    std::vector<dmpc::Vec> c;
    const json& Cj = j.at("C");
    if (!Cj.empty() && Cj[0].is_array() && !Cj[0].empty() && Cj[0][0].is_array()) {
      for (const json& m : Cj) C.push_back(json_mat(m));
    } else {
      C.assign(T, json_mat(Cj));
    }
    const json& cj = j.at("c");
    if (!cj.empty() && cj[0].is_array()) {
      c = json_vecs(cj, "c");
    } else {
      const auto v = cj.get<std::vector<double>>();
      c.assign(T, Eigen::Map<const dmpc::Vec>(v.data(), static_cast<Eigen::Index>(v.size())));
    }
    if (static_cast<int>(C.size()) != T || static_cast<int>(c.size()) != T) {
      throw dmpc::ConfigError("problem file: cost horizon does not match solver.T");
    }
    for (std::size_t b = 0; b < prob.x_init.size(); ++b) {
      prob.params.emplace_back(model.nx(), model.nu(), C, c);
    }
    if (j.contains("U_warm")) {
      const auto U = json_vecs(j.at("U_warm"), "U_warm");
      prob.U_warm.assign(prob.x_init.size(), U);
    }
    return prob;
  } catch (const json::exception& e) {
    throw dmpc::ConfigError(std::string("problem file: ") + e.what());
  }
}

int cmd_solve(const RunConfig& cfg) {
  const fs::path out = cfg.get<std::string>("run.out");
  fs::create_directories(out);
  write_file(out / "config.json", cfg.echo());
  const dmpc::DynModel model = cfg.model();
  const dmpc::SolveSettings settings = cfg.solver_settings(model);
  const dmpc::ExecMode mode = dmpc::parse_exec_mode(cfg.get<std::string>("solver.mode"));
  const std::string problem = cfg.get<std::string>("solve.problem");
  auto build = [&]() -> dmpc::BatchProblem {
    if (!problem.empty()) return load_problem(problem, model, settings);
    if (cfg.get<std::string>("solve.scenario") != "hover") {
      throw dmpc::ConfigError("config: key 'solve.scenario' must be \"hover\" or use solve.problem");
    }
    dmpc::BatchProblem p = dmpc::make_hover_problem(cfg.get<int>("solve.B"), settings.horizon,
                                                    settings.max_iter,
                                                    cfg.get<std::uint64_t>("run.seed"), model.dt());
    p.settings.conv_tol = settings.conv_tol;
    p.settings.alphas = settings.alphas;
    return p;
  };
  const dmpc::BatchProblem prob = build();
  dmpc::BatchExecutor exec(cfg.get<int>("run.workers"));
  const dmpc::BatchSolveOutput res = exec.solve_batch(prob, mode);

  std::ofstream traj(out / "trajectory.csv");
  traj << "instance,t";
  for (int i = 0; i < prob.model.nx(); ++i) traj << ",x" << i;
  for (int i = 0; i < prob.model.nu(); ++i) traj << ",u" << i;
  traj << '\n' << std::setprecision(17);
  std::ofstream summary(out / "summary.csv");
  summary << "instance,cost,iterations,converged,failed,alpha_history\n" << std::setprecision(17);
  bool any_failed = false;
  for (std::size_t b = 0; b < res.results.size(); ++b) {
    const dmpc::SolveResult& r = res.results[b];
    any_failed = any_failed || r.failed;
    for (std::size_t t = 0; t < r.traj.X.size(); ++t) {
      traj << b << ',' << t;
      for (int i = 0; i < r.traj.X[t].size(); ++i) traj << ',' << r.traj.X[t](i);
      for (int i = 0; i < prob.model.nu(); ++i) {
        traj << ',';
        if (t < r.traj.U.size()) traj << r.traj.U[t](i);
      }
      traj << '\n';
    }
    summary << b << ',' << r.cost << ',' << r.iterations << ',' << (r.converged ? "true" : "false")
            << ',' << (r.failed ? "true" : "false") << ',';
    for (std::size_t k = 0; k < r.alpha_history.size(); ++k) {
      summary << (k ? ";" : "") << r.alpha_history[k];
    }
    summary << '\n';
    if (r.failed) std::cerr << "solve: instance " << b << " failed: " << r.error << '\n';
  }
  std::ofstream stats(out / "stats.csv");
  stats << "mode,dispatches_per_iteration,total_dispatches,iterations,forward_ms\n"
        << dmpc::to_string(mode) << ',' << res.stats.dispatches_per_iteration << ','
        << res.stats.total_dispatches << ',' << res.stats.iterations << ','
        << 1e3 * res.stats.wall_time_forward << '\n';
  const auto converged = std::count_if(res.results.begin(), res.results.end(),
                                       [](const dmpc::SolveResult& r) { return r.converged; });
  std::cout << "solved " << res.results.size() << " instance(s), " << converged
            << " converged, " << res.stats.iterations << " iterations, "
            << res.stats.total_dispatches << " dispatches (" << dmpc::to_string(mode) << ")\n";
  return any_failed ? kExitRuntime : 0;
}

int cmd_bench(const RunConfig& cfg) {
  const fs::path out = cfg.get<std::string>("run.out");
  fs::create_directories(out);
  write_file(out / "config.json", cfg.echo());
  const int reps = cfg.get<int>("bench.reps");
  const int warmup = cfg.get<int>("bench.warmup");
  if (reps < 1) throw dmpc::ConfigError("config: key 'bench.reps' must be >= 1");
  if (warmup < 0) throw dmpc::ConfigError("config: key 'bench.warmup' must be >= 0");
  dmpc::BatchExecutor exec(cfg.get<int>("run.workers"));
  const auto rows = dmpc::latency_probe(exec, cfg.get<std::vector<int>>("bench.B"),
                                        cfg.get<std::vector<int>>("bench.T"),
                                        cfg.get<int>("bench.K"), reps,
                                        cfg.get<std::uint64_t>("run.seed"), warmup);
  std::ofstream csv(out / "latency.csv");
  dmpc::write_latency_csv(csv, rows);
  std::cout << std::left << std::setw(7) << "mode" << std::right << std::setw(6) << "B"
            << std::setw(5) << "T" << std::setw(5) << "K" << std::setw(14) << "forward_ms"
            << std::setw(14) << "backward_ms" << std::setw(12) << "dispatches" << '\n';
  for (const auto& r : rows) {
    std::cout << std::left << std::setw(7) << dmpc::to_string(r.mode) << std::right
              << std::setw(6) << r.B << std::setw(5) << r.T << std::setw(5) << r.K
              << std::setw(14) << std::fixed << std::setprecision(3) << r.forward_ms
              << std::setw(14) << r.backward_ms << std::setw(12) << r.dispatches << '\n';
  }
  return 0;
}

int train_one(RunConfig cfg, const fs::path& dir) {
  const dmpc::PolicyConfig pc = cfg.policy_config();
  const bool mlp = pc.kind == dmpc::PolicyKind::kAcMlp;
  fs::create_directories(dir);
  const std::string echo = cfg.echo(!mlp);
  write_file(dir / "config.json", echo);
  const dmpc::DynModel model = cfg.model();
  const dmpc::SolveSettings settings = cfg.solver_settings(model);
  const dmpc::RaceEnv env(dmpc::load_track(cfg.track_path()), model, cfg.env_config());
  const auto seed = cfg.get<std::uint64_t>("run.seed");
  dmpc::ActorCritic policy(dmpc::kObsDim, model, settings, pc, seed);
  dmpc::TrainOptions opts;
  opts.seed = seed;
  opts.workers = cfg.get<int>("run.workers");
  opts.out_dir = dir.string();
  opts.resume_from = cfg.get<std::string>("train.resume");
  opts.config_json = echo;
  const dmpc::TrainResult res = dmpc::train(cfg.train_config(), env, policy, opts);
  std::ofstream mem(dir / "memory.csv");
  mem << "update,rss_kb\n";
  for (std::size_t u = 0; u < res.rss_kb.size(); ++u) {
    mem << res.metrics[u].update << ',' << res.rss_kb[u] << '\n';
  }
  std::cout << dir.string() << ": " << res.updates << " updates, " << res.steps << " steps";
  if (!res.metrics.empty()) {
    const auto& last = res.metrics.back();
    std::cout << ", mean_reward " << last.mean_reward << ", lap_rate " << last.lap_rate;
  }
  std::cout << '\n';
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  const fs::path out = cfg.get<std::string>("run.out");
  const auto Ts = cfg.get<std::vector<int>>("train.grid_T");
  const auto Ks = cfg.get<std::vector<int>>("train.grid_K");
  const bool mlp = cfg.policy_config().kind == dmpc::PolicyKind::kAcMlp;
  if (mlp || (Ts.empty() && Ks.empty())) return train_one(cfg, out);
  const std::vector<int> T_list = Ts.empty() ? std::vector<int>{cfg.get<int>("solver.T")} : Ts;
  const std::vector<int> K_list = Ks.empty() ? std::vector<int>{cfg.get<int>("solver.K")} : Ks;
  for (int T : T_list) {
    for (int K : K_list) {
      RunConfig cell = cfg;
      cell.set_json("solver.T", T);
      cell.set_json("solver.K", K);
      cell.set_json("train.grid_T", json::array());
      cell.set_json("train.grid_K", json::array());
      const int rc = train_one(cell, out / ("T" + std::to_string(T) + "_K" + std::to_string(K)));
      if (rc != 0) return rc;
    }
  }
  return 0;
}

std::string fmt_time(const std::optional<double>& t) {
  if (!t) return "none";
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(2) << *t;
  return ss.str();
}

int cmd_eval(const RunConfig& cfg) {
  const fs::path out = cfg.get<std::string>("run.out");
  fs::create_directories(out);
  write_file(out / "config.json", cfg.echo());
  const auto paths = cfg.get<std::vector<std::string>>("eval.checkpoints");
  auto labels = cfg.get<std::vector<std::string>>("eval.labels");
  if (paths.empty()) throw dmpc::ConfigError("config: key 'eval.checkpoints' is empty");
  if (!labels.empty() && labels.size() != paths.size()) {
    throw dmpc::ConfigError("config: key 'eval.labels' must match eval.checkpoints");
  }
  const int episodes = cfg.get<int>("eval.episodes");
  if (episodes < 1) throw dmpc::ConfigError("config: key 'eval.episodes' must be >= 1");
  const auto seed = cfg.get<std::uint64_t>("run.seed");
  const bool dump = cfg.get<bool>("eval.trajectories");
  const dmpc::TrackSpec track = dmpc::load_track(cfg.track_path());

  std::ofstream laps(out / "laptimes.csv");
  laps << "policy,episode,completed,lap_time_s,reason,gates_passed,total_reward\n";
  std::ofstream table(out / "laptable.csv");
  table << "policy,episodes,completion_rate,median_lap_s,best_lap_s\n";
  std::cout << std::left << std::setw(24) << "policy" << std::right << std::setw(10) << "episodes"
            << std::setw(12) << "completion" << std::setw(12) << "median_s" << std::setw(10)
            << "best_s" << '\n';
  for (std::size_t k = 0; k < paths.size(); ++k) {
    const dmpc::ActorCritic policy =
        dmpc::policy_from_checkpoint(dmpc::load_checkpoint(paths[k]));
    const std::string label = labels.empty() ? fs::path(paths[k]).parent_path().filename().string()
                                             : labels[k];
    const dmpc::RaceEnv env(track, policy.model(), cfg.env_config());
    std::vector<double> times;
    for (int e = 0; e < episodes; ++e) {
      const dmpc::EpisodeResult r = dmpc::run_episode(policy, env, seed + e);
      if (r.lap_time) times.push_back(*r.lap_time);
      laps << label << ',' << e << ',' << (r.lap_time ? "true" : "false") << ','
           << fmt_time(r.lap_time) << ',' << dmpc::to_string(r.reason) << ',' << r.gates_passed
           << ',' << std::setprecision(10) << r.total_reward << '\n';
      if (dump) {
        std::ofstream tf(out / ("traj_" + label + "_" + std::to_string(e) + ".csv"));
        dmpc::write_trajectory_csv(tf, r.trajectory);
      }
    }
    std::sort(times.begin(), times.end());
    std::optional<double> median, best;
    if (!times.empty()) {
      const std::size_t n = times.size();
      median = n % 2 ? times[n / 2] : 0.5 * (times[n / 2 - 1] + times[n / 2]);
      best = times.front();
    }
    const double rate = static_cast<double>(times.size()) / episodes;
    table << label << ',' << episodes << ',' << std::setprecision(4) << rate << ','
          << fmt_time(median) << ',' << fmt_time(best) << '\n';
    std::cout << std::left << std::setw(24) << label << std::right << std::setw(10) << episodes
              << std::setw(12) << std::fixed << std::setprecision(2) << rate << std::setw(12)
              << fmt_time(median) << std::setw(10) << fmt_time(best) << '\n';
    std::cout.unsetf(std::ios::floatfield);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Batched differentiable MPC solver and AC-MPC racing trainer"};
  app.require_subcommand(1);
  app.fallthrough();
  app.allow_extras();
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> out;
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--seed", seed, "random seed");
  app.add_option("--workers", workers, "worker threads (1 is deterministic)");
  app.add_option("--out", out, "output directory");

  auto* solve = app.add_subcommand("solve", "solve a batch of MPC problems");
  std::optional<std::string> solve_mode;
  solve->add_option("--mode", solve_mode, "execution mode: fused or naive");
  auto* bench = app.add_subcommand("bench", "forward/backward latency grid");
  std::optional<int> reps;
  bench->add_option("--reps", reps, "timed repetitions per cell");
  auto* trainc = app.add_subcommand("train", "PPO training");
  std::optional<std::string> train_mode;
  trainc->add_option("--mode", train_mode, "ac_mpc or ac_mlp");
  auto* evalc = app.add_subcommand("eval", "lap-time evaluation of checkpoints");
  std::vector<std::string> checkpoints;
  std::vector<std::string> labels;
  std::optional<int> episodes;
  evalc->add_option("--checkpoint", checkpoints, "checkpoint file (repeatable)");
  evalc->add_option("--label", labels, "row label per checkpoint (repeatable)");
  evalc->add_option("--episodes", episodes, "evaluation episodes per checkpoint");
  for (auto* sub : {solve, bench, trainc, evalc}) sub->allow_extras();

  try {
    // "--a.b=v" is split up front so overrides always arrive as pairs.
    std::vector<std::string> args;
    for (int i = argc - 1; i >= 1; --i) {
      const std::string a = argv[i];
      const auto eq = a.find('=');
      if (a.rfind("--", 0) == 0 && eq != std::string::npos && a.substr(0, eq).find('.') != std::string::npos) {
        args.push_back(a.substr(eq + 1));
        args.push_back(a.substr(0, eq));
      } else {
        args.push_back(a);
      }
    }
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    RunConfig cfg = config_path.empty() ? RunConfig() : RunConfig::from_file(config_path);
    CLI::App* sub = app.get_subcommands().front();
    apply_overrides(cfg, app.remaining(false));
    if (seed) cfg.set_json("run.seed", *seed);
    if (workers) cfg.set_json("run.workers", *workers);
    if (out) cfg.set_json("run.out", *out);
    if (cfg.get<int>("run.workers") < 1) throw dmpc::ConfigError("config: key 'run.workers' must be >= 1");
    if (sub == solve) {
      if (solve_mode) cfg.set_json("solver.mode", *solve_mode);
      return cmd_solve(cfg);
    }
    if (sub == bench) {
      if (reps) cfg.set_json("bench.reps", *reps);
      return cmd_bench(cfg);
    }
    if (sub == trainc) {
      if (train_mode) cfg.set_json("train.mode", *train_mode);
      return cmd_train(cfg);
    }
    if (!checkpoints.empty()) cfg.set_json("eval.checkpoints", checkpoints);
    if (!labels.empty()) cfg.set_json("eval.labels", labels);
    if (episodes) cfg.set_json("eval.episodes", *episodes);
    return cmd_eval(cfg);
  } catch (const dmpc::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
