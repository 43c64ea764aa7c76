/*
 * Copyright 2026 The cmdp-lab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// cmdp_lab: generate instances, sample datasets, run the solver, diagnose
// stored reports and sweep seeds. Exit codes: 0 success, 1 bad input,
// 2 solver precondition failure, 3 diagnose found a mismatch.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "cmdp/experiment.hpp"
#include "cmdp/instances.hpp"
#include "cmdp/model_io.hpp"

namespace fs = std::filesystem;
using namespace cmdp;

namespace {

std::string sidecar_path(const std::string& model_path) {
  fs::path p(model_path);
  return (p.parent_path() / (p.stem().string() + ".sidecar.json")).string();
}

std::vector<int> parse_theta(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
  return out;
}

struct GenArgs {
  int states = 6;
  int actions = 3;
  int constraints = 2;
  double gamma = 0.9;
  double slater_target = 0.2;
  double mix = 0.5;
  double C = 2.0;
  double varpi = 0.5;
  std::string theta;
  std::uint64_t seed = 1;
  std::string out = "model.json";
  std::string sidecar;
};

void add_gen_common(CLI::App* cmd, GenArgs& a) {
  cmd->add_option("--gamma", a.gamma, "discount factor");
  cmd->add_option("--seed", a.seed, "generator seed");
  cmd->add_option("--out", a.out, "model JSON path");
  cmd->add_option("--sidecar", a.sidecar, "sidecar JSON path (default <out stem>.sidecar.json)");
}

void write_instance(const CmdpModel& model, const nlohmann::json& sidecar, const GenArgs& a) {
  save_model(model, a.out);
  write_json_file(sidecar, a.sidecar.empty() ? sidecar_path(a.out) : a.sidecar);
}

// Overrides that run and sweep share; each applies only when given.
struct RunOverrides {
  std::string config;
  std::optional<std::string> model;
  std::optional<std::string> mu;
  std::optional<std::string> data;
  std::optional<std::string> dataset_mode;
  std::optional<std::int64_t> n;
  std::optional<std::string> behavior;
  std::optional<std::string> mode;
  std::optional<double> epsilon;
  std::optional<double> delta;
  std::optional<double> psi;
  std::optional<double> phi;
  std::optional<std::int64_t> T;
  std::optional<std::int64_t> N_e;
  std::optional<std::int64_t> N_v;
  std::optional<double> psi_init;
  std::optional<std::uint64_t> seed;
  std::optional<int> checkpoints;
  std::optional<std::string> out_dir;
};

void add_run_options(CLI::App* cmd, RunOverrides& o) {
  cmd->add_option("--config", o.config, "experiment JSON file");
  cmd->add_option("--model", o.model, "model JSON (sets instance.kind = file)");
  cmd->add_option("--mu", o.mu, "reference distribution JSON or sidecar");
  cmd->add_option("--data", o.data, "stored dataset file");
  cmd->add_option("--dataset-mode", o.dataset_mode, "sync or async");
  cmd->add_option("--n", o.n, "size of a sampled dataset");
  cmd->add_option("--behavior", o.behavior, "behavior policy for async data: uniform or a policy JSON");
  cmd->add_option("--mode", o.mode, "fixed or adaptive")->check(CLI::IsMember({"fixed", "adaptive"}));
  cmd->add_option("--epsilon", o.epsilon, "target accuracy");
  cmd->add_option("--delta", o.delta, "failure probability");
  cmd->add_option("--psi", o.psi, "deviation level (default: C*)");
  cmd->add_option("--phi", o.phi, "Slater margin (default: exact margin)");
  cmd->add_option("--T", o.T, "iterations (per round in adaptive mode)");
  cmd->add_option("--N-e", o.N_e, "reference estimation batch");
  cmd->add_option("--N-v", o.N_v, "verification batch");
  cmd->add_option("--psi-init", o.psi_init, "initial psi of the adaptive driver");
  cmd->add_option("--seed", o.seed, "solver and dataset seed");
  cmd->add_option("--checkpoints", o.checkpoints, "number of checkpoint rows");
  cmd->add_option("--out-dir", o.out_dir, "output directory");
}

ExperimentConfig build_config(const RunOverrides& o) {
  ExperimentConfig c = o.config.empty() ? ExperimentConfig{} : experiment_config_from_json(read_json_file(o.config));
  if (o.model) {
    c.instance.kind = "file";
    c.instance.path = *o.model;
  }
  if (o.mu) c.instance.mu_path = *o.mu;
  if (o.data) c.dataset.path = *o.data;
  if (o.dataset_mode) c.dataset.mode = dataset_mode_from_string(*o.dataset_mode);
  if (o.n) c.dataset.n = *o.n;
  if (o.behavior) c.dataset.behavior = *o.behavior;
  if (o.mode) c.solver.mode = *o.mode;
  if (o.epsilon) c.solver.epsilon = *o.epsilon;
  if (o.delta) c.solver.delta = *o.delta;
  if (o.psi) c.solver.psi = *o.psi;
  if (o.phi) c.solver.phi = *o.phi;
  if (o.T) c.solver.T = *o.T;
  if (o.N_e) c.solver.N_e = *o.N_e;
  if (o.N_v) c.solver.N_v = *o.N_v;
  if (o.psi_init) c.solver.psi_init = *o.psi_init;
  if (o.seed) {
    c.solver.seed = *o.seed;
    c.dataset.seed = *o.seed;
  }
  if (o.checkpoints) c.diagnostics.checkpoints = *o.checkpoints;
  if (o.out_dir) c.output_dir = *o.out_dir;
  return c;
}

void print_summary(const SolveReport& r) {
  std::cout << "psi " << r.psi << "  reward_gap " << r.reward_gap << "  violation " << r.violation
            << "  gap_estimate " << r.gap_estimate << "  tuples " << r.tuples_consumed << "  wall_ms " << r.wall_ms
            << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Offline constrained MDP experiments"};
  app.require_subcommand(1);

  GenArgs g;
  CLI::App* gen = app.add_subcommand("gen", "generate an instance");
  gen->require_subcommand(1);
  CLI::App* gen_random = gen->add_subcommand("random", "random CMDP with a given Slater margin");
  gen_random->add_option("--states,--S", g.states, "number of states");
  gen_random->add_option("--actions,--A", g.actions, "number of actions");
  gen_random->add_option("--constraints,--I", g.constraints, "number of constraints");
  gen_random->add_option("--slater-target", g.slater_target, "Slater margin to reach");
  gen_random->add_option("--mix", g.mix, "weight of the optimal occupancy in mu");
  add_gen_common(gen_random, g);
  CLI::App* gen_hard = gen->add_subcommand("hard", "block-structured hard family");
  gen_hard->add_option("--S,--states", g.states, "state budget");
  gen_hard->add_option("--A,--actions", g.actions, "action budget");
  gen_hard->add_option("--I,--constraints", g.constraints, "constraint budget");
  gen_hard->add_option("--C", g.C, "concentrability level");
  gen_hard->add_option("--varpi", g.varpi, "signal strength in (0, 1/2]");
  add_gen_common(gen_hard, g);
  CLI::App* gen_slater = gen->add_subcommand("slater", "family without a strictly feasible policy");
  gen_slater->add_option("--S,--states", g.states, "number of signal states");
  gen_slater->add_option("--A,--actions", g.actions, "action budget");
  gen_slater->add_option("--C", g.C, "concentrability level");
  gen_slater->add_option("--varpi", g.varpi, "signal strength in (0, 1/2]");
  gen_slater->add_option("--theta", g.theta, "comma-separated 0/1 entries (default all ones)");
  add_gen_common(gen_slater, g);

  std::string model_path, mu_path, behavior = "uniform", data_out = "data.csv", mode = "sync";
  std::int64_t n = 100000, burn_in = 0;
  std::uint64_t sample_seed = 1;
  CLI::App* sample = app.add_subcommand("sample", "draw an offline dataset");
  sample->add_option("--model", model_path, "model JSON")->required();
  sample->add_option("--mu", mu_path, "reference distribution JSON or sidecar (sync)");
  sample->add_option("--mode", mode, "sync or async")->check(CLI::IsMember({"sync", "async"}));
  sample->add_option("--n", n, "number of tuples");
  sample->add_option("--seed", sample_seed, "dataset seed");
  sample->add_option("--behavior", behavior, "uniform or a policy JSON (async)");
  sample->add_option("--burn-in", burn_in, "discarded steps before recording (async)");
  sample->add_option("--out", data_out, "dataset path");

  RunOverrides run_opts;
  CLI::App* run = app.add_subcommand("run", "run the solver and write report.json and checkpoints.csv");
  add_run_options(run, run_opts);

  std::string report_path;
  CLI::App* diag = app.add_subcommand("diagnose", "recompute the numbers of a stored report");
  diag->add_option("--model", model_path, "model JSON")->required();
  diag->add_option("--mu", mu_path, "true reference distribution JSON or sidecar");
  diag->add_option("--report", report_path, "report.json")->required();

  RunOverrides sweep_opts;
  std::string seeds = "1..5";
  CLI::App* sweep = app.add_subcommand("sweep", "run a seed range on a worker pool (CMDP_LAB_THREADS caps it)");
  add_run_options(sweep, sweep_opts);
  sweep->add_option("--seeds", seeds, "seed range a..b");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (gen_random->parsed()) {
      const CmdpModel model = random_cmdp(g.states, g.actions, g.constraints, g.gamma, g.slater_target, g.seed);
      const CmdpSolution sol = solve_cmdp(model);
      const int pairs = model.num_pairs();
      Vector mu = Vector::Constant(pairs, 1.0 / pairs);
      nlohmann::json side{{"optimal_value", nullptr}};
      if (sol.status == LpStatus::Optimal) {
        mu = g.mix * (1.0 - g.gamma) * sol.occupancy + (1.0 - g.mix) * mu;
        mu /= mu.sum();
        side["optimal_value"] = sol.value;
        side["optimal_policy"] =
            policy_to_json(policy_of_occupancy(OccupancyMeasure(sol.occupancy, g.states, g.actions)));
      }
      side["mu"] = vector_to_json(mu);
      write_instance(model, side, g);
    } else if (gen_hard->parsed()) {
      const HardInstance h =
          build_hard_cmdp(random_hard_params(g.states, g.actions, g.constraints, g.C, g.gamma, g.seed, g.varpi));
      write_instance(h.model, sidecar_json(h), g);
    } else if (gen_slater->parsed()) {
      const std::vector<int> theta = g.theta.empty() ? std::vector<int>(g.states, 1) : parse_theta(g.theta);
      const HardInstance h = build_slater_instance(g.states, g.actions, g.C, g.gamma, theta, g.varpi);
      write_instance(h.model, sidecar_json(h), g);
    } else if (sample->parsed()) {
      const CmdpModel model = load_model(model_path);
      OfflineDataset data;
      if (mode == "async") {
        const Policy pi_b = behavior == "uniform" ? Policy::uniform(model.num_states(), model.num_actions())
                                                  : policy_from_json(read_json_file(behavior));
        data = sample_async(model, pi_b, n, sample_seed, burn_in);
      } else {
        if (mu_path.empty()) throw std::invalid_argument("sample: synchronous data need --mu");
        const nlohmann::json doc = read_json_file(mu_path);
        data = sample_sync(model, vector_from_json(doc.is_object() ? doc.at("mu") : doc), n, sample_seed);
      }
      save_dataset(data, data_out);
    } else if (run->parsed()) {
      print_summary(run_experiment(build_config(run_opts)));
    } else if (diag->parsed()) {
      const CmdpModel model = load_model(model_path);
      Vector mu;
      if (!mu_path.empty()) {
        const nlohmann::json doc = read_json_file(mu_path);
        mu = vector_from_json(doc.is_object() ? doc.at("mu") : doc);
      }
      const DiagnoseOutcome out = diagnose_report(model, mu, read_json_file(report_path));
      const auto row = [](const Diagnostics& d) {
        return nlohmann::json{{"opt_reward", d.opt_reward},
                              {"policy_reward", d.policy_reward},
                              {"reward_gap", d.reward_gap},
                              {"violation", d.violation},
                              {"gap_estimate", d.gap_estimate}};
      };
      std::cout << nlohmann::json{{"recomputed", row(out.recomputed)},
                                  {"mismatches", out.mismatches}}
                       .dump(2)
                << '\n';
      if (!out.mismatches.empty()) return 3;
    } else if (sweep->parsed()) {
      const auto dots = seeds.find("..");
      if (dots == std::string::npos) throw std::invalid_argument("sweep: --seeds must look like a..b");
      const std::uint64_t first = std::stoull(seeds.substr(0, dots));
      const std::uint64_t last = std::stoull(seeds.substr(dots + 2));
      const ExperimentConfig config = build_config(sweep_opts);
      const auto reports = run_sweep(config, first, last, sweep_threads());
      for (const SolveReport& r : reports) {
        std::cout << "seed " << r.seed << "  ";
        print_summary(r);
      }
      if (reports.size() != last - first + 1) {
        std::cerr << "sweep: " << (last - first + 1 - reports.size()) << " run(s) failed; see summary.csv\n";
        return 1;
      }
    }
  } catch (const PreconditionError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return 1;
  }
  return 0;
}
