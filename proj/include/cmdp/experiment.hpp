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

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cmdp/dataset.hpp"
#include "cmdp/oracle.hpp"
#include "cmdp/verify.hpp"

namespace cmdp {

/// Where the model and its reference distribution come from.
struct InstanceSpec {
  /// "random", "hard", "slater" or "file".
  std::string kind = "random";
  /// Model JSON for kind "file".
  std::string path;
  /// Reference distribution: a JSON vector or a sidecar with a "mu" field.
  /// Required for "file" unless the data are asynchronous.
  std::string mu_path;
  int states = 6;
  int actions = 3;
  int constraints = 2;
  double gamma = 0.9;
  double slater_target = 0.2;
  /// Random instances: mu = mix (1-gamma) nu* + (1 - mix) uniform.
  double mix = 0.5;
  double C = 2.0;
  double varpi = 0.5;
  /// Slater family only; empty means all ones.
  std::vector<int> theta;
  std::uint64_t seed = 1;
};

struct DatasetSpec {
  DatasetMode mode = DatasetMode::Synchronous;
  /// Stored dataset file; takes precedence over sampling.
  std::string path;
  /// Size of a sampled dataset; unset means an unbounded simulator stream.
  std::optional<std::int64_t> n;
  std::uint64_t seed = 1;
  /// "uniform" or a policy JSON file (asynchronous data).
  std::string behavior = "uniform";
  std::int64_t burn_in = 0;
};

struct SolverSpec {
  /// "fixed" or "adaptive".
  std::string mode = "fixed";
  /// Target accuracy; the adaptive driver treats it as eps'.
  double epsilon = 0.05;
  double delta = 0.1;
  /// Unset psi and phi take the ground-truth concentrability and margin.
  std::optional<double> psi;
  std::optional<double> phi;
  std::optional<std::int64_t> T;
  std::optional<std::int64_t> N_e;
  std::optional<std::int64_t> N_v;
  std::optional<double> varsigma;
  double budget = 1.0;
  std::uint64_t seed = 1;
  double psi_init = 1.0;
  int max_rounds = 60;
  double exit_constant = 500.0;
  VerifyThresholds thresholds;
};

struct DiagnosticsSpec {
  int checkpoints = 100;
  bool ground_truth = true;
};

struct ExperimentConfig {
  InstanceSpec instance;
  DatasetSpec dataset;
  SolverSpec solver;
  DiagnosticsSpec diagnostics;
  std::string output_dir = "out";

  /// Throws std::invalid_argument for out-of-range fields or missing files.
  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& config);
/// Fields absent from the document keep their defaults; unknown keys are rejected.
ExperimentConfig experiment_config_from_json(const nlohmann::json& doc);

/// A model together with the simulator-side pair distribution of its data.
struct ResolvedInstance {
  CmdpModel model;
  /// Synchronous sampling distribution, or the stationary pair law under
  /// the behavior policy for asynchronous data.
  Vector mu;
  std::optional<Policy> behavior;
};

ResolvedInstance resolve_instance(const ExperimentConfig& config);

/// Tuple source described by the dataset spec.
std::unique_ptr<TupleStream> open_stream(const ExperimentConfig& config, const ResolvedInstance& instance);

struct CurvePoint {
  std::int64_t t = 0;
  double gap_estimate = 0.0;
  double reward_gap = 0.0;
  double violation = 0.0;
  double eta = 0.0;
  double wall_ms = 0.0;
};

struct SolveReport {
  Policy policy = Policy::uniform(1, 1);
  Vector x_bar;
  Vector mu_hat;
  double psi = 1.0;
  double phi = 1.0;
  double kappa = 0.0;
  double eta = 0.0;
  double opt_reward = 0.0;
  double policy_reward = 0.0;
  /// J(pi*) - J(pi_bar).
  double reward_gap = 0.0;
  double violation = 0.0;
  /// max_X J_kappa - J_kappa(x_bar) with W = mu / mu_hat.
  double gap_estimate = 0.0;
  std::vector<CurvePoint> curve;
  double wall_ms = 0.0;
  std::int64_t tuples_consumed = 0;
  std::uint64_t seed = 0;
  nlohmann::json config;
  std::optional<AdaptiveTrace> adaptive;
};

nlohmann::json to_json(const SolveReport& report);

struct Diagnostics {
  double opt_reward = 0.0;
  double policy_reward = 0.0;
  double reward_gap = 0.0;
  double violation = 0.0;
  double gap_estimate = 0.0;
};

/// Saddle data of a stored solution against the true mu.
SaddleSpec saddle_spec(const Vector& mu, const Vector& mu_hat, double psi, double kappa, double phi);

/// Gap(x_bar) = restricted_value - J_kappa(x_bar); pass the restricted value
/// to reuse it across checkpoints.
double duality_gap(const CmdpModel& model, const SaddleSpec& spec, const Vector& x_bar,
                   std::optional<double> restricted = std::nullopt);

Diagnostics diagnose(const CmdpModel& model, const Vector& mu, const Policy& policy, const Vector& x_bar,
                     const Vector& mu_hat, double psi, double kappa, double phi);

struct DiagnoseOutcome {
  Diagnostics recomputed;
  Diagnostics stored;
  /// Names of fields that differ by more than the tolerance.
  std::vector<std::string> mismatches;
};

/// Recomputes every number of a stored report. Throws std::invalid_argument
/// when mu is empty: the diagnostics need simulator ground truth.
DiagnoseOutcome diagnose_report(const CmdpModel& model, const Vector& mu, const nlohmann::json& report,
                                double tolerance = 1e-6);

/// Runs one experiment; writes report.json and checkpoints.csv to the output
/// directory (and adaptive.json in adaptive mode) when `write` is set.
SolveReport run_experiment(const ExperimentConfig& config, bool write = true);

void write_curve_csv(const std::vector<CurvePoint>& curve, const std::string& path);

/// Runs seeds first..last (solver and dataset seeds offset by the seed) on a
/// worker pool of at most `threads` workers, each into output_dir/seed_<s>,
/// then writes output_dir/summary.csv.
std::vector<SolveReport> run_sweep(const ExperimentConfig& config, std::uint64_t first, std::uint64_t last,
                                   int threads);

/// Worker count: CMDP_LAB_THREADS if set, else the hardware concurrency.
int sweep_threads();

}  // namespace cmdp
