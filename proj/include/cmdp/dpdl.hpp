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

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include <json.hpp>

#include "cmdp/dataset.hpp"
#include "cmdp/feasible_regions.hpp"
#include "cmdp/model.hpp"

namespace cmdp {

/// What the learner knows about the problem: the emitted rewards and
/// utilities, the discount and the initial distribution. Never the kernel.
struct ProblemInfo {
  Emission emission;
  double discount = 0.0;
  Vector initial_dist;

  int num_states() const { return emission.num_states; }
  int num_actions() const { return emission.num_actions; }
  int num_pairs() const { return emission.num_pairs(); }
  int num_constraints() const { return emission.num_constraints(); }
  /// N = min(|S||A|, |S| + I).
  int sparsity() const;

  static ProblemInfo of(const CmdpModel& model);
};

struct DpdlConfig {
  std::int64_t T = 0;
  double epsilon = 0.0;
  double delta = 0.0;
  double psi = 1.0;
  double phi = 1.0;
  double kappa = 0.0;
  double eta = 0.0;
  double alpha_V = 0.0;
  double alpha_lambda = 0.0;
  double alpha_x = 0.0;
  std::int64_t N_e = 0;
  double varsigma = 0.0;
  std::uint64_t seed = 0;

  /// Step size bound: eta <= min(alpha_lambda / M_lambda, alpha_x / M_x) / 2.
  double eta_cap(double discount) const;
  /// Throws PreconditionError if a field is out of range or eta exceeds eta_cap.
  void validate(double discount) const;
};

nlohmann::json to_json(const DpdlConfig& config);
DpdlConfig dpdl_config_from_json(const nlohmann::json& doc);

/// Overrides for default_schedule. Unset fields take the theoretical value,
/// except varsigma: it defaults to the larger of the theoretical floor and
/// the smallest floor for which eta = 1/sqrt(T) satisfies the step size bound.
struct ScheduleOptions {
  std::optional<std::int64_t> T;
  std::optional<double> varsigma;
  std::optional<std::int64_t> N_e;
  /// Multiplier on the heuristic default T.
  double budget = 1.0;
  std::uint64_t seed = 0;
};

DpdlConfig default_schedule(double epsilon, double delta, double psi, double phi,
                            const ProblemInfo& problem, const ScheduleOptions& options = {});

/// Floor on mu_hat that theory prescribes.
double theoretical_varsigma(double epsilon, double psi, double phi, double discount, int sparsity);
/// Reference-estimation batch that theory prescribes (may be astronomically large).
double theoretical_estimation_batch(double epsilon, double delta, double psi, double phi,
                                    double discount, int sparsity, int num_pairs);

struct ReferenceEstimate {
  Vector mu_hat;
  Vector counts;
  double varsigma = 0.0;
  std::int64_t N_e = 0;
};

/// mu_hat = max(N(s,a)/N_e, varsigma) over the next N_e tuples of the stream.
ReferenceEstimate estimate_reference(TupleStream& stream, std::int64_t N_e, double varsigma);

struct Iterate {
  Vector V;
  Vector lambda;
  Vector x;
};

/// Stochastic gradients at one tuple. g_x is one-hot at `pair`.
struct GradientEstimate {
  Vector g_V;
  Vector g_lambda;
  int pair = 0;
  double g_x = 0.0;
};

GradientEstimate estimate_gradients(const Iterate& z, const SampleTuple& sample, const Vector& mu_hat,
                                    double discount, double kappa, int num_actions);

/// Clamped gradient step on the value ball.
Vector update_V(const Vector& V, const Vector& g_V, double eta, double alpha_V, double radius);

/// Exponentiated step, then scaling onto the l1 ball of the given radius.
Vector update_lambda(const Vector& lambda, const Vector& g_lambda, double eta, double alpha_lambda,
                     double radius);

/// Ascent step on x: KL prox with gradient -(eta/alpha_x) g_x over X.
Vector update_x(const Vector& x, int pair, double g_x, double eta, double alpha_x,
                const FeasibleRegions& regions, const Vector& mu_hat);

/// V = 0, lambda = 1/(phi I), x = N mu_hat / (|S||A| (1 - gamma)).
Iterate initial_iterate(const ProblemInfo& problem, const Vector& mu_hat, double phi);

struct DpdlCheckpoint {
  std::int64_t t = 0;
  double wall_ms = 0.0;
  /// Average of x^1..x^t.
  Vector x_bar;
  /// Whether the current iterate lies in all three feasible sets (1e-9 slack).
  bool iterate_feasible = true;
};

/// Largest observed gradient magnitudes, for the pathwise bounds.
struct GradientExtremes {
  double g_V_norm = 0.0;
  double g_lambda_inf = 0.0;
  double g_x_abs = 0.0;
};

struct DpdlResult {
  ReferenceEstimate reference;
  Vector x_bar;
  Vector V_bar;
  Vector lambda_bar;
  Policy policy = Policy::uniform(1, 1);
  Iterate last;
  std::int64_t iterations = 0;
  std::int64_t tuples_consumed = 0;
  /// Counts of accepted KKT patterns, indexed by KktCase (entry 0 unused).
  std::array<std::int64_t, 5> kkt_cases{};
  double max_kkt_residual = 0.0;
  GradientExtremes extremes;
  std::vector<DpdlCheckpoint> checkpoints;
  double wall_ms = 0.0;
};

struct RunOptions {
  /// Number of evenly spaced checkpoints (0 disables them).
  int checkpoints = 100;
};

/**
 * Runs the deviation-controlled primal-dual loop: estimates mu_hat from the
 * first N_e tuples, then performs T updates, each consuming one fresh tuple.
 * For asynchronous data the initial states s0 are drawn from rho0 with the
 * solver stream of config.seed.
 */
DpdlResult run_dpdl(const ProblemInfo& problem, TupleStream& stream, const DpdlConfig& config,
                    const RunOptions& options = {});

/// Same loop with a precomputed reference estimate (no tuples spent on it).
DpdlResult run_dpdl(const ProblemInfo& problem, TupleStream& stream, const DpdlConfig& config,
                    const ReferenceEstimate& reference, const RunOptions& options = {});

}  // namespace cmdp
