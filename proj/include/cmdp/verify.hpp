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

#include "cmdp/dpdl.hpp"

namespace cmdp {

/// Multipliers of the two acceptance tests: ||Delta_p||_1 <= flow * phi (1-gamma) eps
/// and min_i J^{u,kappa}_i >= -utility * phi eps.
struct VerifyThresholds {
  double flow = 1.5;
  double utility = 3.0;
};

struct VerifyReport {
  bool passed = false;
  double J_hat = 0.0;
  Vector J_u_hat;
  Vector Delta_p_hat;
  std::int64_t N_v = 0;
  /// Absolute thresholds the statistics were compared against.
  double flow_threshold = 0.0;
  double utility_threshold = 0.0;

  double flow_residual() const { return Delta_p_hat.lpNorm<1>(); }
  /// Re-applies the test to the stored statistics.
  bool decide() const;
};

nlohmann::json to_json(const VerifyReport& report);

/// N_v = ceil(64 |S| psi l / (phi^2 (1-gamma)^4 eps_ver^2)), eps_ver = eps/10,
/// l = 4 log(40 |S| max(I,1) / delta).
double theoretical_verification_batch(double epsilon, double delta, double psi, double phi, double discount,
                                      int num_states, int num_constraints);

/**
 * Importance-weighted estimates of the reward, the kappa-shifted utilities
 * and the flow residual A^T W x_bar - rho0 from N_v fresh tuples, computed
 * in one pass over exact count tables.
 */
VerifyReport verify(const Vector& x_bar, const Vector& mu_hat, const ProblemInfo& problem, TupleStream& stream,
                    std::int64_t N_v, double epsilon, double kappa, double phi,
                    const VerifyThresholds& thresholds = {});

struct AdaptiveOptions {
  double psi_init = 1.0;
  int max_rounds = 60;
  double exit_constant = 500.0;
  VerifyThresholds thresholds;
  /// Per-round overrides; unset fields follow default_schedule and the
  /// theoretical verification batch.
  std::optional<std::int64_t> T;
  std::optional<std::int64_t> N_e;
  std::optional<std::int64_t> N_v;
  std::optional<double> varsigma;
  double budget = 1.0;
  std::uint64_t seed = 0;
  RunOptions run{0};
};

struct AdaptiveRound {
  int K = 0;
  double psi = 0.0;
  double delta = 0.0;
  DpdlConfig config;
  VerifyReport verification;
  /// J^K: the verified estimate, absent when verification failed.
  std::optional<double> J;
  /// "exit", "verify-failed", "no-previous" or "improvement".
  std::string outcome;
  Policy policy = Policy::uniform(1, 1);
  /// Solver output of the round (not serialized with the trace).
  Vector x_bar;
  Vector mu_hat;
  std::vector<DpdlCheckpoint> checkpoints;
  std::int64_t tuples = 0;
};

struct AdaptiveTrace {
  double epsilon_prime = 0.0;
  double epsilon = 0.0;
  double delta = 0.0;
  std::vector<AdaptiveRound> rounds;
  std::optional<Policy> policy;
  std::string exit_reason;
};

nlohmann::json to_json(const AdaptiveTrace& trace);

/// Raised when the driver stops without a certified policy; carries the
/// rounds completed so far.
class AdaptiveError : public PreconditionError {
 public:
  AdaptiveError(const std::string& what, AdaptiveTrace trace)
      : PreconditionError(what), trace_(std::move(trace)) {}
  const AdaptiveTrace& trace() const { return trace_; }

 private:
  AdaptiveTrace trace_;
};

/**
 * Doubling driver for unknown concentrability. Round K runs the solver and
 * the verifier at eps = eps'/15, delta_K = 6 delta / (pi^2 K^2), psi_K =
 * psi_init 2^{K-1}, and stops once rounds K-1 and K both verify and
 * J^K - J^{K-1} <= exit_constant * eps.
 */
AdaptiveTrace adaptive_dpdl(const ProblemInfo& problem, TupleStream& stream, double epsilon_prime, double delta,
                            double phi, const AdaptiveOptions& options = {});

}  // namespace cmdp
