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

#include <json.hpp>

#include "cmdp/feasible_regions.hpp"
#include "cmdp/model.hpp"
#include "cmdp/simplex.hpp"

namespace cmdp {

/// Exact optimum of the occupancy LP: max <nu, r> s.t. A^T nu = rho0, U nu >= 0.
struct CmdpSolution {
  LpStatus status = LpStatus::Infeasible;
  double value = 0.0;
  /// Optimal basic occupancy; all zeros when infeasible.
  Vector occupancy;
  LpResult lp;
};

CmdpSolution solve_cmdp(const CmdpModel& model);

/// Minimizer of psi over the optimal face (value = +inf when no optimal
/// occupancy is covered by mu) together with the minimizing occupancy.
struct Concentrability {
  double value = 0.0;
  Vector occupancy;
};

Concentrability concentrability(const CmdpModel& model, const Vector& mu);

struct SlaterMargin {
  /// (1 - gamma) max_nu min_i <u_i, nu>; 1 when there are no constraints.
  double value = 1.0;
  Vector occupancy;
};

SlaterMargin slater_margin(const CmdpModel& model);

/// Same margin restricted to occupancies whose normalized ratio against mu
/// lies in the deviation set of level psi; -inf if that set is empty.
SlaterMargin restricted_slater_margin(const CmdpModel& model, const Vector& mu, double psi);

/// Data of the reweighted saddle problem: W = diag(weights), mu_hat > 0.
struct SaddleSpec {
  Vector mu_hat;
  Vector weights;
  double psi = 1.0;
  double kappa = 0.0;
  double phi = 1.0;
};

/// Closed-form inner minimum J_kappa(x) = r^T Wx - R_V ||A^T Wx - rho0||_1
/// - R_Lambda ||[U_kappa Wx]_-||_inf.
double penalized_value(const CmdpModel& model, const SaddleSpec& spec, const Vector& x);

struct RestrictedValue {
  double value = 0.0;
  Vector x;
};

/// max_{x in X} J_kappa(x) via an epigraph LP.
RestrictedValue restricted_value(const CmdpModel& model, const SaddleSpec& spec);

/// True for x in X within the region tolerance.
bool in_primal_region(const FeasibleRegions& regions, const Vector& mu_hat, const Vector& x,
                      double slack);

struct GroundTruth {
  double opt_reward = 0.0;
  Vector opt_occupancy;
  double concentrability = 0.0;
  double slater_margin = 0.0;
  int effective_sparsity = 0;
};

/// Throws std::runtime_error if the model has no safe policy.
GroundTruth ground_truth(const CmdpModel& model, const Vector& mu);

nlohmann::json to_json(const GroundTruth& truth);

/// Checks that mu is a probability vector over pairs; throws std::invalid_argument.
void check_pair_distribution(const CmdpModel& model, const Vector& mu, const char* module);

}  // namespace cmdp
