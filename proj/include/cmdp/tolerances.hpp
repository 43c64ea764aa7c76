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

namespace cmdp {

/// Numeric tolerances shared by every module. One record so that a change
/// in one place propagates to validation, oracles and tests alike.
struct Tolerances {
  /// Row sums of stochastic objects (transition rows, rho0, policies).
  double stochastic = 1e-12;
  /// l1 flow residual of an occupancy measure produced from a policy.
  double flow = 1e-9;
  /// Total discounted mass 1/(1-gamma).
  double mass = 1e-9;
  /// Row mass below which policy extraction falls back to uniform.
  double zero_mass = 1e-15;
  /// Simplex primal/dual feasibility.
  double lp_feasibility = 1e-9;
  /// Simplex optimality certificate (duality gap, complementary slackness).
  double lp_certificate = 1e-8;
  /// Stationary distribution residual ||mu P - mu||_1.
  double stationary = 1e-10;
  /// KKT residual accepted for the capped KL proximal step.
  double kkt = 1e-8;
  /// Membership slack for the primal-dual feasible sets.
  double region = 1e-9;
};

inline constexpr Tolerances kTolerances{};

}  // namespace cmdp
