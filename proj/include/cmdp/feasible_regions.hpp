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

#include <stdexcept>

namespace cmdp {

/**
 * Radii of the V ball and the lambda ball, and the three caps that define
 * the primal set X = {x >= 0 : x/mu_hat <= psi/(1-gamma) per coordinate,
 * sum x/mu_hat <= N psi/(1-gamma), sum x <= 4/(1-gamma)}.
 */
struct FeasibleRegions {
  double psi;
  double value_radius;
  double dual_radius;
  double x_cap_per_coord;
  double x_cap_aggregate;
  double x_cap_mass;

  FeasibleRegions(double discount, double phi, double psi_, int sparsity)
      : psi(psi_),
        value_radius(8.0 * (1.0 + 2.0 / phi) / (1.0 - discount)),
        dual_radius(8.0 / phi),
        x_cap_per_coord(psi_ / (1.0 - discount)),
        x_cap_aggregate(sparsity * psi_ / (1.0 - discount)),
        x_cap_mass(4.0 / (1.0 - discount)) {
    if (!(discount > 0.0 && discount < 1.0)) throw std::invalid_argument("dpdl: discount must lie in (0, 1)");
    if (!(phi > 0.0)) throw std::invalid_argument("dpdl: Slater margin phi must be positive");
    if (!(psi_ >= 1.0)) throw std::invalid_argument("dpdl: psi must be >= 1");
    if (sparsity < 1) throw std::invalid_argument("dpdl: sparsity N must be positive");
  }
};

}  // namespace cmdp
