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

#include <vector>

#include "cmdp/model.hpp"

namespace cmdp {

bool is_irreducible(const Matrix& chain);
/// Period of an irreducible chain (1 means aperiodic).
int chain_period(const Matrix& chain);

/// Unique stationary law of an irreducible row-stochastic matrix.
/// Throws PreconditionError for reducible chains.
Vector stationary_state_distribution(const Matrix& chain);

/// mu(s, a) = mu_pi(s) pi(a|s) for the state chain induced by pi.
Vector stationary_distribution(const CmdpModel& model, const Policy& pi);

/// ||mu P - mu||_1 for a state distribution.
double stationary_residual(const Matrix& chain, const Vector& mu);

struct MixingProfile {
  int t_mix = 0;
  /// curve[t-1] = E(t) = max_s TV(mu, P^t(s, .)) for t = 1..4 t_mix.
  std::vector<double> curve;
};

/// Exact curve by repeated powers; PreconditionError if the chain is not
/// irreducible and aperiodic, or if E(t) > 1/4 up to `cap` steps.
MixingProfile mixing_time(const Matrix& chain, int cap = 100000);
MixingProfile mixing_time(const CmdpModel& model, const Policy& pi, int cap = 100000);

}  // namespace cmdp
