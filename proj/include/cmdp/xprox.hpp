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

#include <optional>
#include <vector>

#include "cmdp/model.hpp"

namespace cmdp {

/**
 * Capped KL proximal problem with a single nonzero gradient entry:
 *
 *   min_y <y, g> + KL(y || y0)
 *   s.t. 0 <= y_i <= a_i, sum_i y_i <= B1, sum_i c_i y_i <= B2,
 *
 * where g is zero except g[hit] = gradient and KL is the generalized
 * divergence sum y log(y/y0) - y + y0.
 */
struct ProxProblem {
  Vector y0;
  Vector caps;
  Vector weights;
  double mass_cap = 0.0;
  double weighted_cap = 0.0;
  int hit = 0;
  double gradient = 0.0;

  /// Throws std::invalid_argument unless y0 > 0 lies in the set and all data are positive.
  void validate() const;
};

/// Sign pattern of the multipliers (alpha on the mass cap, beta on the weighted cap).
enum class KktCase { BothSlack = 1, MassActive = 2, WeightedActive = 3, BothActive = 4 };

const char* to_string(KktCase c);

struct ProxSolution {
  Vector y;
  double alpha = 0.0;
  double beta = 0.0;
  KktCase kkt_case = KktCase::BothSlack;
  /// True when the hit coordinate sits on its cap.
  bool hit_capped = false;
  double residual = 0.0;
};

/**
 * Largest violation of the KKT system: stationarity on free coordinates,
 * sign of the gradient on capped coordinates, primal feasibility (relative
 * to each bound), complementary slackness and alpha, beta >= 0.
 */
double kkt_residual(const ProxProblem& problem, const Vector& y, double alpha, double beta);

/// Solves the problem by trying the four multiplier sign patterns in order.
/// Throws std::runtime_error if no candidate validates.
ProxSolution solve_prox(const ProxProblem& problem);

/// Every candidate the case analysis produces (for diagnostics and tests).
std::vector<ProxSolution> prox_candidates(const ProxProblem& problem);

/**
 * Stateful form used inside the solver loop. Owns the current point and the
 * cached sums sum y and sum c y, so a step whose multipliers are zero costs
 * O(1) and a step with only the mass cap active costs one rescale.
 */
class CappedKlProx {
 public:
  CappedKlProx(Vector y, Vector caps, Vector weights, double mass_cap, double weighted_cap);

  /// y <- argmin <y, gradient e_hit> + KL(y || y_current) over the set.
  KktCase step(int hit, double gradient);

  const Vector& point() const { return y_; }
  double mass() const { return sum_; }
  double weighted_mass() const { return wsum_; }
  /// KKT residual of the most recent step.
  double last_residual() const { return last_residual_; }

 private:
  void refresh_sums();

  Vector y_;
  Vector caps_;
  Vector weights_;
  double mass_cap_;
  double weighted_cap_;
  double sum_ = 0.0;
  double wsum_ = 0.0;
  double last_residual_ = 0.0;
  long steps_ = 0;
};

}  // namespace cmdp
