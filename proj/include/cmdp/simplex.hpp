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

#include <limits>
#include <vector>

#include "cmdp/model.hpp"

namespace cmdp {

enum class Sense { LessEqual, Equal, GreaterEqual };
enum class Direction { Maximize, Minimize };
enum class LpStatus { Optimal, Infeasible, Unbounded };

const char* to_string(LpStatus status);

struct LinearConstraint {
  Vector coefficients;
  Sense sense = Sense::LessEqual;
  double rhs = 0.0;
};

/**
 * Dense linear program over n variables.
 *
 * Variables default to [0, +inf). Lower bounds may be finite or -inf, upper
 * bounds finite or +inf.
 */
class LinearProgram {
 public:
  LinearProgram(int num_variables, Direction direction);

  int num_variables() const { return static_cast<int>(objective_.size()); }
  int num_constraints() const { return static_cast<int>(constraints_.size()); }
  Direction direction() const { return direction_; }

  Vector& objective() { return objective_; }
  const Vector& objective() const { return objective_; }
  const std::vector<LinearConstraint>& constraints() const { return constraints_; }
  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }

  void add_constraint(Vector coefficients, Sense sense, double rhs);
  void set_bounds(int j, double lower, double upper);
  void set_free(int j) { set_bounds(j, -kInf, kInf); }

  /// Throws std::invalid_argument on inconsistent dimensions or non-finite data.
  void validate() const;

  static constexpr double kInf = std::numeric_limits<double>::infinity();

 private:
  Direction direction_;
  Vector objective_;
  std::vector<LinearConstraint> constraints_;
  Vector lower_;
  Vector upper_;
};

struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  double value = 0.0;
  Vector primal;
  /// Multipliers of the original rows, sign convention of the minimization
  /// form (objective negated for Maximize). Zero for redundant rows.
  Vector dual;
  /// Largest bound or row violation of `primal` in the original LP.
  double primal_residual = 0.0;
  /// Largest negative reduced cost at the final basis.
  double dual_residual = 0.0;
  /// |c^T x - b^T y| in the internal standard form.
  double duality_gap = 0.0;
  int iterations = 0;
};

/**
 * Two-phase dense tableau simplex.
 *
 * Dantzig pricing with a switch to Bland's rule after a run of degenerate
 * pivots; the final basis is refactored with LU to recover primal and dual
 * values and the optimality certificate. Throws std::runtime_error if the
 * iteration guard trips.
 */
LpResult solve_lp(const LinearProgram& lp);

}  // namespace cmdp
