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

#include <Eigen/Dense>

#include "cmdp/tolerances.hpp"

namespace cmdp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/**
 * Tabular constrained MDP.
 *
 * State-action pairs are flattened row-major: pair(s, a) = s * |A| + a.
 * The transition kernel is stored as a (|S||A|) x |S| matrix whose row
 * pair(s, a) is P(. | s, a); utilities are an I x (|S||A|) matrix whose
 * row i is u_i. Instances are validated on construction and immutable.
 */
class CmdpModel {
 public:
  CmdpModel(int num_states, int num_actions, double discount, Matrix transition,
            Vector reward, Matrix utilities, Vector initial_dist);

  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }
  int num_constraints() const { return static_cast<int>(utilities_.rows()); }
  int num_pairs() const { return num_states_ * num_actions_; }
  double discount() const { return discount_; }

  int pair(int s, int a) const { return s * num_actions_ + a; }

  const Matrix& transition() const { return transition_; }
  double transition(int s, int a, int next) const {
    return transition_(pair(s, a), next);
  }
  const Vector& reward() const { return reward_; }
  double reward(int s, int a) const { return reward_(pair(s, a)); }
  const Matrix& utilities() const { return utilities_; }
  double utility(int i, int s, int a) const { return utilities_(i, pair(s, a)); }
  const Vector& initial_dist() const { return initial_dist_; }

  /// min{|S||A|, |S| + I}: the support bound of an optimal basic solution.
  int effective_sparsity() const;

 private:
  int num_states_;
  int num_actions_;
  double discount_;
  Matrix transition_;
  Vector reward_;
  Matrix utilities_;
  Vector initial_dist_;
};

/// Stochastic kernel pi(a|s), stored as an |S| x |A| matrix.
class Policy {
 public:
  explicit Policy(Matrix probs);

  static Policy uniform(int num_states, int num_actions);
  static Policy deterministic(int num_actions, const std::vector<int>& actions);

  const Matrix& probs() const { return probs_; }
  double operator()(int s, int a) const { return probs_(s, a); }
  int num_states() const { return static_cast<int>(probs_.rows()); }
  int num_actions() const { return static_cast<int>(probs_.cols()); }

 private:
  Matrix probs_;
};

/// Unnormalized state-action occupancy; total mass 1/(1-gamma) when it comes
/// from a policy.
class OccupancyMeasure {
 public:
  OccupancyMeasure(Vector values, int num_states, int num_actions);

  const Vector& values() const { return values_; }
  double operator()(int s, int a) const { return values_(s * num_actions_ + a); }
  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }
  /// Marginal over states, sum_a nu(s, a).
  Vector state_marginal() const;

 private:
  Vector values_;
  int num_states_;
  int num_actions_;
};

struct PolicyValue {
  double reward = 0.0;
  Vector utilities;
};

/// A[(s,a), s'] = 1{s' = s} - gamma P(s'|s,a).
Matrix flow_matrix(const CmdpModel& model);

/// State-to-state kernel P_pi(s, s') = sum_a pi(a|s) P(s'|s,a).
Matrix policy_transition(const CmdpModel& model, const Policy& pi);

OccupancyMeasure occupancy_of_policy(const CmdpModel& model, const Policy& pi);

/// Row-normalizes nu; rows with mass below the zero-mass tolerance become uniform.
Policy policy_of_occupancy(const OccupancyMeasure& nu);
/// Same map applied to a raw nonnegative vector over pairs.
Policy policy_of_weights(const Vector& weights, int num_states, int num_actions);

PolicyValue evaluate(const CmdpModel& model, const Policy& pi);

/// A^T nu - rho0.
Vector flow_residual(const CmdpModel& model, const OccupancyMeasure& nu);
Vector flow_residual(const CmdpModel& model, const Vector& nu);

/// sum_i [J_i^u]_-.
double violation(const PolicyValue& value);
double violation(const CmdpModel& model, const Policy& pi);

}  // namespace cmdp
