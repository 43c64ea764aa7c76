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

#include "cmdp/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace cmdp {

namespace {

void require(bool condition, const std::string& message) {
  if (!condition) throw std::invalid_argument("cmdp-core: " + message);
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace

CmdpModel::CmdpModel(int num_states, int num_actions, double discount,
                     Matrix transition, Vector reward, Matrix utilities,
                     Vector initial_dist)
    : num_states_(num_states),
      num_actions_(num_actions),
      discount_(discount),
      transition_(std::move(transition)),
      reward_(std::move(reward)),
      utilities_(std::move(utilities)),
      initial_dist_(std::move(initial_dist)) {
  require(num_states_ >= 1, "num_states must be positive");
  require(num_actions_ >= 1, "num_actions must be positive");
  require(discount_ > 0.0 && discount_ < 1.0, "discount must lie in (0, 1)");
  const int n = num_pairs();
  require(transition_.rows() == n && transition_.cols() == num_states_,
          "transition must be (|S||A|) x |S|");
  require(reward_.size() == n, "reward must have |S||A| entries");
  if (utilities_.size() == 0) utilities_.resize(0, n);
  require(utilities_.cols() == n, "utilities must have |S||A| columns");
  require(initial_dist_.size() == num_states_, "rho0 must have |S| entries");
  require(all_finite(transition_) && reward_.allFinite() &&
              all_finite(utilities_) && initial_dist_.allFinite(),
          "model entries must be finite");

  const double tol = kTolerances.stochastic;
  require(transition_.minCoeff() >= 0.0, "transition entries must be >= 0");
  for (int k = 0; k < n; ++k) {
    const double row = transition_.row(k).sum();
    require(std::abs(row - 1.0) <= tol,
            "transition row " + std::to_string(k) + " sums to " +
                std::to_string(row));
  }
  require(initial_dist_.minCoeff() >= 0.0, "rho0 entries must be >= 0");
  require(std::abs(initial_dist_.sum() - 1.0) <= tol, "rho0 must sum to 1");
  require(reward_.cwiseAbs().maxCoeff() <= 1.0, "|r(s,a)| must be <= 1");
  if (utilities_.size() > 0)
    require(utilities_.cwiseAbs().maxCoeff() <= 1.0, "|u_i(s,a)| must be <= 1");
}

int CmdpModel::effective_sparsity() const {
  return std::min(num_pairs(), num_states_ + num_constraints());
}

Policy::Policy(Matrix probs) : probs_(std::move(probs)) {
  require(probs_.rows() >= 1 && probs_.cols() >= 1, "policy must be nonempty");
  require(probs_.allFinite() && probs_.minCoeff() >= 0.0,
          "policy entries must be finite and >= 0");
  for (Eigen::Index s = 0; s < probs_.rows(); ++s) {
    require(std::abs(probs_.row(s).sum() - 1.0) <= kTolerances.stochastic,
            "policy row " + std::to_string(s) + " does not sum to 1");
  }
}

Policy Policy::uniform(int num_states, int num_actions) {
  return Policy(Matrix::Constant(num_states, num_actions, 1.0 / num_actions));
}

Policy Policy::deterministic(int num_actions, const std::vector<int>& actions) {
  Matrix probs = Matrix::Zero(static_cast<Eigen::Index>(actions.size()), num_actions);
  for (std::size_t s = 0; s < actions.size(); ++s) {
    require(actions[s] >= 0 && actions[s] < num_actions, "action out of range");
    probs(static_cast<Eigen::Index>(s), actions[s]) = 1.0;
  }
  return Policy(std::move(probs));
}

OccupancyMeasure::OccupancyMeasure(Vector values, int num_states, int num_actions)
    : values_(std::move(values)), num_states_(num_states), num_actions_(num_actions) {
  require(values_.size() == static_cast<Eigen::Index>(num_states) * num_actions,
          "occupancy must have |S||A| entries");
  require(values_.allFinite(), "occupancy entries must be finite");
  require(values_.size() == 0 || values_.minCoeff() >= 0.0,
          "occupancy entries must be >= 0");
}

Vector OccupancyMeasure::state_marginal() const {
  return values_.reshaped(num_actions_, num_states_).colwise().sum().transpose();
}

Matrix flow_matrix(const CmdpModel& model) {
  Matrix a = -model.discount() * model.transition();
  for (int s = 0; s < model.num_states(); ++s)
    for (int act = 0; act < model.num_actions(); ++act) a(model.pair(s, act), s) += 1.0;
  return a;
}

namespace {

void check_policy(const CmdpModel& model, const Policy& pi) {
  require(pi.num_states() == model.num_states() &&
              pi.num_actions() == model.num_actions(),
          "policy dimensions do not match the model");
}

}  // namespace

Matrix policy_transition(const CmdpModel& model, const Policy& pi) {
  check_policy(model, pi);
  const int ns = model.num_states();
  const int na = model.num_actions();
  Matrix p = Matrix::Zero(ns, ns);
  for (int s = 0; s < ns; ++s)
    for (int a = 0; a < na; ++a)
      if (pi(s, a) > 0.0) p.row(s) += pi(s, a) * model.transition().row(model.pair(s, a));
  return p;
}

OccupancyMeasure occupancy_of_policy(const CmdpModel& model, const Policy& pi) {
  const Matrix p = policy_transition(model, pi);
  const int ns = model.num_states();
  const Matrix system = Matrix::Identity(ns, ns) - model.discount() * p.transpose();
  Eigen::PartialPivLU<Matrix> lu(system);
  const Vector d = lu.solve(model.initial_dist());
  if (!d.allFinite() || (system * d - model.initial_dist()).lpNorm<1>() > 1e-8) {
    throw std::runtime_error("cmdp-core: occupancy linear solve failed");
  }
  Vector nu(model.num_pairs());
  for (int s = 0; s < ns; ++s)
    for (int a = 0; a < model.num_actions(); ++a)
      nu(model.pair(s, a)) = std::max(0.0, d(s)) * pi(s, a);
  return OccupancyMeasure(std::move(nu), ns, model.num_actions());
}

Policy policy_of_weights(const Vector& weights, int num_states, int num_actions) {
  require(weights.size() == static_cast<Eigen::Index>(num_states) * num_actions,
          "weights must have |S||A| entries");
  require(weights.size() == 0 || weights.minCoeff() >= 0.0,
          "occupancy entries must be >= 0");
  Matrix probs(num_states, num_actions);
  for (int s = 0; s < num_states; ++s) {
    const auto row = weights.segment(static_cast<Eigen::Index>(s) * num_actions, num_actions);
    const double mass = row.sum();
    if (mass < kTolerances.zero_mass) {
      probs.row(s).setConstant(1.0 / num_actions);
    } else {
      probs.row(s) = row.transpose() / mass;
    }
  }
  return Policy(std::move(probs));
}

Policy policy_of_occupancy(const OccupancyMeasure& nu) {
  return policy_of_weights(nu.values(), nu.num_states(), nu.num_actions());
}

PolicyValue evaluate(const CmdpModel& model, const Policy& pi) {
  const OccupancyMeasure nu = occupancy_of_policy(model, pi);
  PolicyValue value;
  value.reward = model.reward().dot(nu.values());
  value.utilities = model.utilities() * nu.values();
  return value;
}

Vector flow_residual(const CmdpModel& model, const Vector& nu) {
  require(nu.size() == model.num_pairs(), "occupancy dimension mismatch");
  Vector out = -model.initial_dist();
  const double gamma = model.discount();
  for (int s = 0; s < model.num_states(); ++s) {
    for (int a = 0; a < model.num_actions(); ++a) {
      const int k = model.pair(s, a);
      out(s) += nu(k);
      out -= gamma * nu(k) * model.transition().row(k).transpose();
    }
  }
  return out;
}

Vector flow_residual(const CmdpModel& model, const OccupancyMeasure& nu) {
  require(nu.num_states() == model.num_states() &&
              nu.num_actions() == model.num_actions(),
          "occupancy dimensions do not match the model");
  return flow_residual(model, nu.values());
}

double violation(const PolicyValue& value) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < value.utilities.size(); ++i)
    total += std::max(0.0, -value.utilities(i));
  return total;
}

double violation(const CmdpModel& model, const Policy& pi) {
  return violation(evaluate(model, pi));
}

}  // namespace cmdp
