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

#include "cmdp/markov.hpp"

#include <cstdlib>
#include <numeric>
#include <queue>
#include <string>

#include "cmdp/errors.hpp"

namespace cmdp {

namespace {

std::vector<int> bfs_levels(const Matrix& chain, bool reverse) {
  const auto n = static_cast<int>(chain.rows());
  std::vector<int> level(n, -1);
  std::queue<int> frontier;
  level[0] = 0;
  frontier.push(0);
  while (!frontier.empty()) {
    const int u = frontier.front();
    frontier.pop();
    for (int v = 0; v < n; ++v) {
      const double w = reverse ? chain(v, u) : chain(u, v);
      if (w > 0.0 && level[v] < 0) {
        level[v] = level[u] + 1;
        frontier.push(v);
      }
    }
  }
  return level;
}

void check_square(const Matrix& chain) {
  if (chain.rows() != chain.cols() || chain.rows() == 0)
    throw std::invalid_argument("dataset: chain must be a nonempty square matrix");
}

}  // namespace

bool is_irreducible(const Matrix& chain) {
  check_square(chain);
  for (int v : bfs_levels(chain, false))
    if (v < 0) return false;
  for (int v : bfs_levels(chain, true))
    if (v < 0) return false;
  return true;
}

int chain_period(const Matrix& chain) {
  check_square(chain);
  const std::vector<int> level = bfs_levels(chain, false);
  const auto n = static_cast<int>(chain.rows());
  int g = 0;
  for (int u = 0; u < n; ++u) {
    if (level[u] < 0) continue;
    for (int v = 0; v < n; ++v) {
      if (chain(u, v) > 0.0 && level[v] >= 0) g = std::gcd(g, std::abs(level[u] + 1 - level[v]));
    }
  }
  return g == 0 ? 1 : g;
}

Vector stationary_state_distribution(const Matrix& chain) {
  check_square(chain);
  if (!is_irreducible(chain))
    throw PreconditionError("dataset: chain is reducible; stationary distribution is not unique");
  const auto n = chain.rows();
  Matrix system = chain.transpose() - Matrix::Identity(n, n);
  system.row(n - 1).setOnes();
  Vector rhs = Vector::Zero(n);
  rhs(n - 1) = 1.0;
  Eigen::PartialPivLU<Matrix> lu(system);
  Vector mu = lu.solve(rhs);
  mu += lu.solve(rhs - system * mu);
  mu = mu.cwiseMax(0.0);
  return mu / mu.sum();
}

Vector stationary_distribution(const CmdpModel& model, const Policy& pi) {
  const Vector states = stationary_state_distribution(policy_transition(model, pi));
  Vector mu(model.num_pairs());
  for (int s = 0; s < model.num_states(); ++s)
    for (int a = 0; a < model.num_actions(); ++a) mu(model.pair(s, a)) = states(s) * pi(s, a);
  return mu;
}

double stationary_residual(const Matrix& chain, const Vector& mu) {
  return (chain.transpose() * mu - mu).lpNorm<1>();
}

MixingProfile mixing_time(const Matrix& chain, int cap) {
  check_square(chain);
  const Vector mu = stationary_state_distribution(chain);
  const int period = chain_period(chain);
  if (period != 1)
    throw PreconditionError("dataset: chain is periodic with period " + std::to_string(period));

  MixingProfile out;
  Matrix power = chain;
  const Eigen::RowVectorXd target = mu.transpose();
  for (int t = 1;; ++t) {
    double worst = 0.0;
    for (Eigen::Index s = 0; s < power.rows(); ++s)
      worst = std::max(worst, 0.5 * (power.row(s) - target).lpNorm<1>());
    out.curve.push_back(worst);
    if (out.t_mix == 0 && worst <= 0.25) out.t_mix = t;
    if (out.t_mix > 0 && t >= 4 * out.t_mix) break;
    if (out.t_mix == 0 && t >= cap)
      throw PreconditionError("dataset: mixing time exceeds " + std::to_string(cap) +
                              " steps (near-periodic chain)");
    power = power * chain;
  }
  return out;
}

MixingProfile mixing_time(const CmdpModel& model, const Policy& pi, int cap) {
  return mixing_time(policy_transition(model, pi), cap);
}

}  // namespace cmdp
