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
#include <vector>

#include <json.hpp>

#include "cmdp/model.hpp"

namespace cmdp {

/**
 * Parameters of the block-structured hard family. Blocks 0..S_c-1 are
 * constrained (actions a_1, b_1, ..., a_K, b_K, e at the entry state s_1),
 * blocks S_c..S_c+S_u-1 are unconstrained (actions a, e).
 */
struct HardInstanceParams {
  int S = 4;
  int A = 3;
  int I = 8;
  double C = 2.0;
  double gamma = 0.5;
  /// Signs indexed j * K + i for constrained block j and pair i.
  std::vector<int> theta_c;
  /// Signs of the unconstrained blocks.
  std::vector<int> theta_u;
  double varpi_c = 0.5;
  double varpi_u = 0.5;

  int K() const;
  int S_c() const;
  int S_u() const;
  /// Throws std::invalid_argument unless S >= 4, A >= 3, I >= 8, C >= 2,
  /// gamma in [1/2, 1), varpi in (0, 1/2] and the sign vectors fit.
  void validate() const;
};

/// Block constants v0, v1, v (as functions of gamma).
struct BlockConstants {
  double p;
  double q;
  double v0;
  double v1;
  double v;

  explicit BlockConstants(double gamma);
};

struct HardInstance {
  CmdpModel model;
  Vector mu;
  Policy optimal_policy;
  double optimal_value;
};

/// Random signs with the given sizes; varpi defaults to 1/2.
HardInstanceParams random_hard_params(int S, int A, int I, double C, double gamma, std::uint64_t seed,
                                      double varpi = 0.5);

/// State index of s_0 in block j; s_1, s_+, s_- follow it. The null state is last.
inline int block_state(int block, int offset) { return 4 * block + offset; }

HardInstance build_hard_cmdp(const HardInstanceParams& params);

/**
 * Single-constraint family without a strictly feasible policy. States are
 * s_-1, s_0, s_+, s_-, s^1..s^S (in this order); two actions a, b. theta has
 * entries in {0, 1}; the unique safe policy plays b at s^j iff theta_j = 1.
 */
HardInstance build_slater_instance(int S, int A, double C, double gamma, const std::vector<int>& theta,
                                   double varpi);

/// Closed form J^u(pi) = -(v varpi / (S (1 - gamma))) ||pi_b - theta||_1.
double slater_instance_utility(const Policy& pi, double gamma, const std::vector<int>& theta, double varpi);

/**
 * Dirichlet transitions, rewards in [0, 1], utilities in [-1, 1], uniform
 * rho0; the utilities are then shifted by a common constant so that the
 * Slater margin sits at slater_target, up to round-off from above. Draws
 * whose shifted utilities leave [-1, 1] are rejected (at most 100 draws).
 */
CmdpModel random_cmdp(int S, int A, int I, double gamma, double slater_target, std::uint64_t seed);

/// Sidecar document: mu, optimal policy and value.
nlohmann::json sidecar_json(const HardInstance& instance);

}  // namespace cmdp
