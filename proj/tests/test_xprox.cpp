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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <random>

#include "cmdp/xprox.hpp"
#include "prox_oracle.hpp"

using namespace cmdp;

TEST_CASE("zero gradient with slack caps is the identity") {
  ProxProblem p;
  p.y0 = Vector::Constant(4, 0.25);
  p.caps = Vector::Ones(4);
  p.weights = Vector::Constant(4, 2.0);
  p.mass_cap = 2.0;
  p.weighted_cap = 4.0;
  p.hit = 1;
  p.gradient = 0.0;
  const ProxSolution s = solve_prox(p);
  CHECK(s.kkt_case == KktCase::BothSlack);
  CHECK((s.y - p.y0).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("separable step only moves the hit coordinate up to its cap") {
  ProxProblem p;
  p.y0 = Vector::Constant(3, 0.1);
  p.caps = Vector::Constant(3, 0.5);
  p.weights = Vector::Ones(3);
  p.mass_cap = 10.0;
  p.weighted_cap = 10.0;
  p.hit = 2;
  p.gradient = -1.0;
  ProxSolution s = solve_prox(p);
  CHECK(s.y(2) == doctest::Approx(0.1 * std::exp(1.0)).epsilon(1e-14));
  CHECK(s.y(0) == 0.1);
  CHECK(s.y(1) == 0.1);
  p.gradient = -3.0;
  s = solve_prox(p);
  CHECK(s.y(2) == 0.5);
  CHECK(s.hit_capped);
  CHECK(s.kkt_case == KktCase::BothSlack);
}

TEST_CASE("mass cap rescales the other coordinates") {
  ProxProblem p;
  p.y0 = Vector::Constant(3, 1.0);
  p.caps = Vector::Constant(3, 10.0);
  p.weights = Vector::Ones(3);
  p.mass_cap = 3.0;
  p.weighted_cap = 100.0;
  p.hit = 0;
  p.gradient = -std::log(2.0);
  // Closed form: y = (2, 1, 1) e^{-alpha}, sum 3 -> e^{-alpha} = 3/4.
  const ProxSolution s = solve_prox(p);
  CHECK(s.kkt_case == KktCase::MassActive);
  CHECK(s.y(0) == doctest::Approx(1.5).epsilon(1e-13));
  CHECK(s.y(1) == doctest::Approx(0.75).epsilon(1e-13));
  CHECK(s.alpha == doctest::Approx(std::log(4.0 / 3.0)).epsilon(1e-13));
}

TEST_CASE("case analysis matches the dual bisection oracle") {
  std::mt19937_64 gen(2718);
  std::array<int, 5> seen{};
  double worst_error = 0.0;
  double worst_residual = 0.0;
  for (int trial = 0; trial < 400; ++trial) {
    const ProxProblem p = testing::random_prox_problem(gen, trial % 4);
    const ProxSolution s = solve_prox(p);
    const testing::DualSolution ref = testing::prox_by_dual_bisection(p);
    worst_error = std::max(worst_error, (s.y - ref.y).cwiseAbs().maxCoeff());
    worst_residual = std::max(worst_residual, s.residual);
    ++seen[static_cast<int>(s.kkt_case)];

    int valid = 0;
    for (const ProxSolution& c : prox_candidates(p)) valid += c.residual <= kTolerances.kkt;
    CHECK(valid >= 1);
  }
  CHECK(worst_error <= 1e-6);
  CHECK(worst_residual <= kTolerances.kkt);
  for (int c = 1; c <= 4; ++c) {
    INFO("case " << c);
    CHECK(seen[c] > 0);
  }
}

TEST_CASE("stateful prox keeps cached sums and feasibility over many steps") {
  std::mt19937_64 gen(11);
  std::uniform_int_distribution<int> pick(0, 9);
  std::normal_distribution<double> normal(0.0, 1.5);
  Vector mu = Vector::Constant(10, 0.1);
  const Vector caps = 3.0 * mu;
  const Vector weights = mu.cwiseInverse();
  CappedKlProx prox(0.5 * mu, caps, weights, 1.2, 25.0);
  for (int t = 0; t < 20000; ++t) {
    prox.step(pick(gen), normal(gen));
    CHECK(prox.last_residual() <= kTolerances.kkt);
  }
  const Vector& y = prox.point();
  CHECK(std::abs(prox.mass() - y.sum()) <= 1e-10);
  CHECK(std::abs(prox.weighted_mass() - weights.dot(y)) <= 1e-8);
  CHECK(y.minCoeff() > 0.0);
  CHECK((y.array() <= caps.array() * (1.0 + 1e-12)).all());
  CHECK(y.sum() <= 1.2 * (1.0 + 1e-9));
  CHECK(weights.dot(y) <= 25.0 * (1.0 + 1e-9));
}

TEST_CASE("infeasible starting points are rejected") {
  ProxProblem p;
  p.y0 = Vector::Constant(2, 1.0);
  p.caps = Vector::Constant(2, 2.0);
  p.weights = Vector::Ones(2);
  p.mass_cap = 1.0;
  p.weighted_cap = 10.0;
  CHECK_THROWS_AS(solve_prox(p), std::invalid_argument);
}
