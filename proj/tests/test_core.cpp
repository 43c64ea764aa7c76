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

#include <cmath>
#include <random>
#include <stdexcept>

#include "cmdp/model.hpp"
#include "cmdp/model_io.hpp"
#include "test_models.hpp"

using namespace cmdp;

TEST_CASE("single self-looping state has unit occupancy per action") {
  Matrix p = Matrix::Ones(2, 1);
  CmdpModel model(1, 2, 0.5, p, Vector::Zero(2), Matrix(0, 2), Vector::Ones(1));
  const OccupancyMeasure nu = occupancy_of_policy(model, Policy::uniform(1, 2));
  CHECK(nu(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(nu(0, 1) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("hard block entry state occupancy matches closed form") {
  // s0 -> s0 w.p. 1/(2-gamma), else s1; s1 -> s+/s- evenly; s+/- -> self w.p. 2-1/gamma, else s0.
  const double gamma = 0.5;
  const double p_stay = 1.0 / (2.0 - gamma);
  const double q = 2.0 - 1.0 / gamma;
  Matrix p = Matrix::Zero(4, 4);
  p(0, 0) = p_stay;
  p(0, 1) = 1.0 - p_stay;
  p(1, 2) = 0.5;
  p(1, 3) = 0.5;
  p(2, 2) = q;
  p(2, 0) = 1.0 - q;
  p(3, 3) = q;
  p(3, 0) = 1.0 - q;
  Vector rho = Vector::Zero(4);
  rho(0) = 1.0;
  CmdpModel model(4, 1, gamma, p, Vector::Zero(4), Matrix(0, 4), rho);
  const OccupancyMeasure nu = occupancy_of_policy(model, Policy::uniform(4, 1));
  // v0 = 2/(2+gamma) = 0.8; occupancy of s0 is v0/(1-gamma).
  CHECK(nu(0, 0) == doctest::Approx(0.8 / (1.0 - gamma)).epsilon(1e-12));
  // v1 = 2 gamma/((2+gamma)(2-gamma)); occupancy of s1 is v1.
  CHECK(nu(1, 0) == doctest::Approx(2.0 * gamma / ((2.0 + gamma) * (2.0 - gamma))).epsilon(1e-12));
}

TEST_CASE("total mass and flow conservation on random models") {
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 20; ++trial) {
    const CmdpModel model = testing::random_model(gen, 5, 3, 2, 0.9);
    const Policy pi = testing::random_policy(gen, 5, 3);
    const OccupancyMeasure nu = occupancy_of_policy(model, pi);
    CHECK(std::abs(nu.values().sum() - 1.0 / (1.0 - model.discount())) <= kTolerances.mass);
    CHECK(flow_residual(model, nu).lpNorm<1>() <= kTolerances.flow);
    const Vector d = nu.state_marginal();
    for (int s = 0; s < 5; ++s)
      for (int a = 0; a < 3; ++a) CHECK(nu(s, a) == doctest::Approx(pi(s, a) * d(s)).epsilon(1e-12));
  }
}

TEST_CASE("flow matrix rows sum to 1 - gamma") {
  std::mt19937_64 gen(11);
  const CmdpModel model = testing::random_model(gen, 4, 3, 1, 0.8);
  const Matrix a = flow_matrix(model);
  for (Eigen::Index k = 0; k < a.rows(); ++k) CHECK(std::abs(a.row(k).sum() - 0.2) <= 1e-12);
  // A^T nu - rho0 agrees with the matrix form.
  const OccupancyMeasure nu = occupancy_of_policy(model, Policy::uniform(4, 3));
  const Vector direct = a.transpose() * nu.values() - model.initial_dist();
  CHECK((direct - flow_residual(model, nu)).lpNorm<1>() <= 1e-12);
}

TEST_CASE("flow residual edge cases") {
  std::mt19937_64 gen(3);
  const CmdpModel model = testing::random_model(gen, 3, 2, 1, 0.7);
  const Vector zero = Vector::Zero(6);
  CHECK((flow_residual(model, zero) + model.initial_dist()).lpNorm<1>() <= 1e-15);
  const OccupancyMeasure nu = occupancy_of_policy(model, Policy::uniform(3, 2));
  const Vector doubled = 2.0 * nu.values();
  CHECK((flow_residual(model, doubled) - model.initial_dist()).lpNorm<1>() <= 1e-9);
  CHECK_THROWS_AS(flow_residual(model, Vector::Zero(5)), std::invalid_argument);
}

TEST_CASE("policy extraction") {
  Vector w(4);
  w << 2.0, 2.0, 0.0, 0.0;
  const Policy pi = policy_of_weights(w, 2, 2);
  CHECK(pi(0, 0) == 0.5);
  CHECK(pi(0, 1) == 0.5);
  CHECK(pi(1, 0) == 0.5);
  CHECK(pi(1, 1) == 0.5);
  w(1) = -1.0;
  CHECK_THROWS_AS(policy_of_weights(w, 2, 2), std::invalid_argument);
}

TEST_CASE("occupancy round trip reproduces the policy") {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 10; ++trial) {
    const CmdpModel model = testing::random_model(gen, 6, 3, 1, 0.95);
    const Policy pi = testing::random_policy(gen, 6, 3);
    const OccupancyMeasure nu = occupancy_of_policy(model, pi);
    const Policy back = policy_of_occupancy(nu);
    const Vector d = nu.state_marginal();
    for (int s = 0; s < 6; ++s) {
      if (d(s) <= 0.0) continue;
      for (int a = 0; a < 3; ++a) CHECK(std::abs(back(s, a) - pi(s, a)) <= 1e-8);
    }
  }
}

TEST_CASE("evaluate on constant rewards") {
  std::mt19937_64 gen(13);
  const CmdpModel base = testing::random_model(gen, 4, 2, 1, 0.9);
  CmdpModel ones(4, 2, 0.9, base.transition(), Vector::Ones(8), base.utilities(),
                 base.initial_dist());
  CmdpModel zeros(4, 2, 0.9, base.transition(), Vector::Zero(8), base.utilities(),
                  base.initial_dist());
  const Policy pi = testing::random_policy(gen, 4, 2);
  CHECK(evaluate(ones, pi).reward == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(std::abs(evaluate(zeros, pi).reward) <= 1e-15);
}

TEST_CASE("evaluate is linear in the occupancy") {
  std::mt19937_64 gen(17);
  const CmdpModel model = testing::random_model(gen, 5, 2, 3, 0.85);
  const Policy pi = testing::random_policy(gen, 5, 2);
  const PolicyValue v = evaluate(model, pi);
  const OccupancyMeasure nu = occupancy_of_policy(model, pi);
  double r = 0.0;
  for (int s = 0; s < 5; ++s)
    for (int a = 0; a < 2; ++a) r += nu(s, a) * model.reward(s, a);
  CHECK(std::abs(v.reward - r) <= 1e-10);
  for (int i = 0; i < 3; ++i) {
    double u = 0.0;
    for (int s = 0; s < 5; ++s)
      for (int a = 0; a < 2; ++a) u += nu(s, a) * model.utility(i, s, a);
    CHECK(std::abs(v.utilities(i) - u) <= 1e-10);
  }
}

TEST_CASE("evaluate matches Monte-Carlo rollouts on a two-state chain") {
  // Geometric termination with survival gamma gives an unbiased estimate of J.
  Matrix p(4, 2);
  p << 0.7, 0.3,
       0.2, 0.8,
       0.4, 0.6,
       0.9, 0.1;
  Vector r(4);
  r << 1.0, -0.5, 0.25, 0.6;
  Vector rho(2);
  rho << 0.6, 0.4;
  const double gamma = 0.9;
  CmdpModel model(2, 2, gamma, p, r, Matrix(0, 4), rho);
  const Policy pi = Policy::deterministic(2, {1, 0});
  const double exact = evaluate(model, pi).reward;

  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int rollouts = 1000000;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int k = 0; k < rollouts; ++k) {
    int s = unif(gen) < rho(0) ? 0 : 1;
    double ret = 0.0;
    while (true) {
      const int a = s == 0 ? 1 : 0;
      ret += model.reward(s, a);
      if (unif(gen) >= gamma) break;
      s = unif(gen) < model.transition(s, a, 0) ? 0 : 1;
    }
    sum += ret;
    sum_sq += ret * ret;
  }
  const double mean = sum / rollouts;
  const double se = std::sqrt((sum_sq / rollouts - mean * mean) / rollouts);
  CHECK(std::abs(mean - exact) <= 3.0 * se);
}

TEST_CASE("violation sums negative parts") {
  PolicyValue v;
  v.utilities = Vector(3);
  v.utilities << 0.5, -0.3, -0.2;
  CHECK(violation(v) == doctest::Approx(0.5));
  v.utilities << 0.5, 0.0, 1.0;
  CHECK(violation(v) == 0.0);
  v.utilities = Vector(1);
  v.utilities << -0.3;
  CHECK(violation(v) == doctest::Approx(0.3));

  std::mt19937_64 gen(19);
  const CmdpModel model = testing::random_model(gen, 4, 3, 3, 0.9);
  const Policy pi = testing::random_policy(gen, 4, 3);
  const PolicyValue pv = evaluate(model, pi);
  double expected = 0.0;
  for (int i = 0; i < 3; ++i) expected += pv.utilities(i) < 0.0 ? -pv.utilities(i) : 0.0;
  CHECK(violation(model, pi) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("model validation rejects malformed inputs") {
  Matrix p = Matrix::Ones(2, 1);
  CHECK_THROWS_AS(CmdpModel(1, 2, 1.0, p, Vector::Zero(2), Matrix(0, 2), Vector::Ones(1)),
                  std::invalid_argument);
  Matrix bad = p;
  bad(0, 0) = 0.9;
  CHECK_THROWS_AS(CmdpModel(1, 2, 0.5, bad, Vector::Zero(2), Matrix(0, 2), Vector::Ones(1)),
                  std::invalid_argument);
  CHECK_THROWS_AS(CmdpModel(1, 2, 0.5, p, Vector::Constant(2, 1.5), Matrix(0, 2), Vector::Ones(1)),
                  std::invalid_argument);
  CHECK_THROWS_AS(CmdpModel(1, 2, 0.5, p, Vector::Zero(3), Matrix(0, 2), Vector::Ones(1)),
                  std::invalid_argument);
  CHECK_THROWS_AS(CmdpModel(1, 2, 0.5, p, Vector::Zero(2), Matrix(0, 2), Vector::Constant(1, 0.5)),
                  std::invalid_argument);
  CmdpModel ok(1, 2, 0.5, p, Vector::Zero(2), Matrix(0, 2), Vector::Ones(1));
  CHECK_THROWS_AS(occupancy_of_policy(ok, Policy::uniform(2, 2)), std::invalid_argument);
}

TEST_CASE("JSON round trip preserves the model") {
  std::mt19937_64 gen(23);
  const CmdpModel model = testing::random_model(gen, 3, 2, 2, 0.75);
  const CmdpModel back = model_from_json(nlohmann::json::parse(model_to_json(model).dump()));
  CHECK(back.num_states() == 3);
  CHECK(back.num_actions() == 2);
  CHECK(back.num_constraints() == 2);
  CHECK(back.discount() == 0.75);
  CHECK((back.transition() - model.transition()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.utilities() - model.utilities()).cwiseAbs().maxCoeff() == 0.0);
  nlohmann::json doc = model_to_json(model);
  doc["transition"][0][0][0] = 5.0;
  CHECK_THROWS_AS(model_from_json(doc), std::invalid_argument);
  doc.erase("gamma");
  CHECK_THROWS_AS(model_from_json(doc), std::invalid_argument);
}
