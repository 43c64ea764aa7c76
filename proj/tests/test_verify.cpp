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
#include <memory>
#include <numbers>
#include <random>
#include <string>

#include "cmdp/instances.hpp"
#include "cmdp/oracle.hpp"
#include "cmdp/verify.hpp"
#include "test_models.hpp"

using namespace cmdp;

namespace {

struct Setup {
  CmdpModel model;
  Vector mu;
  Vector mu_hat;
  Vector x_bar;
};

Setup make_setup(std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  CmdpModel model = testing::random_model(gen, 4, 2, 2, 0.8);
  const Vector mu = 0.6 * testing::random_simplex(gen, 8) + Vector::Constant(8, 0.05);
  const Vector mu_hat = mu.cwiseProduct(Vector::Constant(8, 0.7) + 0.6 * testing::random_simplex(gen, 8) * 8.0);
  const Vector x_bar = 2.0 * testing::random_simplex(gen, 8) * 5.0;
  return {std::move(model), mu, mu_hat, x_bar};
}

}  // namespace

TEST_CASE("zero iterate fails with the full initial mass as residual") {
  const Setup s = make_setup(1);
  SyncSamplerStream stream(s.model, s.mu, 3);
  const VerifyReport rep =
      verify(Vector::Zero(8), s.mu_hat, ProblemInfo::of(s.model), stream, 1000, 0.01, 0.0, 0.5);
  CHECK(rep.J_hat == 0.0);
  CHECK(rep.J_u_hat.isZero());
  CHECK(rep.Delta_p_hat == -s.model.initial_dist());
  CHECK(rep.flow_residual() == doctest::Approx(1.0));
  CHECK_FALSE(rep.passed);
  CHECK(stream.consumed() == 1000);
}

TEST_CASE("decision is re-evaluable from the stored statistics") {
  const Setup s = make_setup(2);
  SyncSamplerStream stream(s.model, s.mu, 4);
  VerifyReport rep = verify(s.x_bar, s.mu_hat, ProblemInfo::of(s.model), stream, 5000, 0.1, 0.2, 0.5);
  CHECK(rep.passed == rep.decide());
  CHECK(rep.flow_threshold == doctest::Approx(1.5 * 0.5 * 0.2 * 0.1));
  CHECK(rep.utility_threshold == doctest::Approx(3.0 * 0.5 * 0.1));
  rep.flow_threshold = rep.flow_residual() + 1e-12;
  rep.utility_threshold = -rep.J_u_hat.minCoeff() + 1e-12;
  CHECK(rep.decide());
  rep.utility_threshold = -rep.J_u_hat.minCoeff() - 1e-9;
  CHECK_FALSE(rep.decide());
  const nlohmann::json doc = to_json(rep);
  CHECK(doc.at("N_v").get<std::int64_t>() == 5000);
  CHECK(doc.at("flow_residual").get<double>() == rep.flow_residual());
}

TEST_CASE("estimator expectations match the reweighted closed forms") {
  for (std::uint64_t seed : {3u, 4u}) {
    const Setup s = make_setup(seed);
    const ProblemInfo info = ProblemInfo::of(s.model);
    const double kappa = 0.4;
    const double gamma = 0.8;
    const Vector wx = s.mu.cwiseQuotient(s.mu_hat).cwiseProduct(s.x_bar);
    const Matrix u_kappa = s.model.utilities().array() - (1.0 - gamma) * kappa;
    const Vector expected_flow = flow_residual(s.model, wx);
    Vector expected(1 + 2 + 4);
    expected << s.model.reward().dot(wx), u_kappa * wx, expected_flow;

    const int reps = 400;
    const int batch = 500;
    Vector sum = Vector::Zero(7);
    Vector sum_sq = Vector::Zero(7);
    SyncSamplerStream stream(s.model, s.mu, 10 + seed);
    for (int r = 0; r < reps; ++r) {
      const VerifyReport rep = verify(s.x_bar, s.mu_hat, info, stream, batch, 0.1, kappa, 0.5);
      Vector flat(7);
      flat << rep.J_hat, rep.J_u_hat, rep.Delta_p_hat;
      sum += flat;
      sum_sq += flat.cwiseProduct(flat);
    }
    for (int d = 0; d < 7; ++d) {
      const double mean = sum(d) / reps;
      const double se = std::sqrt(std::max(sum_sq(d) / reps - mean * mean, 0.0) / reps);
      INFO("seed " << seed << " statistic " << d);
      CHECK(std::abs(mean - expected(d)) <= 4.0 * se + 1e-12);
    }
  }
}

TEST_CASE("exact occupancy gives a residual at the sampling noise level") {
  std::mt19937_64 gen(5);
  const CmdpModel model = testing::random_model(gen, 4, 2, 1, 0.9);
  const Policy pi = testing::random_policy(gen, 4, 2);
  const Vector nu = occupancy_of_policy(model, pi).values();
  const Vector mu = 0.5 * (1.0 - 0.9) * nu + Vector::Constant(8, 0.5 / 8.0);
  SyncSamplerStream stream(model, mu, 6);
  const std::int64_t N_v = 1000000;
  const VerifyReport rep = verify(nu, mu, ProblemInfo::of(model), stream, N_v, 0.1, 0.0, 0.5);

  // Per-state standard error of the single-tuple flow statistic.
  const Vector w = nu.cwiseQuotient(mu);
  for (int sp = 0; sp < 4; ++sp) {
    double second = 0.0;
    for (int k = 0; k < 8; ++k)
      for (int n = 0; n < 4; ++n) {
        const double f = w(k) * ((k / 2 == sp ? 1.0 : 0.0) - 0.9 * (n == sp ? 1.0 : 0.0));
        second += mu(k) * model.transition()(k, n) * f * f;
      }
    const double mean = model.initial_dist()(sp);
    const double se = std::sqrt((second - mean * mean) / static_cast<double>(N_v));
    CHECK(std::abs(rep.Delta_p_hat(sp)) <= 4.0 * se);
  }
  CHECK(std::abs(rep.J_hat - evaluate(model, pi).reward) <= 0.05);
}

TEST_CASE("verification batch and data requirements") {
  const double ell = 4.0 * std::log(40.0 * 6.0 * 2.0 / 0.1);
  CHECK(theoretical_verification_batch(0.05, 0.1, 2.0, 0.2, 0.9, 6, 2) ==
        doctest::Approx(64.0 * 6.0 * 2.0 * ell / (0.04 * 1e-4 * 0.005 * 0.005)).epsilon(1e-12));

  const Setup s = make_setup(7);
  auto data = std::make_shared<const OfflineDataset>(sample_sync(s.model, s.mu, 100, 1));
  DatasetStream stream(data);
  try {
    verify(s.x_bar, s.mu_hat, ProblemInfo::of(s.model), stream, 500, 0.1, 0.0, 0.5);
    FAIL("expected exhaustion");
  } catch (const DataExhausted& e) {
    CHECK(std::string(e.what()).find("N_v = 500") != std::string::npos);
  }
}

namespace {

struct AdaptiveFixture {
  CmdpModel model;
  Vector mu;
  double C_star;
  double phi;
};

AdaptiveFixture adaptive_fixture() {
  CmdpModel model = random_cmdp(3, 2, 1, 0.8, 0.3, 8);
  const CmdpSolution sol = solve_cmdp(model);
  const Vector mu = 0.5 * (1.0 - 0.8) * sol.occupancy + Vector::Constant(6, 0.5 / 6.0);
  const GroundTruth truth = ground_truth(model, mu);
  return {std::move(model), mu, truth.concentrability, truth.slater_margin};
}

AdaptiveOptions quick_options() {
  AdaptiveOptions opt;
  opt.T = 200000;
  opt.N_e = 50000;
  opt.N_v = 200000;
  opt.seed = 3;
  return opt;
}

}  // namespace

TEST_CASE("adaptive driver exits by round two when psi_init covers C*") {
  const AdaptiveFixture f = adaptive_fixture();
  REQUIRE(f.phi > 0.05);
  AdaptiveOptions opt = quick_options();
  opt.psi_init = std::ceil(f.C_star);
  // The literal flow test is far below the sampling noise of N_v = 2e5.
  opt.thresholds.flow = 400.0;
  SyncSamplerStream stream(f.model, f.mu, 9);
  const AdaptiveTrace trace = adaptive_dpdl(ProblemInfo::of(f.model), stream, 0.3, 0.1, f.phi, opt);
  CHECK(trace.exit_reason == "converged");
  CHECK(trace.rounds.size() == 2);
  CHECK(trace.rounds[0].outcome == "no-previous");
  CHECK(trace.rounds[1].outcome == "exit");
  REQUIRE(trace.policy.has_value());
  CHECK(violation(f.model, *trace.policy) == 0.0);
  CHECK(trace.epsilon == doctest::Approx(0.02));
  for (const AdaptiveRound& r : trace.rounds) {
    CHECK(r.psi == opt.psi_init * std::pow(2.0, r.K - 1));
    CHECK(r.delta == doctest::Approx(6.0 * 0.1 / (std::numbers::pi * std::numbers::pi * r.K * r.K)));
    CHECK(r.tuples == 50000 + 200000 + 200000);
    CHECK(r.config.epsilon == trace.epsilon);
  }
  CHECK(stream.consumed() == 2 * 450000);
}

TEST_CASE("failed verifications double psi until the round cap") {
  const AdaptiveFixture f = adaptive_fixture();
  AdaptiveOptions opt = quick_options();
  opt.T = 20000;
  opt.max_rounds = 4;
  opt.thresholds.flow = 0.0;
  SyncSamplerStream stream(f.model, f.mu, 10);
  try {
    adaptive_dpdl(ProblemInfo::of(f.model), stream, 0.3, 0.1, f.phi, opt);
    FAIL("expected the round cap");
  } catch (const AdaptiveError& e) {
    const AdaptiveTrace& trace = e.trace();
    CHECK(trace.exit_reason == "round-cap");
    CHECK(trace.rounds.size() == 4);
    CHECK_FALSE(trace.policy.has_value());
    for (std::size_t k = 0; k < trace.rounds.size(); ++k) {
      CHECK(trace.rounds[k].outcome == "verify-failed");
      CHECK_FALSE(trace.rounds[k].J.has_value());
      if (k > 0) CHECK(trace.rounds[k].psi == 2.0 * trace.rounds[k - 1].psi);
    }
    const nlohmann::json doc = to_json(trace);
    CHECK(doc.at("rounds")[0].at("J").is_null());
    CHECK(doc.at("policy").is_null());
  }
}

TEST_CASE("a verified round after a failed one cannot exit") {
  const AdaptiveFixture f = adaptive_fixture();
  AdaptiveOptions opt = quick_options();
  opt.T = 20000;
  opt.max_rounds = 3;
  opt.exit_constant = -1e9;
  opt.thresholds.flow = 1e9;
  opt.thresholds.utility = 1e9;
  SyncSamplerStream stream(f.model, f.mu, 11);
  try {
    adaptive_dpdl(ProblemInfo::of(f.model), stream, 0.3, 0.1, f.phi, opt);
    FAIL("expected the round cap");
  } catch (const AdaptiveError& e) {
    CHECK(e.trace().rounds[0].outcome == "no-previous");
    CHECK(e.trace().rounds[1].outcome == "improvement");
    CHECK(e.trace().rounds[2].outcome == "improvement");
  }
}

TEST_CASE("exhausted data surfaces the partial trace") {
  const AdaptiveFixture f = adaptive_fixture();
  AdaptiveOptions opt = quick_options();
  opt.T = 20000;
  opt.N_e = 1000;
  opt.N_v = 1000;
  opt.thresholds.flow = 0.0;
  auto data = std::make_shared<const OfflineDataset>(sample_sync(f.model, f.mu, 2 * 22000 + 500, 2));
  DatasetStream stream(data);
  try {
    adaptive_dpdl(ProblemInfo::of(f.model), stream, 0.3, 0.1, f.phi, opt);
    FAIL("expected exhaustion");
  } catch (const AdaptiveError& e) {
    CHECK(e.trace().rounds.size() == 2);
    CHECK(e.trace().exit_reason == "error");
    CHECK(std::string(e.what()).find("round 3") != std::string::npos);
  }
  CHECK_THROWS_AS(adaptive_dpdl(ProblemInfo::of(f.model), stream, 0.3, 0.1, f.phi,
                                AdaptiveOptions{.psi_init = 0.5}),
                  PreconditionError);
}
