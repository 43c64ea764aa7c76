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

#include "cmdp/verify.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "cmdp/model_io.hpp"

namespace cmdp {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw PreconditionError("verify: " + what);
}

std::int64_t to_count(double v, const char* name) {
  require(v < 4e18, std::string(name) + " overflows; supply it explicitly");
  return static_cast<std::int64_t>(std::ceil(v));
}

}  // namespace

bool VerifyReport::decide() const {
  const double worst = J_u_hat.size() > 0 ? J_u_hat.minCoeff() : 0.0;
  return flow_residual() <= flow_threshold && worst >= -utility_threshold;
}

nlohmann::json to_json(const VerifyReport& report) {
  return {{"passed", report.passed},
          {"J_hat", report.J_hat},
          {"J_u_hat", vector_to_json(report.J_u_hat)},
          {"Delta_p_hat", vector_to_json(report.Delta_p_hat)},
          {"flow_residual", report.flow_residual()},
          {"flow_threshold", report.flow_threshold},
          {"utility_threshold", report.utility_threshold},
          {"N_v", report.N_v}};
}

double theoretical_verification_batch(double epsilon, double delta, double psi, double phi, double discount,
                                      int num_states, int num_constraints) {
  const double ell = 4.0 * std::log(40.0 * num_states * std::max(num_constraints, 1) / delta);
  const double eps_ver = epsilon / 10.0;
  return 64.0 * num_states * psi * ell / (phi * phi * std::pow(1.0 - discount, 4) * eps_ver * eps_ver);
}

VerifyReport verify(const Vector& x_bar, const Vector& mu_hat, const ProblemInfo& problem, TupleStream& stream,
                    std::int64_t N_v, double epsilon, double kappa, double phi,
                    const VerifyThresholds& thresholds) {
  const int S = problem.num_states();
  const int A = problem.num_actions();
  const int n = problem.num_pairs();
  const int I = problem.num_constraints();
  const double gamma = problem.discount;
  require(x_bar.size() == n && mu_hat.size() == n, "x_bar and mu_hat must have |S||A| entries");
  require(mu_hat.minCoeff() > 0.0, "mu_hat must be positive");
  require(N_v >= 1, "N_v must be positive");
  require(epsilon > 0.0 && phi > 0.0, "epsilon and phi must be positive");
  stream.require(N_v, "verification (N_v = " + std::to_string(N_v) + ")");

  std::vector<std::int64_t> pair_counts(static_cast<std::size_t>(n), 0);
  std::vector<std::int64_t> next_counts(static_cast<std::size_t>(n) * S, 0);
  for (std::int64_t t = 0; t < N_v; ++t) {
    const Transition tr = stream.next();
    const std::size_t k = static_cast<std::size_t>(tr.s) * A + tr.a;
    ++pair_counts[k];
    ++next_counts[k * S + tr.s_next];
  }

  const Vector w = x_bar.cwiseQuotient(mu_hat);
  const Matrix u_kappa = problem.emission.utilities.array() - (1.0 - gamma) * kappa;
  const double inv = 1.0 / static_cast<double>(N_v);
  VerifyReport rep;
  rep.N_v = N_v;
  rep.J_u_hat = Vector::Zero(I);
  rep.Delta_p_hat = -problem.initial_dist;
  for (int k = 0; k < n; ++k) {
    const std::size_t kk = static_cast<std::size_t>(k);
    if (pair_counts[kk] == 0) continue;
    const double freq = static_cast<double>(pair_counts[kk]) * inv;
    rep.J_hat += freq * problem.emission.reward(k) * w(k);
    rep.J_u_hat += freq * w(k) * u_kappa.col(k);
    rep.Delta_p_hat(k / A) += freq * w(k);
    for (int s = 0; s < S; ++s) {
      const std::int64_t c = next_counts[kk * S + static_cast<std::size_t>(s)];
      if (c != 0) rep.Delta_p_hat(s) -= gamma * static_cast<double>(c) * inv * w(k);
    }
  }
  rep.flow_threshold = thresholds.flow * phi * (1.0 - gamma) * epsilon;
  rep.utility_threshold = thresholds.utility * phi * epsilon;
  rep.passed = rep.decide();
  return rep;
}

nlohmann::json to_json(const AdaptiveTrace& trace) {
  nlohmann::json rounds = nlohmann::json::array();
  for (const AdaptiveRound& r : trace.rounds) {
    rounds.push_back({{"K", r.K},
                      {"psi", r.psi},
                      {"delta", r.delta},
                      {"verified", r.verification.passed},
                      {"J", r.J ? nlohmann::json(*r.J) : nlohmann::json(nullptr)},
                      {"outcome", r.outcome},
                      {"tuples", r.tuples},
                      {"config", to_json(r.config)},
                      {"verification", to_json(r.verification)}});
  }
  nlohmann::json doc{{"epsilon_prime", trace.epsilon_prime},
                     {"epsilon", trace.epsilon},
                     {"delta", trace.delta},
                     {"rounds", rounds},
                     {"exit_reason", trace.exit_reason}};
  doc["policy"] = trace.policy ? policy_to_json(*trace.policy) : nlohmann::json(nullptr);
  return doc;
}

AdaptiveTrace adaptive_dpdl(const ProblemInfo& problem, TupleStream& stream, double epsilon_prime, double delta,
                            double phi, const AdaptiveOptions& options) {
  require(options.psi_init >= 1.0, "psi_init must be >= 1");
  require(options.max_rounds >= 1, "max_rounds must be positive");
  require(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
  AdaptiveTrace trace;
  trace.epsilon_prime = epsilon_prime;
  trace.epsilon = epsilon_prime / 15.0;
  trace.delta = delta;

  std::optional<double> previous;
  double psi = options.psi_init;
  for (int K = 1; K <= options.max_rounds; ++K, psi *= 2.0) {
    AdaptiveRound round;
    round.K = K;
    round.psi = psi;
    round.delta = 6.0 * delta / (std::numbers::pi * std::numbers::pi * K * K);
    const std::int64_t before = stream.consumed();
    try {
      ScheduleOptions sched;
      sched.T = options.T;
      sched.N_e = options.N_e;
      sched.varsigma = options.varsigma;
      sched.budget = options.budget;
      sched.seed = options.seed + static_cast<std::uint64_t>(K - 1);
      round.config = default_schedule(trace.epsilon, round.delta, psi, phi, problem, sched);
      const std::int64_t N_v =
          options.N_v ? *options.N_v
                      : to_count(theoretical_verification_batch(trace.epsilon, round.delta, psi, phi,
                                                                problem.discount, problem.num_states(),
                                                                problem.num_constraints()),
                                 "theoretical N_v");
      DpdlResult res = run_dpdl(problem, stream, round.config, options.run);
      round.policy = res.policy;
      round.x_bar = res.x_bar;
      round.mu_hat = res.reference.mu_hat;
      round.checkpoints = std::move(res.checkpoints);
      round.verification = verify(res.x_bar, res.reference.mu_hat, problem, stream, N_v, trace.epsilon,
                                  round.config.kappa, phi, options.thresholds);
    } catch (const PreconditionError& e) {
      std::ostringstream msg;
      msg << "adaptive: round " << K << " (psi = " << psi << ") failed: " << e.what();
      trace.exit_reason = "error";
      throw AdaptiveError(msg.str(), std::move(trace));
    }
    round.tuples = stream.consumed() - before;

    if (round.verification.passed) round.J = round.verification.J_hat;
    if (!round.J) {
      round.outcome = "verify-failed";
    } else if (!previous) {
      round.outcome = "no-previous";
    } else if (*round.J - *previous <= options.exit_constant * trace.epsilon) {
      round.outcome = "exit";
    } else {
      round.outcome = "improvement";
    }
    previous = round.J;
    const bool done = round.outcome == "exit";
    trace.rounds.push_back(std::move(round));
    if (done) {
      trace.policy = trace.rounds.back().policy;
      trace.exit_reason = "converged";
      return trace;
    }
  }
  trace.exit_reason = "round-cap";
  std::ostringstream msg;
  msg << "adaptive: no certified policy after " << options.max_rounds
      << " rounds; the concentrability of the data is effectively unbounded";
  throw AdaptiveError(msg.str(), std::move(trace));
}

}  // namespace cmdp
