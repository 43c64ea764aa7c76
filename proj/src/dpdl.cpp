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

#include "cmdp/dpdl.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "cmdp/errors.hpp"
#include "cmdp/oracle.hpp"
#include "cmdp/rng.hpp"
#include "cmdp/xprox.hpp"

namespace cmdp {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw PreconditionError("dpdl: " + what);
}

// Compensated running sum of vectors.
class KahanVector {
 public:
  explicit KahanVector(Eigen::Index n) : sum_(Vector::Zero(n)), comp_(Vector::Zero(n)) {}

  void add(const Vector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const double y = v(i) - comp_(i);
      const double t = sum_(i) + y;
      comp_(i) = (t - sum_(i)) - y;
      sum_(i) = t;
    }
  }

  Vector mean(std::int64_t count) const { return sum_ / static_cast<double>(count); }

 private:
  Vector sum_;
  Vector comp_;
};

double log_floor2(int n) { return std::log(std::max(n, 2)); }

double log_psi(double psi) { return std::log(std::max(psi, std::exp(1.0))); }

}  // namespace

int ProblemInfo::sparsity() const { return std::min(num_pairs(), num_states() + num_constraints()); }

ProblemInfo ProblemInfo::of(const CmdpModel& model) {
  return ProblemInfo{Emission::of(model), model.discount(), model.initial_dist()};
}

double DpdlConfig::eta_cap(double discount) const {
  const double m_lambda = 2.0 * psi / (1.0 - discount);
  const double m_x = 64.0 / (phi * (1.0 - discount) * varsigma);
  return 0.5 * std::min(alpha_lambda / m_lambda, alpha_x / m_x);
}

void DpdlConfig::validate(double discount) const {
  require(discount > 0.0 && discount < 1.0, "discount must lie in (0, 1)");
  require(T >= 0, "T must be >= 0");
  require(epsilon > 0.0, "epsilon must be positive");
  require(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
  require(psi >= 1.0, "psi must be >= 1");
  require(phi > 0.0, "Slater margin phi must be positive");
  require(kappa >= 0.0, "kappa must be >= 0");
  require(alpha_V > 0.0 && alpha_lambda > 0.0 && alpha_x > 0.0, "normalizing constants must be positive");
  require(N_e >= 1, "N_e must be >= 1");
  require(varsigma > 0.0 && varsigma <= 1.0, "varsigma must lie in (0, 1]");
  if (T == 0) return;
  require(eta > 0.0, "eta must be positive");
  const double cap = eta_cap(discount);
  if (eta > cap * (1.0 + 1e-12)) {
    std::ostringstream msg;
    msg.precision(6);
    msg << "step size eta = " << eta << " exceeds the bound min(alpha_lambda/M_lambda, alpha_x/M_x)/2 = "
        << cap << " (raise T or varsigma)";
    throw PreconditionError("dpdl: " + msg.str());
  }
}

nlohmann::json to_json(const DpdlConfig& c) {
  return {{"T", c.T},
          {"epsilon", c.epsilon},
          {"delta", c.delta},
          {"psi", c.psi},
          {"phi", c.phi},
          {"kappa", c.kappa},
          {"eta", c.eta},
          {"alpha_V", c.alpha_V},
          {"alpha_lambda", c.alpha_lambda},
          {"alpha_x", c.alpha_x},
          {"N_e", c.N_e},
          {"varsigma", c.varsigma},
          {"seed", c.seed}};
}

DpdlConfig dpdl_config_from_json(const nlohmann::json& doc) {
  try {
    DpdlConfig c;
    c.T = doc.at("T").get<std::int64_t>();
    c.epsilon = doc.at("epsilon").get<double>();
    c.delta = doc.at("delta").get<double>();
    c.psi = doc.at("psi").get<double>();
    c.phi = doc.at("phi").get<double>();
    c.kappa = doc.at("kappa").get<double>();
    c.eta = doc.at("eta").get<double>();
    c.alpha_V = doc.at("alpha_V").get<double>();
    c.alpha_lambda = doc.at("alpha_lambda").get<double>();
    c.alpha_x = doc.at("alpha_x").get<double>();
    c.N_e = doc.at("N_e").get<std::int64_t>();
    c.varsigma = doc.at("varsigma").get<double>();
    c.seed = doc.at("seed").get<std::uint64_t>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("dpdl: malformed solver config: ") + e.what());
  }
}

double theoretical_varsigma(double epsilon, double psi, double phi, double discount, int sparsity) {
  const double eps_e = epsilon / 100.0;
  return phi * (1.0 - discount) * (1.0 - discount) * eps_e / (2.0 * sparsity * psi);
}

double theoretical_estimation_batch(double epsilon, double delta, double psi, double phi,
                                    double discount, int sparsity, int num_pairs) {
  const double eps_e = epsilon / 100.0;
  return 512.0 * sparsity * psi / (phi * phi * std::pow(1.0 - discount, 4) * eps_e * eps_e) *
         std::log(6.0 * num_pairs / delta);
}

DpdlConfig default_schedule(double epsilon, double delta, double psi, double phi,
                            const ProblemInfo& problem, const ScheduleOptions& options) {
  const double gamma = problem.discount;
  require(gamma > 0.0 && gamma < 1.0, "discount must lie in (0, 1)");
  const double eps_max = 1.0 / (10.0 * (1.0 - gamma));
  if (!(epsilon > 0.0 && epsilon <= eps_max)) {
    std::ostringstream msg;
    msg << "epsilon must lie in (0, 1/(10(1-gamma))] = (0, " << eps_max << "], got " << epsilon;
    throw PreconditionError("dpdl: " + msg.str());
  }
  require(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
  require(psi >= 1.0, "psi must be >= 1");
  require(phi > 0.0, "Slater margin phi must be positive");
  require(options.budget > 0.0, "budget multiplier must be positive");

  const int S = problem.num_states();
  const int SA = problem.num_pairs();
  const int I = problem.num_constraints();
  const int N = problem.sparsity();
  const double h = 1.0 - gamma;

  DpdlConfig c;
  c.epsilon = epsilon;
  c.delta = delta;
  c.psi = psi;
  c.phi = phi;
  c.seed = options.seed;
  c.kappa = 5.0 * phi * epsilon;
  c.alpha_lambda = std::sqrt(psi / log_floor2(I)) / h;
  c.alpha_V = phi * std::sqrt(psi / S);
  c.alpha_x = std::sqrt(N * psi / log_psi(psi)) / (phi * h);

  if (options.T) {
    require(*options.T >= 0, "T must be >= 0");
    c.T = *options.T;
  } else {
    const double iota = std::log(psi * SA * std::max(I, 1) / delta);
    const double heuristic = options.budget * N * psi * iota / (phi * phi * std::pow(h, 4) * epsilon * epsilon);
    // The lambda part of the step bound does not depend on varsigma.
    const double m_lambda = 2.0 * psi / h;
    const double lambda_floor = std::pow(2.0 * m_lambda / c.alpha_lambda, 2);
    const double t = std::ceil(std::max(heuristic, lambda_floor));
    require(t < 4e18, "default T overflows; supply T explicitly");
    c.T = static_cast<std::int64_t>(t);
  }
  c.eta = c.T > 0 ? 1.0 / std::sqrt(static_cast<double>(c.T)) : 0.0;

  if (options.varsigma) {
    c.varsigma = *options.varsigma;
  } else {
    // Smallest floor with eta <= alpha_x phi (1-gamma) varsigma / 128.
    const double compatible = 128.0 * c.eta / (c.alpha_x * phi * h) * (1.0 + 1e-12);
    c.varsigma = std::max(theoretical_varsigma(epsilon, psi, phi, gamma, N), compatible);
  }

  if (options.N_e) {
    c.N_e = *options.N_e;
  } else {
    const double batch = std::ceil(theoretical_estimation_batch(epsilon, delta, psi, phi, gamma, N, SA));
    require(batch < 4e18, "theoretical N_e overflows; supply N_e explicitly");
    c.N_e = static_cast<std::int64_t>(batch);
  }
  c.validate(gamma);
  return c;
}

ReferenceEstimate estimate_reference(TupleStream& stream, std::int64_t N_e, double varsigma) {
  require(N_e >= 1, "N_e must be >= 1");
  require(varsigma > 0.0, "varsigma must be positive");
  stream.require(N_e, "reference estimation (N_e = " + std::to_string(N_e) + ")");
  const Emission& em = stream.emission();
  ReferenceEstimate out;
  out.counts = Vector::Zero(em.num_pairs());
  for (std::int64_t t = 0; t < N_e; ++t) {
    const Transition tr = stream.next();
    out.counts(tr.s * em.num_actions + tr.a) += 1.0;
  }
  out.mu_hat = (out.counts / static_cast<double>(N_e)).cwiseMax(varsigma);
  out.varsigma = varsigma;
  out.N_e = N_e;
  return out;
}

GradientEstimate estimate_gradients(const Iterate& z, const SampleTuple& sample, const Vector& mu_hat,
                                    double discount, double kappa, int num_actions) {
  const int k = sample.s * num_actions + sample.a;
  const double w = z.x(k) / mu_hat(k);
  const Vector u_kappa = sample.u.array() - (1.0 - discount) * kappa;
  GradientEstimate g;
  g.pair = k;
  g.g_V = Vector::Zero(z.V.size());
  g.g_V(sample.s0) += 1.0;
  g.g_V(sample.s_next) += w * discount;
  g.g_V(sample.s) -= w;
  g.g_lambda = w * u_kappa;
  g.g_x = (sample.r - z.V(sample.s) + discount * z.V(sample.s_next) + u_kappa.dot(z.lambda)) / mu_hat(k);
  return g;
}

Vector update_V(const Vector& V, const Vector& g_V, double eta, double alpha_V, double radius) {
  return (V - (eta / alpha_V) * g_V).cwiseMax(-radius).cwiseMin(radius);
}

Vector update_lambda(const Vector& lambda, const Vector& g_lambda, double eta, double alpha_lambda,
                     double radius) {
  Vector half = lambda.array() * (-(eta / alpha_lambda) * g_lambda.array()).exp();
  const double mass = half.sum();
  if (mass > radius) half *= radius / mass;
  return half;
}

Vector update_x(const Vector& x, int pair, double g_x, double eta, double alpha_x,
                const FeasibleRegions& regions, const Vector& mu_hat) {
  ProxProblem p;
  p.y0 = x;
  p.caps = regions.x_cap_per_coord * mu_hat;
  p.weights = mu_hat.cwiseInverse();
  p.mass_cap = regions.x_cap_mass;
  p.weighted_cap = regions.x_cap_aggregate;
  p.hit = pair;
  p.gradient = -(eta / alpha_x) * g_x;
  return solve_prox(p).y;
}

Iterate initial_iterate(const ProblemInfo& problem, const Vector& mu_hat, double phi) {
  const int I = problem.num_constraints();
  Iterate z;
  z.V = Vector::Zero(problem.num_states());
  z.lambda = Vector::Constant(I, I > 0 ? 1.0 / (phi * I) : 0.0);
  z.x = (static_cast<double>(problem.sparsity()) / problem.num_pairs()) * mu_hat / (1.0 - problem.discount);
  return z;
}

DpdlResult run_dpdl(const ProblemInfo& problem, TupleStream& stream, const DpdlConfig& config,
                    const RunOptions& options) {
  config.validate(problem.discount);
  const std::int64_t before = stream.consumed();
  ReferenceEstimate reference = estimate_reference(stream, config.N_e, config.varsigma);
  DpdlResult out = run_dpdl(problem, stream, config, reference, options);
  out.tuples_consumed = stream.consumed() - before;
  return out;
}

DpdlResult run_dpdl(const ProblemInfo& problem, TupleStream& stream, const DpdlConfig& config,
                    const ReferenceEstimate& reference, const RunOptions& options) {
  config.validate(problem.discount);
  const Emission& em = problem.emission;
  const Emission& data_em = stream.emission();
  require(data_em.num_states == em.num_states && data_em.num_actions == em.num_actions &&
              data_em.num_constraints() == em.num_constraints(),
          "dataset dimensions do not match the problem");
  require(problem.initial_dist.size() == em.num_states, "initial distribution has the wrong size");
  require(reference.mu_hat.size() == em.num_pairs() && reference.mu_hat.minCoeff() > 0.0,
          "mu_hat must be positive with one entry per pair");
  require(options.checkpoints >= 0, "checkpoint count must be >= 0");
  stream.require(config.T, "main loop (T = " + std::to_string(config.T) + ")");

  const auto start = std::chrono::steady_clock::now();
  const auto elapsed_ms = [&] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  };

  const int S = em.num_states;
  const int A = em.num_actions;
  const int I = em.num_constraints();
  const double gamma = problem.discount;
  const Vector& mu_hat = reference.mu_hat;
  const FeasibleRegions regions(gamma, config.phi, config.psi, problem.sparsity());

  Iterate z = initial_iterate(problem, mu_hat, config.phi);
  require(in_primal_region(regions, mu_hat, z.x, kTolerances.region),
          "initial point lies outside X (varsigma too large for the mass cap)");
  CappedKlProx prox(z.x, regions.x_cap_per_coord * mu_hat, mu_hat.cwiseInverse(), regions.x_cap_mass,
                    regions.x_cap_aggregate);

  const double step_V = config.eta / config.alpha_V;
  const double step_lambda = config.eta / config.alpha_lambda;
  const double step_x = config.eta / config.alpha_x;
  const double shift = (1.0 - gamma) * config.kappa;
  const Matrix u_kappa = em.utilities.array() - shift;
  Vector u_kappa_inf(em.num_pairs());
  for (int k = 0; k < em.num_pairs(); ++k) u_kappa_inf(k) = I > 0 ? u_kappa.col(k).cwiseAbs().maxCoeff() : 0.0;

  Rng solver_rng(config.seed, Stream::Solver);
  const AliasTable initial(problem.initial_dist);

  KahanVector sum_V(S);
  KahanVector sum_lambda(I);
  KahanVector sum_x(em.num_pairs());
  Vector scratch_V = Vector::Zero(S);

  DpdlResult out;
  out.reference = reference;
  // Checkpoint j sits at ceil(j T / c), so exactly min(c, T) are recorded.
  const std::int64_t num_checkpoints = std::min<std::int64_t>(options.checkpoints, config.T);
  std::int64_t next_index = 1;
  const auto checkpoint_time = [&](std::int64_t j) {
    return static_cast<std::int64_t>((static_cast<__int128>(j) * config.T + num_checkpoints - 1) / num_checkpoints);
  };
  std::int64_t next_checkpoint = num_checkpoints > 0 ? checkpoint_time(1) : -1;

  for (std::int64_t t = 1; t <= config.T; ++t) {
    const Vector& x = prox.point();
    sum_V.add(z.V);
    sum_lambda.add(z.lambda);
    sum_x.add(x);

    const Transition tr = stream.next();
    const int s0 = tr.s0 >= 0 ? tr.s0 : initial.sample(solver_rng);
    const int k = tr.s * A + tr.a;
    const double w = x(k) / mu_hat(k);

    // All three gradients are taken at the same iterate.
    const double dual_term = I > 0 ? u_kappa.col(k).dot(z.lambda) : 0.0;
    const double g_x = (em.reward(k) - z.V(tr.s) + gamma * z.V(tr.s_next) + dual_term) / mu_hat(k);

    // g_V touches at most three coordinates; the scratch vector is zero on entry.
    scratch_V(s0) += 1.0;
    scratch_V(tr.s_next) += w * gamma;
    scratch_V(tr.s) -= w;
    double g_V_sq = 0.0;
    for (const int s : {s0, tr.s_next, tr.s}) {
      const double g = scratch_V(s);
      if (g == 0.0) continue;
      g_V_sq += g * g;
      z.V(s) = std::clamp(z.V(s) - step_V * g, -regions.value_radius, regions.value_radius);
      scratch_V(s) = 0.0;
    }

    if (I > 0) {
      z.lambda.array() *= (-(step_lambda * w) * u_kappa.col(k).array()).exp();
      const double mass = z.lambda.sum();
      if (mass > regions.dual_radius) z.lambda *= regions.dual_radius / mass;
    }

    const KktCase kc = prox.step(k, -step_x * g_x);
    ++out.kkt_cases[static_cast<int>(kc)];
    out.max_kkt_residual = std::max(out.max_kkt_residual, prox.last_residual());

    out.extremes.g_V_norm = std::max(out.extremes.g_V_norm, std::sqrt(g_V_sq));
    out.extremes.g_lambda_inf = std::max(out.extremes.g_lambda_inf, w * u_kappa_inf(k));
    out.extremes.g_x_abs = std::max(out.extremes.g_x_abs, std::abs(g_x));

    if (t == next_checkpoint) {
      next_checkpoint = ++next_index <= num_checkpoints ? checkpoint_time(next_index) : -1;
      DpdlCheckpoint cp;
      cp.t = t;
      cp.wall_ms = elapsed_ms();
      cp.x_bar = sum_x.mean(t);
      cp.iterate_feasible = z.V.cwiseAbs().maxCoeff() <= regions.value_radius * (1.0 + kTolerances.region) &&
                            (I == 0 || (z.lambda.minCoeff() >= 0.0 &&
                                        z.lambda.sum() <= regions.dual_radius * (1.0 + kTolerances.region))) &&
                            prox.point().minCoeff() > 0.0 &&
                            in_primal_region(regions, mu_hat, prox.point(), kTolerances.region);
      out.checkpoints.push_back(std::move(cp));
    }
  }

  z.x = prox.point();
  if (config.T > 0) {
    out.x_bar = sum_x.mean(config.T);
    out.V_bar = sum_V.mean(config.T);
    out.lambda_bar = sum_lambda.mean(config.T);
  } else {
    out.x_bar = z.x;
    out.V_bar = z.V;
    out.lambda_bar = z.lambda;
  }
  out.policy = policy_of_weights(out.x_bar, S, A);
  out.last = std::move(z);
  out.iterations = config.T;
  out.tuples_consumed = config.T;
  out.wall_ms = elapsed_ms();
  return out;
}

}  // namespace cmdp
