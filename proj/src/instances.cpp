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

#include "cmdp/instances.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "cmdp/model_io.hpp"
#include "cmdp/oracle.hpp"
#include "cmdp/rng.hpp"

namespace cmdp {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("instances: " + what);
}

bool is_sign(int v) { return v == 1 || v == -1; }

}  // namespace

int HardInstanceParams::K() const { return std::min(I / 2, (A - 1) / 2); }

int HardInstanceParams::S_c() const { return std::min(I / (2 * K()), S); }

int HardInstanceParams::S_u() const { return S_c() < S - 3 ? S - S_c() : 0; }

void HardInstanceParams::validate() const {
  require(S >= 4 && A >= 3 && I >= 8 && C >= 2.0,
          "hard family needs S >= 4, A >= 3, I >= 8 and C >= 2");
  require(gamma >= 0.5 && gamma < 1.0, "hard family needs gamma in [1/2, 1)");
  require(varpi_c > 0.0 && varpi_c <= 0.5 && varpi_u > 0.0 && varpi_u <= 0.5,
          "varpi_c and varpi_u must lie in (0, 1/2]");
  require(static_cast<int>(theta_c.size()) == S_c() * K(),
          "theta_c needs S_c * K = " + std::to_string(S_c() * K()) + " signs");
  require(static_cast<int>(theta_u.size()) == S_u(), "theta_u needs S_u = " + std::to_string(S_u()) + " signs");
  require(std::all_of(theta_c.begin(), theta_c.end(), is_sign) &&
              std::all_of(theta_u.begin(), theta_u.end(), is_sign),
          "theta entries must be -1 or +1");
}

BlockConstants::BlockConstants(double gamma)
    : p(1.0 / (2.0 - gamma)),
      q(2.0 - 1.0 / gamma),
      v0(2.0 / (2.0 + gamma)),
      v1(2.0 * gamma / ((2.0 + gamma) * (2.0 - gamma))),
      v(gamma * gamma / ((2.0 + gamma) * (2.0 - gamma))) {}

HardInstanceParams random_hard_params(int S, int A, int I, double C, double gamma, std::uint64_t seed,
                                      double varpi) {
  HardInstanceParams params;
  params.S = S;
  params.A = A;
  params.I = I;
  params.C = C;
  params.gamma = gamma;
  params.varpi_c = varpi;
  params.varpi_u = varpi;
  require(S >= 1 && A >= 3 && I >= 2, "hard family needs S >= 1, A >= 3 and I >= 2");
  Rng rng(seed, Stream::Instance);
  params.theta_c.resize(static_cast<std::size_t>(params.S_c() * params.K()));
  params.theta_u.resize(static_cast<std::size_t>(params.S_u()));
  for (int& t : params.theta_c) t = rng.uniform() < 0.5 ? -1 : 1;
  for (int& t : params.theta_u) t = rng.uniform() < 0.5 ? -1 : 1;
  return params;
}

HardInstance build_hard_cmdp(const HardInstanceParams& params) {
  params.validate();
  const int K = params.K();
  const int Sc = params.S_c();
  const int Su = params.S_u();
  const int blocks = Sc + Su;
  const int ns = 4 * blocks + 1;
  const int na = Sc > 0 ? 2 * K + 1 : 2;
  const int ni = 2 * Sc * K;
  const int null_state = ns - 1;
  const double gamma = params.gamma;
  const BlockConstants k(gamma);
  const double rho_c = Sc > 0 ? (Su > 0 ? 1.0 / (2.0 * Sc) : 1.0 / Sc) : 0.0;
  const double rho_u = Su > 0 ? (Sc > 0 ? 1.0 / (2.0 * Su) : 1.0 / Su) : 0.0;
  const double C = params.C;

  Matrix P = Matrix::Zero(static_cast<Eigen::Index>(ns) * na, ns);
  Vector r = Vector::Zero(static_cast<Eigen::Index>(ns) * na);
  Matrix U = Matrix::Zero(ni, static_cast<Eigen::Index>(ns) * na);
  Vector rho0 = Vector::Zero(ns);
  Vector mu = Vector::Zero(static_cast<Eigen::Index>(ns) * na);
  Matrix pi = Matrix::Constant(ns, na, 1.0 / na);
  const auto pair = [na](int s, int a) { return static_cast<Eigen::Index>(s) * na + a; };
  // States without a choice: every action repeats the same row.
  const auto set_row = [&](int s, int to, double prob) {
    for (int a = 0; a < na; ++a) P(pair(s, a), to) += prob;
  };

  double optimal = 0.0;
  for (int j = 0; j < blocks; ++j) {
    const bool constrained = j < Sc;
    const double rho = constrained ? rho_c : rho_u;
    const double varpi = constrained ? params.varpi_c : params.varpi_u;
    const int s0 = block_state(j, 0);
    const int s1 = block_state(j, 1);
    const int sp = block_state(j, 2);
    const int sm = block_state(j, 3);
    rho0(s0) = rho;

    set_row(s0, s0, k.p);
    set_row(s0, s1, 1.0 - k.p);
    set_row(sp, sp, k.q);
    set_row(sp, s0, 1.0 - k.q);
    set_row(sm, sm, k.q);
    set_row(sm, s0, 1.0 - k.q);
    for (int a = 0; a < na; ++a) {
      r(pair(sp, a)) = 1.0;
      r(pair(sm, a)) = -1.0;
    }

    mu(pair(s0, 0)) = k.v0 * rho / C;
    mu(pair(sp, 0)) = 0.75 * k.v * rho / C;
    mu(pair(sm, 0)) = 0.5 * k.v * rho / C;

    pi.row(s1).setZero();
    if (constrained) {
      const int e = 2 * K;
      for (int i = 0; i < K; ++i) {
        const int theta = params.theta_c[static_cast<std::size_t>(j * K + i)];
        const int a = 2 * i;
        const int b = 2 * i + 1;
        P(pair(s1, a), sp) = (1.0 + varpi * theta) / 2.0;
        P(pair(s1, a), sm) = (1.0 - varpi * theta) / 2.0;
        P(pair(s1, b), sp) = (1.0 - varpi / 2.0) / 2.0;
        P(pair(s1, b), sm) = (1.0 + varpi / 2.0) / 2.0;
        const int c = 2 * (j * K + i);
        U(c, pair(s1, a)) = -1.0;
        U(c, pair(s1, b)) = 1.0;
        U(c + 1, pair(s1, b)) = -1.0;
        mu(pair(s1, a)) = rho * k.v1 * (1.0 - gamma) / (4.0 * K * C);
        mu(pair(s1, b)) = mu(pair(s1, a));
        if (theta == 1) {
          pi(s1, a) = 1.0 / (4.0 * K);
          pi(s1, b) = 1.0 / (4.0 * K);
          optimal += varpi * rho / (8.0 * K);
        }
      }
      P(pair(s1, e), sp) = 0.5;
      P(pair(s1, e), sm) = 0.5;
      mu(pair(s1, e)) = k.v1 * (1.0 - gamma) * rho / C;
      pi(s1, e) = 1.0 - pi.row(s1).sum();
    } else {
      const int theta = params.theta_u[static_cast<std::size_t>(j - Sc)];
      P(pair(s1, 0), sp) = (1.0 + varpi * theta) / 2.0;
      P(pair(s1, 0), sm) = (1.0 - varpi * theta) / 2.0;
      for (int a = 1; a < na; ++a) {
        P(pair(s1, a), sp) = 0.5;
        P(pair(s1, a), sm) = 0.5;
      }
      mu(pair(s1, 0)) = rho * k.v1 * (1.0 - gamma) / C;
      mu(pair(s1, 1)) = k.v1 * (1.0 - gamma) * rho / C;
      pi(s1, theta == 1 ? 0 : 1) = 1.0;
      if (theta == 1) optimal += varpi * rho;
    }
  }
  set_row(null_state, null_state, 1.0);
  mu(pair(null_state, 0)) = 1.0 - mu.sum();
  require(mu(pair(null_state, 0)) >= 0.0, "reference distribution leaves negative mass on the null state");

  // Shift the upper-bound utilities so that every constraint reads J >= 0.
  const double shift = (1.0 - gamma) * rho_c * k.v1 / (4.0 * std::max(K, 1));
  for (int c = 1; c < ni; c += 2) U.row(c).array() += shift;

  HardInstance out{CmdpModel(ns, na, gamma, std::move(P), std::move(r), std::move(U), std::move(rho0)),
                   std::move(mu), Policy(std::move(pi)), k.v / (1.0 - gamma) * optimal};
  return out;
}

HardInstance build_slater_instance(int S, int A, double C, double gamma, const std::vector<int>& theta,
                                   double varpi) {
  require(S >= 4 && A >= 3 && C >= 2.0, "Slater family needs S >= 4, A >= 3 and C >= 2");
  require(gamma >= 0.5 && gamma < 1.0, "Slater family needs gamma in [1/2, 1)");
  require(varpi > 0.0 && varpi <= 0.5, "varpi must lie in (0, 1/2]");
  require(static_cast<int>(theta.size()) == S, "theta needs S entries");
  require(std::all_of(theta.begin(), theta.end(), [](int t) { return t == 0 || t == 1; }),
          "theta entries must be 0 or 1");
  const BlockConstants k(gamma);
  const int ns = S + 4;
  const int na = 2;
  const int null_state = 0;
  const int s0 = 1;
  const int sp = 2;
  const int sm = 3;
  const auto pair = [](int s, int a) { return static_cast<Eigen::Index>(s) * 2 + a; };

  Matrix P = Matrix::Zero(static_cast<Eigen::Index>(ns) * na, ns);
  Matrix U = Matrix::Zero(1, static_cast<Eigen::Index>(ns) * na);
  Vector rho0 = Vector::Zero(ns);
  Vector mu = Vector::Zero(static_cast<Eigen::Index>(ns) * na);
  Matrix pi = Matrix::Constant(ns, na, 0.5);
  rho0(s0) = 1.0;
  for (int a = 0; a < na; ++a) {
    P(pair(null_state, a), null_state) = 1.0;
    P(pair(s0, a), s0) = k.p;
    for (int j = 0; j < S; ++j) P(pair(s0, a), 4 + j) = (1.0 - k.p) / S;
    P(pair(sp, a), sp) = k.q;
    P(pair(sp, a), s0) = 1.0 - k.q;
    P(pair(sm, a), sm) = k.q;
    P(pair(sm, a), s0) = 1.0 - k.q;
    U(0, pair(sp, a)) = 1.0;
    U(0, pair(sm, a)) = -1.0;
  }
  for (int j = 0; j < S; ++j) {
    const int s = 4 + j;
    const double t = theta[static_cast<std::size_t>(j)];
    P(pair(s, 0), sp) = (1.0 - varpi * t) / 2.0;
    P(pair(s, 0), sm) = (1.0 + varpi * t) / 2.0;
    P(pair(s, 1), sp) = (1.0 - varpi * (1.0 - t)) / 2.0;
    P(pair(s, 1), sm) = (1.0 + varpi * (1.0 - t)) / 2.0;
    mu(pair(s, 0)) = k.v1 * (1.0 - gamma) / (S * C);
    mu(pair(s, 1)) = mu(pair(s, 0));
    pi(s, 0) = 1.0 - t;
    pi(s, 1) = t;
  }
  mu(pair(s0, 0)) = k.v0 / C;
  mu(pair(sp, 0)) = k.v / C;
  mu(pair(sm, 0)) = k.v / C;
  mu(pair(null_state, 0)) = 1.0 - mu.sum();
  require(mu(pair(null_state, 0)) >= 0.0, "reference distribution leaves negative mass on the null state");

  return HardInstance{CmdpModel(ns, na, gamma, std::move(P), Vector::Zero(static_cast<Eigen::Index>(ns) * na),
                                std::move(U), std::move(rho0)),
                      std::move(mu), Policy(std::move(pi)), 0.0};
}

double slater_instance_utility(const Policy& pi, double gamma, const std::vector<int>& theta, double varpi) {
  const int S = static_cast<int>(theta.size());
  require(pi.num_states() == S + 4 && pi.num_actions() == 2, "policy does not fit the Slater family");
  double distance = 0.0;
  for (int j = 0; j < S; ++j) distance += std::abs(pi(4 + j, 1) - theta[static_cast<std::size_t>(j)]);
  return -BlockConstants(gamma).v * varpi / (S * (1.0 - gamma)) * distance;
}

CmdpModel random_cmdp(int S, int A, int I, double gamma, double slater_target, std::uint64_t seed) {
  require(S >= 1 && A >= 1 && I >= 0, "dimensions must be positive (I >= 0)");
  require(gamma > 0.0 && gamma < 1.0, "gamma must lie in (0, 1)");
  require(slater_target > 0.0 && slater_target < 1.0, "slater_target must lie in (0, 1)");
  Rng rng(seed, Stream::Instance);
  const int n = S * A;
  Matrix P(n, S);
  for (int k = 0; k < n; ++k) P.row(k) = dirichlet_uniform(rng, S).transpose();
  Vector r(n);
  for (int k = 0; k < n; ++k) r(k) = rng.uniform();
  const Vector rho0 = Vector::Constant(S, 1.0 / S);
  const auto draw_utilities = [&] {
    Matrix U(I, n);
    for (int i = 0; i < I; ++i)
      for (int k = 0; k < n; ++k) U(i, k) = 2.0 * rng.uniform() - 1.0;
    return U;
  };
  if (I == 0) return CmdpModel(S, A, gamma, std::move(P), std::move(r), draw_utilities(), rho0);

  // A common shift c moves the margin by exactly c, so one shift lands on
  // the target (from either side) and a second absorbs LP round-off. Draws
  // whose shifted utilities leave [-1, 1] are rejected.
  for (int attempt = 0; attempt < 100; ++attempt) {
    Matrix U = draw_utilities();
    for (int pass = 0; pass < 3; ++pass) {
      if (U.cwiseAbs().maxCoeff() > 1.0) break;
      const double phi = slater_margin(CmdpModel(S, A, gamma, P, r, U, rho0)).value;
      if (pass > 0 && phi >= slater_target) return CmdpModel(S, A, gamma, P, r, U, rho0);
      U.array() += (slater_target - phi) + 1e-12;
    }
  }
  throw std::runtime_error("instances: utility shift did not reach the Slater target within 100 rounds; "
                           "relax slater_target");
}

nlohmann::json sidecar_json(const HardInstance& instance) {
  return {{"mu", vector_to_json(instance.mu)},
          {"optimal_policy", policy_to_json(instance.optimal_policy)},
          {"optimal_value", instance.optimal_value}};
}

}  // namespace cmdp
