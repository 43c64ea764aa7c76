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

#include "cmdp/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "cmdp/model_io.hpp"

namespace cmdp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Reward floor on the optimal face when minimizing psi.
constexpr double kFaceSlack = 1e-9;

// Adds A^T nu = rho0 over the first n variables of an LP with `total` variables.
void add_flow_rows(LinearProgram& lp, const CmdpModel& model, int total) {
  const Matrix a = flow_matrix(model);
  for (int s = 0; s < model.num_states(); ++s) {
    Vector row = Vector::Zero(total);
    row.head(model.num_pairs()) = a.col(s);
    lp.add_constraint(std::move(row), Sense::Equal, model.initial_dist()(s));
  }
}

// Per-coordinate and aggregate ratio caps of the deviation set against mu.
// With `t_index` >= 0 the level is the LP variable t, otherwise the constant psi.
void add_deviation_rows(LinearProgram& lp, const CmdpModel& model, const Vector& mu,
                        int total, int t_index, double psi) {
  const double g = 1.0 - model.discount();
  const int n = model.num_pairs();
  const double sparsity = model.effective_sparsity();
  Vector aggregate = Vector::Zero(total);
  for (int k = 0; k < n; ++k) {
    if (mu(k) <= 0.0) {
      lp.set_bounds(k, 0.0, 0.0);
      continue;
    }
    aggregate(k) = g / mu(k);
    if (t_index >= 0) {
      Vector row = Vector::Zero(total);
      row(k) = g;
      row(t_index) = -mu(k);
      lp.add_constraint(std::move(row), Sense::LessEqual, 0.0);
    } else {
      lp.set_bounds(k, 0.0, psi * mu(k) / g);
    }
  }
  if (t_index >= 0) {
    aggregate(t_index) = -sparsity;
    lp.add_constraint(std::move(aggregate), Sense::LessEqual, 0.0);
  } else {
    lp.add_constraint(std::move(aggregate), Sense::LessEqual, sparsity * psi);
  }
}

}  // namespace

void check_pair_distribution(const CmdpModel& model, const Vector& mu, const char* module) {
  const std::string prefix = std::string(module) + ": ";
  if (mu.size() != model.num_pairs())
    throw std::invalid_argument(prefix + "distribution over pairs must have |S||A| entries");
  if (!mu.allFinite() || mu.minCoeff() < 0.0)
    throw std::invalid_argument(prefix + "distribution entries must be finite and >= 0");
  if (std::abs(mu.sum() - 1.0) > 1e-9)
    throw std::invalid_argument(prefix + "distribution must sum to 1");
}

CmdpSolution solve_cmdp(const CmdpModel& model) {
  const int n = model.num_pairs();
  LinearProgram lp(n, Direction::Maximize);
  lp.objective() = model.reward();
  add_flow_rows(lp, model, n);
  for (int i = 0; i < model.num_constraints(); ++i)
    lp.add_constraint(model.utilities().row(i).transpose(), Sense::GreaterEqual, 0.0);

  CmdpSolution out;
  out.lp = solve_lp(lp);
  out.status = out.lp.status;
  if (out.status != LpStatus::Optimal) {
    out.occupancy = Vector::Zero(n);
    return out;
  }
  out.occupancy = out.lp.primal.cwiseMax(0.0);
  out.value = model.reward().dot(out.occupancy);
  return out;
}

Concentrability concentrability(const CmdpModel& model, const Vector& mu) {
  check_pair_distribution(model, mu, "lp-oracle");
  const CmdpSolution opt = solve_cmdp(model);
  if (opt.status != LpStatus::Optimal)
    throw std::runtime_error("lp-oracle: CMDP has no safe policy; concentrability undefined");

  const int n = model.num_pairs();
  const int t = n;
  LinearProgram lp(n + 1, Direction::Minimize);
  lp.objective()(t) = 1.0;
  add_flow_rows(lp, model, n + 1);
  for (int i = 0; i < model.num_constraints(); ++i) {
    Vector row = Vector::Zero(n + 1);
    row.head(n) = model.utilities().row(i).transpose();
    lp.add_constraint(std::move(row), Sense::GreaterEqual, 0.0);
  }
  Vector reward = Vector::Zero(n + 1);
  reward.head(n) = model.reward();
  lp.add_constraint(std::move(reward), Sense::GreaterEqual, opt.value - kFaceSlack);
  add_deviation_rows(lp, model, mu, n + 1, t, 0.0);

  const LpResult res = solve_lp(lp);
  Concentrability out;
  if (res.status != LpStatus::Optimal) {
    out.value = kInf;
    out.occupancy = Vector::Zero(n);
    return out;
  }
  out.occupancy = res.primal.head(n).cwiseMax(0.0);
  out.value = res.primal(t);
  return out;
}

namespace {

SlaterMargin epigraph_margin(const CmdpModel& model, const Vector* mu, double psi) {
  const int n = model.num_pairs();
  const int z = n;
  LinearProgram lp(n + 1, Direction::Maximize);
  lp.objective()(z) = 1.0;
  lp.set_free(z);
  add_flow_rows(lp, model, n + 1);
  for (int i = 0; i < model.num_constraints(); ++i) {
    Vector row = Vector::Zero(n + 1);
    row.head(n) = model.utilities().row(i).transpose();
    row(z) = -1.0;
    lp.add_constraint(std::move(row), Sense::GreaterEqual, 0.0);
  }
  if (mu != nullptr) add_deviation_rows(lp, model, *mu, n + 1, -1, psi);

  const LpResult res = solve_lp(lp);
  SlaterMargin out;
  if (res.status != LpStatus::Optimal) {
    out.value = -kInf;
    out.occupancy = Vector::Zero(n);
    return out;
  }
  out.occupancy = res.primal.head(n).cwiseMax(0.0);
  out.value = (1.0 - model.discount()) * (model.utilities() * out.occupancy).minCoeff();
  return out;
}

}  // namespace

SlaterMargin slater_margin(const CmdpModel& model) {
  if (model.num_constraints() == 0) {
    SlaterMargin out;
    out.value = 1.0;
    out.occupancy = occupancy_of_policy(model, Policy::uniform(model.num_states(), model.num_actions())).values();
    return out;
  }
  return epigraph_margin(model, nullptr, 0.0);
}

SlaterMargin restricted_slater_margin(const CmdpModel& model, const Vector& mu, double psi) {
  check_pair_distribution(model, mu, "lp-oracle");
  if (!(psi >= 1.0)) throw std::invalid_argument("lp-oracle: psi must be >= 1");
  if (model.num_constraints() == 0) {
    SlaterMargin out = epigraph_margin(model, &mu, psi);
    if (std::isfinite(out.value)) out.value = 1.0;
    return out;
  }
  return epigraph_margin(model, &mu, psi);
}

namespace {

void check_spec(const CmdpModel& model, const SaddleSpec& spec) {
  const int n = model.num_pairs();
  if (spec.mu_hat.size() != n || spec.weights.size() != n)
    throw std::invalid_argument("lp-oracle: mu_hat and weights must have |S||A| entries");
  if (spec.mu_hat.minCoeff() <= 0.0) throw std::invalid_argument("lp-oracle: mu_hat must be positive");
  if (spec.weights.minCoeff() < 0.0) throw std::invalid_argument("lp-oracle: weights must be >= 0");
  if (!(spec.psi >= 1.0)) throw std::invalid_argument("lp-oracle: psi must be >= 1");
  if (!(spec.kappa >= 0.0)) throw std::invalid_argument("lp-oracle: kappa must be >= 0");
  if (!(spec.phi > 0.0)) throw std::invalid_argument("lp-oracle: phi must be positive");
}

}  // namespace

double penalized_value(const CmdpModel& model, const SaddleSpec& spec, const Vector& x) {
  check_spec(model, spec);
  if (x.size() != model.num_pairs()) throw std::invalid_argument("lp-oracle: x must have |S||A| entries");
  const FeasibleRegions regions(model.discount(), spec.phi, spec.psi, model.effective_sparsity());
  const Vector wx = spec.weights.cwiseProduct(x);
  double value = model.reward().dot(wx) -
                 regions.value_radius * flow_residual(model, wx).lpNorm<1>();
  if (model.num_constraints() > 0) {
    const Vector shifted = model.utilities() * wx -
                           Vector::Constant(model.num_constraints(),
                                            (1.0 - model.discount()) * spec.kappa * wx.sum());
    value -= regions.dual_radius * std::max(0.0, -shifted.minCoeff());
  }
  return value;
}

RestrictedValue restricted_value(const CmdpModel& model, const SaddleSpec& spec) {
  check_spec(model, spec);
  const int n = model.num_pairs();
  const int ns = model.num_states();
  const int ni = model.num_constraints();
  const double g = 1.0 - model.discount();
  const FeasibleRegions regions(model.discount(), spec.phi, spec.psi, model.effective_sparsity());

  // Variables: x (n), e (|S|) for the l1 penalty, z for the max negative part.
  const int total = n + ns + 1;
  const int z = n + ns;
  LinearProgram lp(total, Direction::Maximize);
  lp.objective().head(n) = model.reward().cwiseProduct(spec.weights);
  lp.objective().segment(n, ns).setConstant(-regions.value_radius);
  lp.objective()(z) = -regions.dual_radius;

  // A^T W x - rho0 as rows over x.
  const Matrix flow_w = flow_matrix(model).transpose() * spec.weights.asDiagonal();
  for (int s = 0; s < ns; ++s) {
    Vector up = Vector::Zero(total);
    up.head(n) = flow_w.row(s).transpose();
    up(n + s) = -1.0;
    lp.add_constraint(up, Sense::LessEqual, model.initial_dist()(s));
    Vector down = Vector::Zero(total);
    down.head(n) = -flow_w.row(s).transpose();
    down(n + s) = -1.0;
    lp.add_constraint(std::move(down), Sense::LessEqual, -model.initial_dist()(s));
  }
  for (int i = 0; i < ni; ++i) {
    Vector row = Vector::Zero(total);
    row.head(n) = (model.utilities().row(i).transpose().array() - g * spec.kappa).matrix()
                      .cwiseProduct(spec.weights);
    row(z) = 1.0;
    lp.add_constraint(std::move(row), Sense::GreaterEqual, 0.0);
  }
  Vector ratio = Vector::Zero(total);
  Vector mass = Vector::Zero(total);
  for (int k = 0; k < n; ++k) {
    lp.set_bounds(k, 0.0, regions.x_cap_per_coord * spec.mu_hat(k));
    ratio(k) = 1.0 / spec.mu_hat(k);
    mass(k) = 1.0;
  }
  lp.add_constraint(std::move(ratio), Sense::LessEqual, regions.x_cap_aggregate);
  lp.add_constraint(std::move(mass), Sense::LessEqual, regions.x_cap_mass);

  const LpResult res = solve_lp(lp);
  if (res.status != LpStatus::Optimal)
    throw std::runtime_error(std::string("lp-oracle: restricted value LP returned ") + to_string(res.status));
  RestrictedValue out;
  out.x = res.primal.head(n).cwiseMax(0.0);
  out.value = penalized_value(model, spec, out.x);
  return out;
}

bool in_primal_region(const FeasibleRegions& regions, const Vector& mu_hat, const Vector& x,
                      double slack) {
  if (x.size() != mu_hat.size() || x.minCoeff() < 0.0) return false;
  const Vector ratio = x.cwiseQuotient(mu_hat);
  return ratio.maxCoeff() <= regions.x_cap_per_coord * (1.0 + slack) &&
         ratio.sum() <= regions.x_cap_aggregate * (1.0 + slack) &&
         x.sum() <= regions.x_cap_mass * (1.0 + slack);
}

GroundTruth ground_truth(const CmdpModel& model, const Vector& mu) {
  const CmdpSolution opt = solve_cmdp(model);
  if (opt.status != LpStatus::Optimal)
    throw std::runtime_error("lp-oracle: CMDP has no safe policy");
  GroundTruth truth;
  truth.opt_reward = opt.value;
  truth.opt_occupancy = opt.occupancy;
  truth.concentrability = concentrability(model, mu).value;
  truth.slater_margin = slater_margin(model).value;
  truth.effective_sparsity = model.effective_sparsity();
  return truth;
}

nlohmann::json to_json(const GroundTruth& truth) {
  nlohmann::json doc;
  doc["opt_reward"] = truth.opt_reward;
  doc["opt_occupancy"] = vector_to_json(truth.opt_occupancy);
  if (std::isfinite(truth.concentrability)) {
    doc["concentrability"] = truth.concentrability;
  } else {
    doc["concentrability"] = nullptr;
  }
  doc["slater_margin"] = truth.slater_margin;
  doc["effective_sparsity"] = truth.effective_sparsity;
  return doc;
}

}  // namespace cmdp
