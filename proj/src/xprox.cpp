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

#include "cmdp/xprox.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace cmdp {

const char* to_string(KktCase c) {
  switch (c) {
    case KktCase::BothSlack:
      return "both-slack";
    case KktCase::MassActive:
      return "mass-active";
    case KktCase::WeightedActive:
      return "weighted-active";
    case KktCase::BothActive:
      return "both-active";
  }
  return "unknown";
}

void ProxProblem::validate() const {
  const auto n = y0.size();
  if (n == 0 || caps.size() != n || weights.size() != n)
    throw std::invalid_argument("dpdl: prox problem vectors must be nonempty and equally sized");
  if (hit < 0 || hit >= n) throw std::invalid_argument("dpdl: prox hit index out of range");
  if (!std::isfinite(gradient)) throw std::invalid_argument("dpdl: prox gradient must be finite");
  if (!(mass_cap > 0.0) || !(weighted_cap > 0.0))
    throw std::invalid_argument("dpdl: prox caps B1, B2 must be positive");
  if (!(y0.minCoeff() > 0.0) || !(caps.minCoeff() > 0.0) || !(weights.minCoeff() > 0.0))
    throw std::invalid_argument("dpdl: prox y0, caps and weights must be positive");
  const double slack = 1e-9;
  if ((y0.array() > caps.array() * (1.0 + slack)).any() || y0.sum() > mass_cap * (1.0 + slack) ||
      weights.dot(y0) > weighted_cap * (1.0 + slack))
    throw std::invalid_argument("dpdl: prox starting point must lie in the feasible set");
}

namespace {

constexpr double kFeasibility = 1e-11;
constexpr double kRootTol = 1e-13;
constexpr int kRootIterations = 200;

// Read-only view of one prox step. y0 sums are cached by the caller.
struct StepData {
  const Vector& y0;
  const Vector& a;
  const Vector& c;
  double b1;
  double b2;
  int k;
  double g;
  double s1;
  double s2;

  double y_hat_k() const { return y0(k) * std::exp(-g); }
};

struct Candidate {
  KktCase kkt_case = KktCase::BothSlack;
  double alpha = 0.0;
  double beta = 0.0;
  double yk = 0.0;
  bool capped = false;
  double sum = 0.0;
  double wsum = 0.0;
  double residual = std::numeric_limits<double>::infinity();
};

// Sums over i != k of y0_i exp(-c_i beta) and c_i y0_i exp(-c_i beta), each
// multiplied by exp(shift * beta) to keep quotients representable.
struct RestSums {
  double plain = 0.0;
  double weighted = 0.0;
};

RestSums rest_sums(const StepData& d, double beta, double shift) {
  RestSums out;
  const auto n = d.y0.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (i == d.k) continue;
    const double e = d.y0(i) * std::exp(-(d.c(i) - shift) * beta);
    out.plain += e;
    out.weighted += d.c(i) * e;
  }
  return out;
}

// Positive root of a decreasing function, or nothing if F(0) <= target or
// F stays above target.
template <typename F>
std::optional<double> decreasing_root(F f, double target, double scale) {
  const double f0 = f(0.0);
  if (!(f0 > target)) return std::nullopt;
  double lo = 0.0;
  double hi = 1.0 / scale;
  int grow = 0;
  while (f(hi) > target) {
    lo = hi;
    hi *= 2.0;
    if (++grow > 2000 || !std::isfinite(hi)) return std::nullopt;
  }
  for (int it = 0; it < kRootIterations; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double fm = f(mid);
    if (std::abs(fm - target) <= kRootTol * std::abs(target)) return mid;
    (fm > target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Fills sums, hit value and the O(1) residual of a candidate (alpha, beta).
// Coordinates other than the hit one satisfy stationarity by construction.
void evaluate(const StepData& d, Candidate& cand) {
  const double uncapped = d.y_hat_k() * std::exp(-cand.alpha - d.c(d.k) * cand.beta);
  cand.capped = uncapped >= d.a(d.k);
  cand.yk = cand.capped ? d.a(d.k) : uncapped;
  if (cand.beta == 0.0) {
    const double scale = std::exp(-cand.alpha);
    cand.sum = scale * (d.s1 - d.y0(d.k)) + cand.yk;
    cand.wsum = scale * (d.s2 - d.c(d.k) * d.y0(d.k)) + d.c(d.k) * cand.yk;
  } else {
    const RestSums rest = rest_sums(d, cand.beta, 0.0);
    const double scale = std::exp(-cand.alpha);
    cand.sum = scale * rest.plain + cand.yk;
    cand.wsum = scale * rest.weighted + d.c(d.k) * cand.yk;
  }
  // In log space so that underflowed coordinates stay finite.
  const double log_uncapped = std::log(d.y0(d.k)) - d.g - cand.alpha - d.c(d.k) * cand.beta;
  const double stationarity = cand.capped ? std::max(0.0, std::log(d.a(d.k)) - log_uncapped) : 0.0;
  const double mass_gap = cand.sum / d.b1 - 1.0;
  const double weighted_gap = cand.wsum / d.b2 - 1.0;
  const double feasibility = std::max(mass_gap, weighted_gap);
  double r = std::max({stationarity, cand.alpha * std::abs(mass_gap), cand.beta * std::abs(weighted_gap),
                       -cand.alpha, -cand.beta, 0.0});
  if (feasibility > kFeasibility || !std::isfinite(r)) r = std::numeric_limits<double>::infinity();
  cand.residual = r;
}

template <typename Visit>
void for_each_candidate(const StepData& d, Visit visit) {
  const double ak = d.a(d.k);
  const double cak = d.c(d.k) * ak;
  const double rest1 = d.s1 - d.y0(d.k);
  const double y_hat = d.y_hat_k();

  Candidate c1;
  c1.kkt_case = KktCase::BothSlack;
  if (visit(c1)) return;

  // Mass cap active, weighted cap slack.
  if (d.b1 > ak && rest1 > 0.0) {
    Candidate c;
    c.kkt_case = KktCase::MassActive;
    c.alpha = std::log(rest1 / (d.b1 - ak));
    if (visit(c)) return;
  }
  {
    Candidate c;
    c.kkt_case = KktCase::MassActive;
    c.alpha = std::log((y_hat + rest1) / d.b1);
    if (visit(c)) return;
  }

  double c_max = d.c.maxCoeff();
  // Weighted cap active, mass cap slack.
  if (d.b2 > cak) {
    auto h = [&](double beta) { return rest_sums(d, beta, 0.0).weighted; };
    if (auto beta = decreasing_root(h, d.b2 - cak, c_max)) {
      Candidate c;
      c.kkt_case = KktCase::WeightedActive;
      c.beta = *beta;
      if (visit(c)) return;
    }
  }
  {
    auto h = [&](double beta) {
      return rest_sums(d, beta, 0.0).weighted + d.c(d.k) * y_hat * std::exp(-d.c(d.k) * beta);
    };
    if (auto beta = decreasing_root(h, d.b2, c_max)) {
      Candidate c;
      c.kkt_case = KktCase::WeightedActive;
      c.beta = *beta;
      if (visit(c)) return;
    }
  }

  // Both caps active: the ratio of the two sums fixes beta, then alpha.
  const auto n = d.y0.size();
  double c_min_rest = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i)
    if (i != d.k) c_min_rest = std::min(c_min_rest, d.c(i));
  const double c_min_all = std::min(c_min_rest, d.c(d.k));
  if (n > 1 && d.b1 > ak && d.b2 > cak) {
    const double target = (d.b2 - cak) / (d.b1 - ak);
    auto f = [&](double beta) {
      const RestSums s = rest_sums(d, beta, c_min_rest);
      return s.weighted / s.plain;
    };
    if (auto beta = decreasing_root(f, target, c_max)) {
      const RestSums s = rest_sums(d, *beta, 0.0);
      Candidate c;
      c.kkt_case = KktCase::BothActive;
      c.beta = *beta;
      c.alpha = std::log(s.plain / (d.b1 - ak));
      if (visit(c)) return;
    }
  }
  {
    const double target = d.b2 / d.b1;
    auto f = [&](double beta) {
      const RestSums s = rest_sums(d, beta, c_min_all);
      const double ek = y_hat * std::exp(-(d.c(d.k) - c_min_all) * beta);
      return (s.weighted + d.c(d.k) * ek) / (s.plain + ek);
    };
    if (auto beta = decreasing_root(f, target, c_max)) {
      const RestSums s = rest_sums(d, *beta, 0.0);
      Candidate c;
      c.kkt_case = KktCase::BothActive;
      c.beta = *beta;
      c.alpha = std::log((s.plain + y_hat * std::exp(-d.c(d.k) * *beta)) / d.b1);
      if (visit(c)) return;
    }
  }
}

Candidate solve_step(const StepData& d) {
  Candidate accepted;
  bool found = false;
  for_each_candidate(d, [&](Candidate& c) {
    evaluate(d, c);
    if (c.residual <= kTolerances.kkt) {
      accepted = c;
      found = true;
    }
    return found;
  });
  if (!found)
    throw std::runtime_error("dpdl: no KKT case of the x-subproblem validated (hit " +
                             std::to_string(d.k) + ", gradient " + std::to_string(d.g) + ")");
  return accepted;
}

void materialize(const StepData& d, const Candidate& c, Vector& y) {
  if (c.alpha != 0.0 || c.beta != 0.0) {
    const auto n = y.size();
    if (c.beta == 0.0) {
      const double scale = std::exp(-c.alpha);
      for (Eigen::Index i = 0; i < n; ++i) y(i) = d.y0(i) * scale;
    } else {
      for (Eigen::Index i = 0; i < n; ++i) y(i) = d.y0(i) * std::exp(-c.alpha - d.c(i) * c.beta);
    }
  }
  y(d.k) = c.yk;
}

ProxSolution to_solution(const ProxProblem& p, const StepData& d, const Candidate& c) {
  ProxSolution out;
  out.y = p.y0;
  materialize(d, c, out.y);
  out.alpha = c.alpha;
  out.beta = c.beta;
  out.kkt_case = c.kkt_case;
  out.hit_capped = c.capped;
  out.residual = kkt_residual(p, out.y, c.alpha, c.beta);
  return out;
}

}  // namespace

double kkt_residual(const ProxProblem& p, const Vector& y, double alpha, double beta) {
  const auto n = p.y0.size();
  if (y.size() != n) throw std::invalid_argument("dpdl: residual point has the wrong size");
  double r = std::max({-alpha, -beta, 0.0});
  double sum = 0.0;
  double wsum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (p.y0(i) == 0.0) {
      if (y(i) != 0.0) return std::numeric_limits<double>::infinity();
      continue;
    }
    if (!(y(i) > 0.0)) return std::numeric_limits<double>::infinity();
    const double gi = (i == p.hit ? p.gradient : 0.0) + alpha + p.weights(i) * beta +
                      std::log(y(i)) - std::log(p.y0(i));
    const bool at_cap = y(i) >= p.caps(i) * (1.0 - 1e-12);
    r = std::max(r, at_cap ? std::max(0.0, gi) : std::abs(gi));
    r = std::max(r, y(i) / p.caps(i) - 1.0);
    sum += y(i);
    wsum += p.weights(i) * y(i);
  }
  const double mass_gap = sum / p.mass_cap - 1.0;
  const double weighted_gap = wsum / p.weighted_cap - 1.0;
  return std::max({r, mass_gap, weighted_gap, alpha * std::abs(mass_gap), beta * std::abs(weighted_gap)});
}

ProxSolution solve_prox(const ProxProblem& p) {
  p.validate();
  const StepData d{p.y0, p.caps, p.weights, p.mass_cap, p.weighted_cap, p.hit, p.gradient,
                   p.y0.sum(), p.weights.dot(p.y0)};
  return to_solution(p, d, solve_step(d));
}

std::vector<ProxSolution> prox_candidates(const ProxProblem& p) {
  p.validate();
  const StepData d{p.y0, p.caps, p.weights, p.mass_cap, p.weighted_cap, p.hit, p.gradient,
                   p.y0.sum(), p.weights.dot(p.y0)};
  std::vector<ProxSolution> out;
  for_each_candidate(d, [&](Candidate& c) {
    evaluate(d, c);
    out.push_back(to_solution(p, d, c));
    return false;
  });
  return out;
}

CappedKlProx::CappedKlProx(Vector y, Vector caps, Vector weights, double mass_cap, double weighted_cap)
    : y_(std::move(y)),
      caps_(std::move(caps)),
      weights_(std::move(weights)),
      mass_cap_(mass_cap),
      weighted_cap_(weighted_cap) {
  ProxProblem check{y_, caps_, weights_, mass_cap_, weighted_cap_, 0, 0.0};
  check.validate();
  refresh_sums();
}

void CappedKlProx::refresh_sums() {
  sum_ = y_.sum();
  wsum_ = weights_.dot(y_);
}

KktCase CappedKlProx::step(int hit, double gradient) {
  if (hit < 0 || hit >= y_.size()) throw std::invalid_argument("dpdl: prox hit index out of range");
  const StepData d{y_, caps_, weights_, mass_cap_, weighted_cap_, hit, gradient, sum_, wsum_};
  const Candidate c = solve_step(d);
  // materialize reads y0 through d, which aliases y_; the update is elementwise.
  materialize(d, c, y_);
  last_residual_ = c.residual;
  if (c.beta != 0.0 || ++steps_ % 1024 == 0) {
    refresh_sums();
  } else {
    sum_ = c.sum;
    wsum_ = c.wsum;
  }
  return c.kkt_case;
}

}  // namespace cmdp
