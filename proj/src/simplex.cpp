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

#include "cmdp/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace cmdp {

const char* to_string(LpStatus status) {
  switch (status) {
    case LpStatus::Optimal:
      return "optimal";
    case LpStatus::Infeasible:
      return "infeasible";
    case LpStatus::Unbounded:
      return "unbounded";
  }
  return "unknown";
}

LinearProgram::LinearProgram(int num_variables, Direction direction)
    : direction_(direction),
      objective_(Vector::Zero(num_variables)),
      lower_(Vector::Zero(num_variables)),
      upper_(Vector::Constant(num_variables, kInf)) {
  if (num_variables < 1) throw std::invalid_argument("lp-oracle: LP needs at least one variable");
}

void LinearProgram::add_constraint(Vector coefficients, Sense sense, double rhs) {
  if (coefficients.size() != objective_.size())
    throw std::invalid_argument("lp-oracle: constraint has wrong number of coefficients");
  constraints_.push_back({std::move(coefficients), sense, rhs});
}

void LinearProgram::set_bounds(int j, double lower, double upper) {
  if (j < 0 || j >= num_variables()) throw std::invalid_argument("lp-oracle: variable index out of range");
  if (lower > upper) throw std::invalid_argument("lp-oracle: lower bound exceeds upper bound");
  if (lower == kInf || upper == -kInf) throw std::invalid_argument("lp-oracle: invalid infinite bound");
  lower_(j) = lower;
  upper_(j) = upper;
}

void LinearProgram::validate() const {
  if (!objective_.allFinite()) throw std::invalid_argument("lp-oracle: objective must be finite");
  for (const auto& c : constraints_) {
    if (c.coefficients.size() != objective_.size())
      throw std::invalid_argument("lp-oracle: constraint dimension mismatch");
    if (!c.coefficients.allFinite() || !std::isfinite(c.rhs))
      throw std::invalid_argument("lp-oracle: constraint data must be finite");
  }
}

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr double kPivotTol = 1e-9;
constexpr double kDegenerate = 1e-12;
constexpr int kDegenerateRun = 50;

// x_j = offset + sign * y[col] - y[col2] (col2 = -1 when absent).
struct VariableMap {
  double offset = 0.0;
  double sign = 1.0;
  int col = -1;
  int col2 = -1;
};

// min c^T y, rows (sense) b, y >= 0, with b >= 0 after row flips.
struct StandardForm {
  std::vector<VariableMap> vars;
  int num_structural = 0;
  Matrix a;
  Vector b;
  Vector c;
  std::vector<Sense> senses;
  std::vector<double> flip;
  int num_original_rows = 0;
};

StandardForm to_standard(const LinearProgram& lp) {
  StandardForm sf;
  const int n = lp.num_variables();
  sf.vars.resize(n);
  int cols = 0;
  std::vector<std::pair<int, double>> upper_rows;
  for (int j = 0; j < n; ++j) {
    const double lo = lp.lower()(j);
    const double hi = lp.upper()(j);
    VariableMap& v = sf.vars[j];
    if (std::isfinite(lo)) {
      v.offset = lo;
      v.col = cols++;
      if (std::isfinite(hi)) upper_rows.emplace_back(v.col, hi - lo);
    } else if (std::isfinite(hi)) {
      v.offset = hi;
      v.sign = -1.0;
      v.col = cols++;
    } else {
      v.col = cols++;
      v.col2 = cols++;
    }
  }
  sf.num_structural = cols;
  const int m_orig = lp.num_constraints();
  const int m = m_orig + static_cast<int>(upper_rows.size());
  sf.num_original_rows = m_orig;
  sf.a = Matrix::Zero(m, cols);
  sf.b = Vector::Zero(m);
  sf.c = Vector::Zero(cols);
  sf.senses.resize(m);
  sf.flip.assign(m, 1.0);

  const double dir = lp.direction() == Direction::Maximize ? -1.0 : 1.0;
  for (int j = 0; j < n; ++j) {
    const VariableMap& v = sf.vars[j];
    const double cj = dir * lp.objective()(j);
    sf.c(v.col) += v.sign * cj;
    if (v.col2 >= 0) sf.c(v.col2) -= cj;
  }
  for (int i = 0; i < m_orig; ++i) {
    const LinearConstraint& con = lp.constraints()[i];
    double rhs = con.rhs;
    for (int j = 0; j < n; ++j) {
      const double aij = con.coefficients(j);
      if (aij == 0.0) continue;
      const VariableMap& v = sf.vars[j];
      rhs -= aij * v.offset;
      sf.a(i, v.col) += v.sign * aij;
      if (v.col2 >= 0) sf.a(i, v.col2) -= aij;
    }
    sf.b(i) = rhs;
    sf.senses[i] = con.sense;
  }
  for (std::size_t k = 0; k < upper_rows.size(); ++k) {
    const int i = m_orig + static_cast<int>(k);
    sf.a(i, upper_rows[k].first) = 1.0;
    sf.b(i) = upper_rows[k].second;
    sf.senses[i] = Sense::LessEqual;
  }
  for (int i = 0; i < m; ++i) {
    if (sf.b(i) < 0.0) {
      sf.a.row(i) *= -1.0;
      sf.b(i) = -sf.b(i);
      sf.flip[i] = -1.0;
      if (sf.senses[i] == Sense::LessEqual) {
        sf.senses[i] = Sense::GreaterEqual;
      } else if (sf.senses[i] == Sense::GreaterEqual) {
        sf.senses[i] = Sense::LessEqual;
      }
    }
  }
  return sf;
}

class Tableau {
 public:
  Tableau(const StandardForm& sf) : m_(static_cast<int>(sf.b.size())) {
    const int ny = sf.num_structural;
    int slacks = 0;
    int arts = 0;
    for (Sense s : sf.senses) {
      if (s != Sense::Equal) ++slacks;
      if (s != Sense::LessEqual) ++arts;
    }
    num_real_ = ny + slacks;
    cols_ = num_real_ + arts;
    t_ = RowMatrix::Zero(m_ + 1, cols_ + 1);
    t_.block(0, 0, m_, ny) = sf.a;
    cost_ = Vector::Zero(cols_);
    cost_.head(ny) = sf.c;
    real_cost_ = cost_.head(num_real_);
    full_ = Matrix::Zero(m_, num_real_);
    full_.leftCols(ny) = sf.a;
    basis_.assign(m_, -1);
    int slack = ny;
    int art = num_real_;
    for (int i = 0; i < m_; ++i) {
      t_(i, cols_) = sf.b(i);
      if (sf.senses[i] == Sense::LessEqual) {
        t_(i, slack) = 1.0;
        full_(i, slack) = 1.0;
        basis_[i] = slack++;
      } else {
        if (sf.senses[i] == Sense::GreaterEqual) {
          t_(i, slack) = -1.0;
          full_(i, slack) = -1.0;
          ++slack;
        }
        t_(i, art) = 1.0;
        basis_[i] = art++;
      }
    }
    b_ = sf.b;
  }

  // Returns false if the LP is infeasible.
  bool phase_one(int& iterations, int cap) {
    Vector c1 = Vector::Zero(cols_);
    c1.tail(cols_ - num_real_).setOnes();
    set_objective(c1);
    run(cols_, iterations, cap);
    const double infeasibility = -t_(m_, cols_);
    if (infeasibility > 1e-9 * (1.0 + b_.lpNorm<Eigen::Infinity>())) return false;
    for (int i = 0; i < m_; ++i) {
      if (basis_[i] < num_real_) continue;
      int best = -1;
      double best_abs = kPivotTol;
      for (int j = 0; j < num_real_; ++j) {
        if (std::abs(t_(i, j)) > best_abs) {
          best_abs = std::abs(t_(i, j));
          best = j;
        }
      }
      if (best >= 0) {
        pivot(i, best);
      } else {
        redundant_.push_back(i);
      }
    }
    return true;
  }

  // Returns false if unbounded.
  bool phase_two(int& iterations, int cap) {
    set_objective(cost_);
    return run(num_real_, iterations, cap);
  }

  int rows() const { return m_; }
  int real_columns() const { return num_real_; }
  const std::vector<int>& basis() const { return basis_; }
  bool is_redundant(int i) const {
    return std::find(redundant_.begin(), redundant_.end(), i) != redundant_.end();
  }
  double rhs(int i) const { return t_(i, cols_); }
  const Matrix& full() const { return full_; }
  const Vector& cost() const { return real_cost_; }
  const Vector& b() const { return b_; }

 private:
  void set_objective(const Vector& c) {
    t_.row(m_).setZero();
    t_.row(m_).head(cols_) = c.transpose();
    for (int i = 0; i < m_; ++i) {
      const double cb = c(basis_[i]);
      if (cb != 0.0) t_.row(m_) -= cb * t_.row(i);
    }
  }

  void pivot(int r, int q) {
    t_.row(r) /= t_(r, q);
    for (int i = 0; i <= m_; ++i) {
      if (i == r) continue;
      const double f = t_(i, q);
      if (f != 0.0) t_.row(i) -= f * t_.row(r);
    }
    t_(r, q) = 1.0;
    basis_[r] = q;
  }

  // Minimizes over columns [0, allowed). Returns false if unbounded.
  bool run(int allowed, int& iterations, int cap) {
    const double rc_tol = 1e-9 * std::max(1.0, t_.row(m_).head(allowed).cwiseAbs().maxCoeff());
    bool bland = false;
    int degenerate = 0;
    while (true) {
      int q = -1;
      if (bland) {
        for (int j = 0; j < allowed; ++j) {
          if (t_(m_, j) < -rc_tol) {
            q = j;
            break;
          }
        }
      } else {
        double most = -rc_tol;
        for (int j = 0; j < allowed; ++j) {
          if (t_(m_, j) < most) {
            most = t_(m_, j);
            q = j;
          }
        }
      }
      if (q < 0) return true;

      int r = -1;
      double best = 0.0;
      for (int i = 0; i < m_; ++i) {
        const double aiq = t_(i, q);
        if (aiq <= kPivotTol) continue;
        const double ratio = std::max(0.0, t_(i, cols_)) / aiq;
        if (r < 0 || ratio < best - kDegenerate * (1.0 + best)) {
          r = i;
          best = ratio;
        } else if (ratio <= best + kDegenerate * (1.0 + best)) {
          const bool take = bland ? basis_[i] < basis_[r] : aiq > t_(r, q);
          if (take) {
            r = i;
            best = std::min(best, ratio);
          }
        }
      }
      if (r < 0) return false;
      if (++iterations > cap)
        throw std::runtime_error("lp-oracle: simplex iteration guard tripped after " +
                                 std::to_string(cap) + " pivots");
      if (best <= kDegenerate) {
        if (++degenerate >= kDegenerateRun) bland = true;
      } else {
        degenerate = 0;
        bland = false;
      }
      pivot(r, q);
    }
  }

  int m_;
  int num_real_ = 0;
  int cols_ = 0;
  RowMatrix t_;
  Vector cost_;
  Vector real_cost_;
  Matrix full_;
  Vector b_;
  std::vector<int> basis_;
  std::vector<int> redundant_;
};

double primal_violation(const LinearProgram& lp, const Vector& x) {
  double worst = 0.0;
  for (int j = 0; j < lp.num_variables(); ++j) {
    worst = std::max(worst, lp.lower()(j) - x(j));
    worst = std::max(worst, x(j) - lp.upper()(j));
  }
  for (const auto& con : lp.constraints()) {
    const double lhs = con.coefficients.dot(x);
    switch (con.sense) {
      case Sense::LessEqual:
        worst = std::max(worst, lhs - con.rhs);
        break;
      case Sense::GreaterEqual:
        worst = std::max(worst, con.rhs - lhs);
        break;
      case Sense::Equal:
        worst = std::max(worst, std::abs(lhs - con.rhs));
        break;
    }
  }
  return worst;
}

}  // namespace

LpResult solve_lp(const LinearProgram& lp) {
  lp.validate();
  const StandardForm sf = to_standard(lp);
  Tableau tab(sf);
  LpResult result;
  const int cap = 20000 + 50 * (tab.rows() + tab.real_columns());
  if (!tab.phase_one(result.iterations, cap)) {
    result.status = LpStatus::Infeasible;
    return result;
  }
  if (!tab.phase_two(result.iterations, cap)) {
    result.status = LpStatus::Unbounded;
    return result;
  }

  // Refactor the final basis for clean primal and dual values.
  std::vector<int> rows;
  std::vector<int> cols;
  for (int i = 0; i < tab.rows(); ++i) {
    if (tab.is_redundant(i)) continue;
    rows.push_back(i);
    cols.push_back(tab.basis()[i]);
  }
  const int mb = static_cast<int>(rows.size());
  Vector y_std = Vector::Zero(tab.real_columns());
  Vector dual_rows = Vector::Zero(tab.rows());
  if (mb > 0) {
    Matrix basis(mb, mb);
    Vector b(mb);
    Vector cb(mb);
    for (int r = 0; r < mb; ++r) {
      b(r) = tab.b()(rows[r]);
      cb(r) = tab.cost()(cols[r]);
      for (int k = 0; k < mb; ++k) basis(r, k) = tab.full()(rows[r], cols[k]);
    }
    Eigen::PartialPivLU<Matrix> lu(basis);
    Vector xb = lu.solve(b);
    Vector y = lu.transpose().solve(cb);
    const bool clean = xb.allFinite() && y.allFinite() && (basis * xb - b).lpNorm<Eigen::Infinity>() <= 1e-9 * (1.0 + b.lpNorm<Eigen::Infinity>());
    for (int r = 0; r < mb; ++r) {
      const double v = clean ? xb(r) : tab.rhs(rows[r]);
      y_std(cols[r]) = std::max(0.0, v);
    }
    if (clean) {
      for (int r = 0; r < mb; ++r) dual_rows(rows[r]) = y(r);
    }
  }
  const Vector reduced = tab.cost() - tab.full().transpose() * dual_rows;
  result.dual_residual = std::max(0.0, -reduced.minCoeff());
  result.duality_gap = std::abs(tab.cost().dot(y_std) - tab.b().dot(dual_rows));

  const int n = lp.num_variables();
  result.primal = Vector(n);
  for (int j = 0; j < n; ++j) {
    const VariableMap& v = sf.vars[j];
    double x = v.offset + v.sign * y_std(v.col);
    if (v.col2 >= 0) x -= y_std(v.col2);
    result.primal(j) = x;
  }
  result.dual = Vector::Zero(lp.num_constraints());
  for (int i = 0; i < sf.num_original_rows; ++i) result.dual(i) = sf.flip[i] * dual_rows(i);
  result.value = lp.objective().dot(result.primal);
  result.primal_residual = primal_violation(lp, result.primal);
  result.status = LpStatus::Optimal;
  return result;
}

}  // namespace cmdp
