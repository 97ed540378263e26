#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "bilevel/types.hpp"

namespace bilevel {
namespace detail {

// Dense two-phase primal simplex on min c^T z, W z = d, z >= 0.
// Starts from an all-artificial basis; artificial columns double as B^-1
// so row duals can be read off the final reduced-cost row. Dantzig
// pricing with a permanent switch to Bland's rule after a degeneracy
// stall.
class SimplexTableau {
 public:
  SimplexTableau(const Matrix& w, const Vector& d, const Vector& c)
      : m_(w.rows()), n_(w.cols()) {
    tab_.resize(m_ + 1, n_ + m_ + 1);
    tab_.setZero();
    tab_.block(0, 0, m_, n_) = w;
    tab_.block(0, n_, m_, m_) = Matrix::Identity(m_, m_);
    tab_.block(0, n_ + m_, m_, 1) = d;
    for (Index r = 0; r < m_; ++r) {
      if (tab_(r, n_ + m_) < 0.0) tab_.row(r) = -tab_.row(r);
      row_flipped_.push_back(tab_(r, n_ + m_) != d(r));
    }
    basis_.resize(m_);
    for (Index r = 0; r < m_; ++r) basis_[r] = n_ + r;
    cost_ = c;
  }

  // Returns Optimal / Infeasible / Unbounded / MaxIter.
  QpStatus run() {
    // Phase 1: minimize the sum of artificials.
    Vector phase1_cost = Vector::Zero(n_ + m_);
    phase1_cost.tail(m_).setOnes();
    set_objective_row(phase1_cost);
    QpStatus st = iterate(phase1_cost, /*allow_artificial=*/true);
    if (st != QpStatus::Optimal) return st == QpStatus::Unbounded ? QpStatus::Infeasible : st;
    if (objective_value() > 1e-7 * std::max(1.0, rhs_scale())) return QpStatus::Infeasible;

    // Phase 2 on the real objective; artificials may stay basic at zero
    // but are barred from entering.
    Vector phase2_cost = Vector::Zero(n_ + m_);
    phase2_cost.head(n_) = cost_;
    set_objective_row(phase2_cost);
    return iterate(phase2_cost, /*allow_artificial=*/false);
  }

  const std::vector<Index>& basis() const { return basis_; }

  Vector primal() const {
    Vector z = Vector::Zero(n_);
    for (Index r = 0; r < m_; ++r)
      if (basis_[r] < n_) z(basis_[r]) = tab_(r, n_ + m_);
    return z;
  }

  // Row duals y with y_r = -reduced_cost(artificial_r), mapped back to the
  // original row orientation.
  Vector row_duals() const {
    Vector y(m_);
    for (Index r = 0; r < m_; ++r) {
      double v = -tab_(m_, n_ + r);
      y(r) = row_flipped_[r] ? -v : v;
    }
    return y;
  }

  double objective_value() const { return -tab_(m_, n_ + m_); }
  int iterations() const { return iters_; }

 private:
  double rhs_scale() const { return tab_.col(n_ + m_).head(m_).cwiseAbs().maxCoeff(); }

  void set_objective_row(const Vector& c) {
    tab_.row(m_).setZero();
    tab_.row(m_).head(n_ + m_) = c.transpose();
    for (Index r = 0; r < m_; ++r)
      tab_.row(m_) -= c(basis_[r]) * tab_.row(r);
  }

  QpStatus iterate(const Vector& c, bool allow_artificial) {
    const double tol = 1e-9;
    const Index max_iter = 200 * (m_ + n_) + 200;
    int stall = 0;
    bool bland = false;
    while (true) {
      if (++iters_ > max_iter) return QpStatus::MaxIter;
      const Index limit = allow_artificial ? n_ + m_ : n_;
      Index enter = -1;
      double best = -tol;
      for (Index j = 0; j < limit; ++j) {
        const double rc = tab_(m_, j);
        if (rc < (bland ? -tol : best)) {
          enter = j;
          if (bland) break;  // first eligible index
          best = rc;
        }
      }
      if (enter < 0) return QpStatus::Optimal;

      Index leave = -1;
      double min_ratio = std::numeric_limits<double>::infinity();
      for (Index r = 0; r < m_; ++r) {
        const double a = tab_(r, enter);
        if (a > tol) {
          const double ratio = tab_(r, n_ + m_) / a;
          if (ratio < min_ratio - tol ||
              (ratio < min_ratio + tol && (leave < 0 || basis_[r] < basis_[leave]))) {
            min_ratio = ratio;
            leave = r;
          }
        }
      }
      if (leave < 0) return QpStatus::Unbounded;
      if (min_ratio < tol) {
        if (++stall > 50) bland = true;
      } else {
        stall = 0;
      }
      pivot(leave, enter);
    }
  }

  void pivot(Index r, Index j) {
    tab_.row(r) /= tab_(r, j);
    for (Index i = 0; i <= m_; ++i) {
      if (i == r) continue;
      const double f = tab_(i, j);
      if (f != 0.0) tab_.row(i) -= f * tab_.row(r);
    }
    basis_[r] = j;
  }

  Index m_, n_;
  Matrix tab_;
  Vector cost_;
  std::vector<Index> basis_;
  std::vector<bool> row_flipped_;
  int iters_ = 0;
};

}  // namespace detail

/// Minimizes c^T x over a polytope with a two-phase simplex.
///
/// Free variables are split as x = u - v and inequality rows receive
/// slacks. Reported multipliers satisfy c + A_eq^T nu + G_inq^T lambda = 0
/// with lambda >= 0. Status is Infeasible for an empty polytope and
/// Unbounded when the objective has no lower bound.
inline QpSolution solve_lp(const Vector& c, const Polytope& set) {
  const Index n = set.dim();
  const Index me = set.num_eq();
  const Index mi = set.num_inq();
  if (c.size() != n) throw DimensionError("solve_lp: objective length mismatch");

  QpSolution sol;
  if (me == 0 && mi == 0) {
    // Unconstrained LP: bounded only for c = 0.
    sol.x = Vector::Zero(n);
    sol.lambda = Vector(0);
    sol.nu = Vector(0);
    sol.status = (n == 0 || c.cwiseAbs().maxCoeff() == 0.0) ? QpStatus::Optimal
                                                            : QpStatus::Unbounded;
    return sol;
  }

  // Standard form: columns [u, v, w], rows [eq; inq].
  const Index ncols = 2 * n + mi;
  Matrix w(me + mi, ncols);
  w.setZero();
  if (me > 0) {
    w.block(0, 0, me, n) = set.A_eq;
    w.block(0, n, me, n) = -set.A_eq;
  }
  if (mi > 0) {
    w.block(me, 0, mi, n) = set.G_inq;
    w.block(me, n, mi, n) = -set.G_inq;
    w.block(me, 2 * n, mi, mi) = Matrix::Identity(mi, mi);
  }
  Vector d(me + mi);
  d << set.b_eq, set.h_inq;
  Vector cost = Vector::Zero(ncols);
  cost.head(n) = c;
  cost.segment(n, n) = -c;

  detail::SimplexTableau tab(w, d, cost);
  sol.status = tab.run();
  sol.iterations = tab.iterations();
  if (sol.status == QpStatus::Infeasible || sol.status == QpStatus::MaxIter) return sol;

  // Refactorize on the final basis for crisp primal/dual values.
  const auto& basis = tab.basis();
  const Index m = me + mi;
  Matrix b_cols = Matrix::Zero(m, m);
  Vector cb = Vector::Zero(m);
  for (Index r = 0; r < m; ++r) {
    const Index j = basis[r];
    if (j < ncols) {
      b_cols.col(r) = w.col(j);
      cb(r) = cost(j);
    } else {
      b_cols(j - ncols, r) = 1.0;  // leftover artificial (redundant row)
    }
  }
  Eigen::PartialPivLU<Matrix> blu(b_cols);
  const Vector zb = blu.solve(d);
  const Vector y = blu.transpose().solve(cb);

  Vector z = Vector::Zero(ncols);
  for (Index r = 0; r < m; ++r)
    if (basis[r] < ncols) z(basis[r]) = zb(r);

  sol.x = z.head(n) - z.segment(n, n);
  sol.nu = -y.head(me);
  sol.lambda = (-y.tail(mi)).cwiseMax(0.0);
  sol.objective = c.dot(sol.x);
  return sol;
}

/// Largest t with { A_eq x = b_eq, G_inq x + t <= h_inq } nonempty;
/// positive iff the polytope has a strictly feasible point (Slater).
/// The slack variable is capped so the program stays bounded.
inline double strict_feasibility_margin(const Polytope& set, double cap = 1e6) {
  const Index n = set.dim();
  const Index mi = set.num_inq();
  Matrix g(mi + 1, n + 1);
  g.setZero();
  g.block(0, 0, mi, n) = set.G_inq;
  g.block(0, n, mi, 1).setOnes();
  g(mi, n) = 1.0;  // t <= cap
  Vector h(mi + 1);
  h << set.h_inq, cap;
  Matrix a(set.num_eq(), n + 1);
  a.setZero();
  a.block(0, 0, set.num_eq(), n) = set.A_eq;
  Vector c = Vector::Zero(n + 1);
  c(n) = -1.0;
  const QpSolution sol = solve_lp(c, Polytope(a, set.b_eq, g, h));
  if (sol.status == QpStatus::Infeasible) return -std::numeric_limits<double>::infinity();
  if (sol.status != QpStatus::Optimal)
    throw Error("strict_feasibility_margin: LP did not solve");
  return sol.x(n);
}

inline bool polytope_nonempty(const Polytope& set) {
  if (set.unconstrained()) return true;
  const QpSolution sol = solve_lp(Vector::Zero(set.dim()), set);
  return sol.status == QpStatus::Optimal;
}

}  // namespace bilevel
