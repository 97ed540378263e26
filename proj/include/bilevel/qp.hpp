#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

#include "bilevel/lp.hpp"
#include "bilevel/types.hpp"

namespace bilevel {
namespace detail {

struct KktResidual {
  double stationarity = 0.0;
  double primal = 0.0;
  double dual = 0.0;            // negative part of lambda
  double complementarity = 0.0;

  double max() const {
    return std::max(std::max(stationarity, primal), std::max(dual, complementarity));
  }
};

inline KktResidual qp_kkt_residual(const Matrix& h, const Vector& f, const Polytope& set,
                                   const Vector& x, const Vector& lambda, const Vector& nu) {
  KktResidual r;
  Vector stat = h * x + f;
  if (set.num_eq() > 0) {
    stat += set.A_eq.transpose() * nu;
    r.primal = (set.A_eq * x - set.b_eq).cwiseAbs().maxCoeff();
  }
  if (set.num_inq() > 0) {
    stat += set.G_inq.transpose() * lambda;
    const Vector slack = set.h_inq - set.G_inq * x;
    r.primal = std::max(r.primal, (-slack).maxCoeff());
    r.dual = std::max(0.0, (-lambda).maxCoeff());
    r.complementarity = (lambda.array() * slack.array()).abs().maxCoeff();
  }
  r.stationarity = stat.size() > 0 ? stat.cwiseAbs().maxCoeff() : 0.0;
  return r;
}

// Recomputes (x, nu, lambda) from a guessed active set by solving the
// equality-constrained KKT system. Returns false when the polished point
// is not a valid KKT point.
inline bool qp_polish(const Matrix& h, const Vector& f, const Polytope& set,
                      const std::vector<Index>& active, QpSolution& sol) {
  const Index n = h.rows();
  const Index me = set.num_eq();
  const Index na = static_cast<Index>(active.size());
  Matrix k = Matrix::Zero(n + me + na, n + me + na);
  k.topLeftCorner(n, n) = h;
  Vector rhs(n + me + na);
  rhs.head(n) = -f;
  if (me > 0) {
    k.block(n, 0, me, n) = set.A_eq;
    k.block(0, n, n, me) = set.A_eq.transpose();
    rhs.segment(n, me) = set.b_eq;
  }
  for (Index a = 0; a < na; ++a) {
    k.block(n + me + a, 0, 1, n) = set.G_inq.row(active[a]);
    k.block(0, n + me + a, n, 1) = set.G_inq.row(active[a]).transpose();
    rhs(n + me + a) = set.h_inq(active[a]);
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(k);
  const Vector z = qr.solve(rhs);
  if (!z.allFinite()) return false;

  Vector x = z.head(n);
  Vector nu = z.segment(n, me);
  Vector lambda = Vector::Zero(set.num_inq());
  for (Index a = 0; a < na; ++a) lambda(active[a]) = z(n + me + a);
  if (set.num_inq() > 0 && lambda.minCoeff() < -1e-9) return false;
  lambda = lambda.cwiseMax(0.0);

  const KktResidual res = qp_kkt_residual(h, f, set, x, lambda, nu);
  const KktResidual old = qp_kkt_residual(h, f, set, sol.x, sol.lambda, sol.nu);
  if (res.max() > std::max(old.max(), 1e-12)) return false;
  sol.x = std::move(x);
  sol.nu = std::move(nu);
  sol.lambda = std::move(lambda);
  return true;
}

}  // namespace detail

/// Minimizes 1/2 x^T H x + f^T x over a polytope.
///
/// H must be symmetric positive definite (semidefinite callers add their
/// own regularization). Primal-dual interior point with a Mehrotra
/// corrector, followed by an active-set polish so the returned
/// multipliers are exactly complementary. KKT residuals of an Optimal
/// solution are <= 1e-10 in the infinity norm.
inline QpSolution solve_qp(const Matrix& h, const Vector& f, const Polytope& set,
                           int max_iter = 100) {
  const Index n = h.rows();
  if (h.cols() != n || f.size() != n || set.dim() != n)
    throw DimensionError("solve_qp: dimension mismatch");
  const Index me = set.num_eq();
  const Index mi = set.num_inq();

  QpSolution sol;
  sol.lambda = Vector::Zero(mi);
  sol.nu = Vector::Zero(me);

  const double scale = std::max({1.0, f.size() ? f.cwiseAbs().maxCoeff() : 0.0,
                                 h.cwiseAbs().maxCoeff()});
  const double reg = 1e-12 * scale;

  // Equality-constrained (or unconstrained) case: a single KKT solve.
  if (mi == 0) {
    Matrix k = Matrix::Zero(n + me, n + me);
    k.topLeftCorner(n, n) = h;
    Vector rhs(n + me);
    rhs.head(n) = -f;
    if (me > 0) {
      k.block(n, 0, me, n) = set.A_eq;
      k.block(0, n, n, me) = set.A_eq.transpose();
      rhs.tail(me) = set.b_eq;
    }
    Eigen::PartialPivLU<Matrix> lu(k);
    const Vector z = lu.solve(rhs);
    if (!z.allFinite() || (k * z - rhs).cwiseAbs().maxCoeff() > 1e-8 * scale) {
      sol.status = polytope_nonempty(set) ? QpStatus::MaxIter : QpStatus::Infeasible;
      return sol;
    }
    sol.x = z.head(n);
    sol.nu = z.tail(me);
    sol.status = QpStatus::Optimal;
    sol.objective = 0.5 * sol.x.dot(h * sol.x) + f.dot(sol.x);
    sol.iterations = 1;
    return sol;
  }

  // Interior-point start: equality-regularized KKT solve for x, unit
  // slacks/multipliers shifted to be safely positive.
  Vector x(n), nu = Vector::Zero(me);
  {
    Matrix k = Matrix::Zero(n + me, n + me);
    k.topLeftCorner(n, n) = h + 1e-8 * scale * Matrix::Identity(n, n);
    Vector rhs(n + me);
    rhs.head(n) = -f;
    if (me > 0) {
      k.block(n, 0, me, n) = set.A_eq;
      k.block(0, n, n, me) = set.A_eq.transpose();
      k.block(n, n, me, me) = -1e-8 * Matrix::Identity(me, me);
      rhs.tail(me) = set.b_eq;
    }
    const Vector z = k.partialPivLu().solve(rhs);
    x = z.allFinite() ? z.head(n).eval() : Vector::Zero(n);
    if (me > 0 && z.allFinite()) nu = z.tail(me);
  }
  Vector s = (set.h_inq - set.G_inq * x).cwiseMax(1.0);
  Vector lambda = Vector::Ones(mi);

  const double tol = 1e-11 * scale;
  const double rhs_scale =
      std::max({1.0, me ? set.b_eq.cwiseAbs().maxCoeff() : 0.0, set.h_inq.cwiseAbs().maxCoeff()});

  Vector best_x = x, best_nu = nu, best_lambda = lambda;
  double best_res = std::numeric_limits<double>::infinity();

  for (int it = 0; it < max_iter; ++it) {
    const Vector r_d = h * x + f + set.G_inq.transpose() * lambda +
                       (me > 0 ? (set.A_eq.transpose() * nu).eval() : Vector::Zero(n).eval());
    const Vector r_p = me > 0 ? (set.A_eq * x - set.b_eq).eval() : Vector(0);
    const Vector r_g = set.G_inq * x + s - set.h_inq;
    const double mu = lambda.dot(s) / static_cast<double>(mi);

    const double prim = std::max(me ? r_p.cwiseAbs().maxCoeff() : 0.0, r_g.cwiseAbs().maxCoeff());
    const double combined = r_d.cwiseAbs().maxCoeff() + prim + mu;
    if (std::isfinite(combined) && combined < best_res) {
      best_res = combined;
      best_x = x;
      best_nu = nu;
      best_lambda = lambda;
    }
    if (r_d.cwiseAbs().maxCoeff() <= tol && prim <= 1e-11 * rhs_scale && mu <= 1e-12 * scale) {
      sol.iterations = it;
      sol.status = QpStatus::Optimal;
      break;
    }

    // Reduced KKT matrix, shared by predictor and corrector.
    const Vector w = lambda.cwiseQuotient(s);
    Matrix k = Matrix::Zero(n + me, n + me);
    k.topLeftCorner(n, n) =
        h + set.G_inq.transpose() * w.asDiagonal() * set.G_inq +
        reg * Matrix::Identity(n, n);
    if (me > 0) {
      k.block(n, 0, me, n) = set.A_eq;
      k.block(0, n, n, me) = set.A_eq.transpose();
      k.block(n, n, me, me) = -reg * Matrix::Identity(me, me);
    }
    Eigen::PartialPivLU<Matrix> lu(k);

    auto solve_direction = [&](const Vector& r_c, Vector& dx, Vector& dnu, Vector& ds,
                               Vector& dl) {
      Vector rhs(n + me);
      rhs.head(n) = -r_d + set.G_inq.transpose() *
                               (r_c - lambda.cwiseProduct(r_g)).cwiseQuotient(s);
      if (me > 0) rhs.tail(me) = -r_p;
      const Vector z = lu.solve(rhs);
      dx = z.head(n);
      dnu = me > 0 ? z.tail(me).eval() : Vector(0);
      ds = -r_g - set.G_inq * dx;
      dl = (-r_c - lambda.cwiseProduct(ds)).cwiseQuotient(s);
    };

    auto max_step = [](const Vector& v, const Vector& dv) {
      double a = 1.0;
      for (Index i = 0; i < v.size(); ++i)
        if (dv(i) < 0.0) a = std::min(a, -v(i) / dv(i));
      return a;
    };

    // Predictor.
    Vector dx, dnu, ds, dl;
    solve_direction(lambda.cwiseProduct(s), dx, dnu, ds, dl);
    const double a_p = max_step(s, ds);
    const double a_d = max_step(lambda, dl);
    const double mu_aff = (lambda + a_d * dl).dot(s + a_p * ds) / static_cast<double>(mi);
    const double sigma = std::pow(std::max(mu_aff, 0.0) / std::max(mu, 1e-300), 3.0);

    // Corrector. The 0.995 fraction-to-boundary keeps s and lambda
    // strictly positive.
    const Vector r_c = lambda.cwiseProduct(s).array() + dl.array() * ds.array() -
                       sigma * mu;
    solve_direction(r_c, dx, dnu, ds, dl);
    const double alpha = std::min({1.0, 0.995 * max_step(s, ds), 0.995 * max_step(lambda, dl)});

    x += alpha * dx;
    if (me > 0) nu += alpha * dnu;
    s += alpha * ds;
    lambda += alpha * dl;
    sol.iterations = it + 1;
    if (!x.allFinite() || !s.allFinite() || !lambda.allFinite()) break;
  }

  if (sol.status != QpStatus::Optimal || !x.allFinite()) {
    x = best_x;
    nu = best_nu;
    lambda = best_lambda;
    s = (set.h_inq - set.G_inq * x).cwiseMax(1e-300);
  }
  sol.x = x;
  sol.nu = nu;
  sol.lambda = lambda.cwiseMax(0.0);

  if (sol.status != QpStatus::Optimal) {
    // Classify: exact feasibility check decides Infeasible vs MaxIter.
    sol.status = polytope_nonempty(set) ? QpStatus::MaxIter : QpStatus::Infeasible;
    if (sol.status == QpStatus::Infeasible) return sol;
  }

  // Active-set polish for exactly complementary multipliers.
  std::vector<Index> active;
  for (Index i = 0; i < mi; ++i)
    if (lambda(i) > s(i)) active.push_back(i);
  detail::qp_polish(h, f, set, active, sol);

  if (sol.status == QpStatus::MaxIter &&
      detail::qp_kkt_residual(h, f, set, sol.x, sol.lambda, sol.nu).max() <= 1e-10 * scale)
    sol.status = QpStatus::Optimal;

  sol.objective = 0.5 * sol.x.dot(h * sol.x) + f.dot(sol.x);
  return sol;
}

/// Euclidean projection onto a polytope; identity on feasible points.
inline Vector project_polytope(const Vector& v, const Polytope& set) {
  if (set.dim() != v.size()) throw DimensionError("project_polytope: dimension mismatch");
  if (set.contains(v, 1e-12)) return v;
  const QpSolution sol =
      solve_qp(Matrix::Identity(v.size(), v.size()), -v, set);
  if (sol.status == QpStatus::Infeasible)
    throw InfeasibleError("project_polytope: empty polytope");
  if (sol.status != QpStatus::Optimal && sol.status != QpStatus::MaxIter)
    throw Error("project_polytope: projection QP failed");
  return sol.x;
}

}  // namespace bilevel
