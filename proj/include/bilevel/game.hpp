#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "bilevel/linalg.hpp"
#include "bilevel/lp.hpp"
#include "bilevel/types.hpp"

namespace bilevel {

/// Leader-coupled linear constraint terms: rows become
///   A x_i + a_pi pi = b   and   G x_i + g_pi pi <= h.
struct PiCoupling {
  Matrix a_pi;  // matching.num_eq() x m_L
  Matrix g_pi;  // matching.num_inq() x m_L
};

/// Discount budget (pi_base - pi)^T applied through S:
///   (S (pi_base - pi))^T x_i <= limit.
/// Bilinear in (x_i, pi), so it is evaluated as a smooth constraint row
/// with its own x- and pi-derivatives.
struct Budget {
  double limit = 0.0;
  Vector pi_base;
  bool finite() const { return std::isfinite(limit); }
};

struct FollowerSpec {
  Matrix p;            // m_F x m_F, own quadratic term (SPD)
  Matrix q;            // m_F x m_F, coupling with the aggregate
  Vector r;            // m_F
  Matrix s;            // m_F x m_L; cost term x^T S pi
  Polytope matching;   // pi-independent rows over x_i
  std::optional<PiCoupling> pi_coupling;
  std::optional<Budget> budget;

  Index dim() const { return p.rows(); }
  Index num_eq() const { return matching.num_eq(); }
  Index num_inq() const { return matching.num_inq() + (has_finite_budget() ? 1 : 0); }
  bool has_finite_budget() const { return budget && budget->finite(); }
};

/// Case-study objective 1/2 || sigma(x) - 1^T n Z ||^2.
struct TargetMode {
  Vector fleet_sizes;   // n, one entry per follower
  Vector distribution;  // Z, nonnegative, sums to 1

  Vector target() const { return fleet_sizes.sum() * distribution; }
};

struct LeaderSpec {
  Matrix p_l;         // used when target_mode is absent
  Vector q_l;
  Polytope polytope;  // feasible prices
  std::optional<TargetMode> target_mode;

  Matrix effective_p_l(Index m_f) const {
    return target_mode ? Matrix::Identity(m_f, m_f) : p_l;
  }
  Vector effective_q_l(Index m_f) const {
    return target_mode ? Vector(-target_mode->target()) : q_l;
  }
};

struct ParametrizedGame {
  LeaderSpec leader;
  std::vector<FollowerSpec> followers;
  Index m_f = 0;
  Index m_l = 0;

  Index num_followers() const { return static_cast<Index>(followers.size()); }

  Eigen::VectorBlock<const Vector> block(const Vector& x, Index i) const {
    return x.segment(i * m_f, m_f);
  }

  Vector sigma(const Vector& x) const {
    Vector s = Vector::Zero(m_f);
    for (Index i = 0; i < num_followers(); ++i) s += block(x, i);
    return s;
  }
};

/// Primal-dual triplet z_i = (x_i, lambda_i, nu_i) of one follower.
struct KktPoint {
  Vector x;
  Vector lambda;  // inequality duals, >= 0
  Vector nu;      // equality duals
};

/// All constraint rows of one follower evaluated at (x_i, pi), with
/// derivatives in both arguments. Inequality ordering: matching rows
/// first, the budget row (when finite) last.
struct ConstraintEval {
  Vector eq_value;
  Matrix eq_dx;
  Matrix eq_dpi;
  Vector inq_value;
  Matrix inq_dx;
  Matrix inq_dpi;
};

inline ConstraintEval eval_constraints(const FollowerSpec& spec, const Vector& x_i,
                                       const Vector& pi) {
  if (x_i.size() != spec.dim()) throw DimensionError("eval_constraints: x_i size");
  const Index m_l = pi.size();
  const Index me = spec.num_eq();
  const Index mg = spec.matching.num_inq();
  const Index mi = spec.num_inq();

  ConstraintEval out;
  out.eq_dx = spec.matching.A_eq;
  out.eq_dpi = spec.pi_coupling ? spec.pi_coupling->a_pi : Matrix::Zero(me, m_l);
  out.eq_value = spec.matching.A_eq * x_i + out.eq_dpi * pi - spec.matching.b_eq;

  out.inq_dx.resize(mi, spec.dim());
  out.inq_dpi.resize(mi, m_l);
  out.inq_value.resize(mi);
  out.inq_dx.topRows(mg) = spec.matching.G_inq;
  out.inq_dpi.topRows(mg) =
      spec.pi_coupling ? spec.pi_coupling->g_pi : Matrix::Zero(mg, m_l);
  out.inq_value.head(mg) =
      spec.matching.G_inq * x_i + out.inq_dpi.topRows(mg) * pi - spec.matching.h_inq;
  if (spec.has_finite_budget()) {
    const Vector price_gap = spec.s * (spec.budget->pi_base - pi);  // in follower space
    out.inq_dx.row(mg) = price_gap.transpose();
    out.inq_dpi.row(mg) = -(x_i.transpose() * spec.s);
    out.inq_value(mg) = price_gap.dot(x_i) - spec.budget->limit;
  }
  return out;
}

/// Feasible set of one follower at a fixed leader strategy; the budget
/// row is an ordinary linear row once pi is frozen.
inline Polytope feasible_set(const FollowerSpec& spec, const Vector& pi) {
  const Index mg = spec.matching.num_inq();
  const Index mi = spec.num_inq();
  Vector b = spec.matching.b_eq;
  Vector h(mi);
  h.head(mg) = spec.matching.h_inq;
  if (spec.pi_coupling) {
    b -= spec.pi_coupling->a_pi * pi;
    h.head(mg) -= spec.pi_coupling->g_pi * pi;
  }
  Matrix g(mi, spec.dim());
  g.topRows(mg) = spec.matching.G_inq;
  if (spec.has_finite_budget()) {
    g.row(mg) = (spec.s * (spec.budget->pi_base - pi)).transpose();
    h(mg) = spec.budget->limit;
  }
  return Polytope(spec.matching.A_eq, std::move(b), std::move(g), std::move(h));
}

inline double follower_cost(const FollowerSpec& spec, const Vector& x_i,
                            const Vector& sigma_minus, const Vector& pi) {
  if (x_i.size() != spec.dim() || sigma_minus.size() != spec.dim() ||
      pi.size() != spec.s.cols())
    throw DimensionError("follower_cost: dimension mismatch");
  return 0.5 * x_i.dot(spec.p * x_i) + x_i.dot(spec.q * sigma_minus) + spec.r.dot(x_i) +
         x_i.dot(spec.s * pi);
}

/// grad_{x_i} J_i = P x_i + Q sigma_{-i} + r + S pi.
inline Vector follower_cost_gradient(const FollowerSpec& spec, const Vector& x_i,
                                     const Vector& sigma_minus, const Vector& pi) {
  if (x_i.size() != spec.dim() || sigma_minus.size() != spec.dim() ||
      pi.size() != spec.s.cols())
    throw DimensionError("follower_cost_gradient: dimension mismatch");
  return spec.p * x_i + spec.q * sigma_minus + spec.r + spec.s * pi;
}

inline Vector pseudo_gradient(const ParametrizedGame& game, const Vector& x,
                              const Vector& pi) {
  if (x.size() != game.num_followers() * game.m_f || pi.size() != game.m_l)
    throw DimensionError("pseudo_gradient: dimension mismatch");
  const Vector sig = game.sigma(x);
  Vector out(x.size());
  for (Index i = 0; i < game.num_followers(); ++i) {
    const Vector x_i = game.block(x, i);
    out.segment(i * game.m_f, game.m_f) =
        follower_cost_gradient(game.followers[i], x_i, sig - x_i, pi);
  }
  return out;
}

inline double leader_cost(const ParametrizedGame& game, const Vector& x, const Vector& pi) {
  if (x.size() != game.num_followers() * game.m_f || pi.size() != game.m_l)
    throw DimensionError("leader_cost: dimension mismatch");
  const Vector sig = game.sigma(x);
  if (game.leader.target_mode)
    return 0.5 * (sig - game.leader.target_mode->target()).squaredNorm();
  return 0.5 * sig.dot(game.leader.p_l * sig) + game.leader.q_l.dot(sig);
}

/// d J_L / d x_i, identical for every follower in the aggregative forms.
inline Vector leader_cost_gradient_x(const ParametrizedGame& game, const Vector& x) {
  const Vector sig = game.sigma(x);
  if (game.leader.target_mode) return sig - game.leader.target_mode->target();
  return 0.5 * (game.leader.p_l + game.leader.p_l.transpose()) * sig + game.leader.q_l;
}

/// Both shipped objectives have no direct pi term.
inline Vector leader_cost_gradient_pi(const ParametrizedGame& game, const Vector&,
                                      const Vector&) {
  return Vector::Zero(game.m_l);
}

/// KKT operator l_i(z_i, pi | x_-i): [grad_x Lagrangian;
/// Dg(lambda) g_inq; g_eq].
inline Vector kkt_operator(const FollowerSpec& spec, const KktPoint& z, const Vector& pi,
                           const Vector& sigma_minus) {
  if (z.lambda.size() != spec.num_inq() || z.nu.size() != spec.num_eq())
    throw DimensionError("kkt_operator: dual dimensions");
  const ConstraintEval c = eval_constraints(spec, z.x, pi);
  Vector grad_lag = follower_cost_gradient(spec, z.x, sigma_minus, pi);
  if (spec.num_inq() > 0) grad_lag += c.inq_dx.transpose() * z.lambda;
  if (spec.num_eq() > 0) grad_lag += c.eq_dx.transpose() * z.nu;
  Vector out(spec.dim() + spec.num_inq() + spec.num_eq());
  out << grad_lag, z.lambda.cwiseProduct(c.inq_value), c.eq_value;
  return out;
}

/// Stacked linear operator of the quadratic aggregative pseudo-gradient:
/// diagonal blocks P_i, off-diagonal blocks Q_i.
inline Matrix stacked_operator(const ParametrizedGame& game) {
  const Index n = game.num_followers();
  Matrix m(n * game.m_f, n * game.m_f);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      m.block(i * game.m_f, j * game.m_f, game.m_f, game.m_f) =
          (i == j) ? game.followers[i].p : game.followers[i].q;
  return m;
}

class NotStronglyMonotoneError : public ValidationError {
 public:
  explicit NotStronglyMonotoneError(double mu)
      : ValidationError("pseudo-gradient is not strongly monotone (mu = " +
                        std::to_string(mu) + "), Standing Assumption 3 fails"),
        mu(mu) {}
  double mu;
};

/// Smallest eigenvalue of the symmetric part of the stacked operator;
/// throws when it is not positive.
inline double validate_strong_monotonicity(const ParametrizedGame& game) {
  const double mu = smallest_symmetric_eigenvalue(stacked_operator(game));
  if (!(mu > 0.0)) throw NotStronglyMonotoneError(mu);
  return mu;
}

/// Structural validation: dimensions, symmetry/PD of the quadratic
/// terms, and the target-mode distribution. Errors name the violated
/// assumption.
inline void validate_game(const ParametrizedGame& game) {
  if (game.num_followers() == 0) throw ValidationError("game has no followers");
  if (game.leader.polytope.dim() != game.m_l)
    throw ValidationError("leader polytope dimension != m_L");
  if (game.leader.target_mode) {
    const auto& tm = *game.leader.target_mode;
    if (tm.fleet_sizes.size() != game.num_followers())
      throw ValidationError("target_mode: fleet size count != follower count");
    if (tm.distribution.size() != game.m_f)
      throw ValidationError("target_mode: distribution dimension != m_F");
    if (tm.distribution.minCoeff() < -1e-12 ||
        std::abs(tm.distribution.sum() - 1.0) > 1e-9)
      throw ValidationError("target_mode: Z must be nonnegative with unit 1-norm");
  } else {
    if (game.leader.p_l.rows() != game.m_f || game.leader.p_l.cols() != game.m_f)
      throw ValidationError("P_L dimension != m_F");
    if ((game.leader.p_l - game.leader.p_l.transpose()).cwiseAbs().maxCoeff() > 1e-9)
      throw ValidationError("P_L is not symmetric");
    if (!is_positive_definite(game.leader.p_l))
      throw ValidationError("P_L is not positive definite");
    if (game.leader.q_l.size() != game.m_f) throw ValidationError("q_L dimension != m_F");
  }
  for (Index i = 0; i < game.num_followers(); ++i) {
    const auto& fs = game.followers[i];
    const std::string who = "follower " + std::to_string(i);
    if (fs.dim() != game.m_f) throw ValidationError(who + ": P dimension != m_F");
    if (fs.p.cols() != game.m_f || fs.q.rows() != game.m_f || fs.q.cols() != game.m_f ||
        fs.r.size() != game.m_f || fs.s.rows() != game.m_f || fs.s.cols() != game.m_l)
      throw ValidationError(who + ": matrix dimensions inconsistent");
    if ((fs.p - fs.p.transpose()).cwiseAbs().maxCoeff() > 1e-9)
      throw ValidationError(who + ": P is not symmetric (Standing Assumption 1 context)");
    if (!is_positive_definite(fs.p))
      throw ValidationError(who + ": P is not positive definite (Standing Assumption 1 context)");
    if (fs.matching.dim() != game.m_f) throw ValidationError(who + ": polytope dimension");
    if (fs.pi_coupling) {
      if (fs.pi_coupling->a_pi.rows() != fs.matching.num_eq() ||
          fs.pi_coupling->a_pi.cols() != game.m_l ||
          fs.pi_coupling->g_pi.rows() != fs.matching.num_inq() ||
          fs.pi_coupling->g_pi.cols() != game.m_l)
        throw ValidationError(who + ": pi coupling dimensions");
      if (fs.budget)
        throw ValidationError(who + ": pi coupling and budget rows cannot be mixed");
    }
    if (fs.budget && fs.budget->pi_base.size() != game.m_l)
      throw ValidationError(who + ": budget pi_base dimension != m_L");
  }
}

/// Operational Slater check at a sample leader strategy: every follower's
/// feasible set needs a strictly feasible point.
inline void validate_slater(const ParametrizedGame& game, const Vector& pi) {
  for (Index i = 0; i < game.num_followers(); ++i) {
    const double margin = strict_feasibility_margin(feasible_set(game.followers[i], pi));
    if (!(margin > 0.0))
      throw ValidationError("follower " + std::to_string(i) +
                            ": no strictly feasible point at the sample pi; Standing "
                            "Assumption 1 (Slater) fails");
  }
}

/// The follower's own-price block of S. Covers both layouts: a shared
/// price vector (m_L == m_F) and per-follower price blocks
/// (m_L == N m_F).
inline Matrix own_price_block(const ParametrizedGame& game, Index i) {
  const auto& s = game.followers[i].s;
  if (game.m_l == game.m_f) return s;
  if (game.m_l == game.num_followers() * game.m_f)
    return s.middleCols(i * game.m_f, game.m_f);
  throw DimensionError("own_price_block: m_L must be m_F or N*m_F");
}

/// Feedback pricing map pi_i(x) = S_i^-1 [ 1/2 (P_L - P_i) x_i
///   + (P_L - Q_i) sigma_{-i} + (q_L - r_i) ].
inline Vector rsg_policy(const ParametrizedGame& game, Index i, const Vector& x) {
  const auto& fs = game.followers[i];
  const Matrix p_l = game.leader.effective_p_l(game.m_f);
  const Vector q_l = game.leader.effective_q_l(game.m_f);
  const Vector x_i = game.block(x, i);
  const Vector sigma_minus = game.sigma(x) - x_i;
  const Vector rhs = 0.5 * (p_l - fs.p) * x_i + (p_l - fs.q) * sigma_minus + (q_l - fs.r);
  const CheckedLu lu(own_price_block(game, i), "SingularS");
  return lu.solve(rhs);
}

/// Proposition-1 residual || 1/2 (P_L - P_i) x_i ||_inf per follower;
/// zero exactly when freezing the feedback prices reproduces the same
/// equilibrium in the fixed-price game.
inline Vector prop1_residual(const ParametrizedGame& game, const Vector& x_r) {
  const Matrix p_l = game.leader.effective_p_l(game.m_f);
  Vector out(game.num_followers());
  for (Index i = 0; i < game.num_followers(); ++i) {
    const Vector d = 0.5 * (p_l - game.followers[i].p) * game.block(x_r, i);
    out(i) = d.size() > 0 ? d.cwiseAbs().maxCoeff() : 0.0;
  }
  return out;
}

}  // namespace bilevel
