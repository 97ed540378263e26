#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace bilevel {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Base class for all recoverable solver/model errors.
class Error : public std::runtime_error {
 public:
  explicit Error(std::string msg) : std::runtime_error(std::move(msg)) {}
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A factorization pivot fell below the singularity threshold.
class SingularMatrixError : public Error {
 public:
  using Error::Error;
};

class InfeasibleError : public Error {
 public:
  using Error::Error;
};

class UnboundedError : public Error {
 public:
  using Error::Error;
};

class NotConvergedError : public Error {
 public:
  NotConvergedError(std::string msg, double residual)
      : Error(std::move(msg)), residual(residual) {}
  double residual;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

/// Convex polyhedron { x : A_eq x = b_eq, G_inq x <= h_inq }.
///
/// Either row family may be empty; `dim` is authoritative so that a
/// fully unconstrained set over R^n is representable.
struct Polytope {
  Matrix A_eq;   // m_eq x n
  Vector b_eq;   // m_eq
  Matrix G_inq;  // m_inq x n
  Vector h_inq;  // m_inq

  Polytope() = default;

  explicit Polytope(Index n)
      : A_eq(0, n), b_eq(0), G_inq(0, n), h_inq(0) {}

  Polytope(Matrix a, Vector b, Matrix g, Vector h)
      : A_eq(std::move(a)), b_eq(std::move(b)), G_inq(std::move(g)), h_inq(std::move(h)) {
    if (A_eq.cols() != G_inq.cols())
      throw DimensionError("Polytope: A_eq and G_inq column counts differ");
    if (b_eq.size() != A_eq.rows())
      throw DimensionError("Polytope: b_eq length does not match A_eq rows");
    if (h_inq.size() != G_inq.rows())
      throw DimensionError("Polytope: h_inq length does not match G_inq rows");
  }

  Index dim() const { return A_eq.cols(); }
  Index num_eq() const { return A_eq.rows(); }
  Index num_inq() const { return G_inq.rows(); }
  bool unconstrained() const { return num_eq() == 0 && num_inq() == 0; }

  /// Axis-aligned box { lo <= x <= hi } as inequality rows.
  static Polytope box(const Vector& lo, const Vector& hi) {
    const Index n = lo.size();
    Matrix g(2 * n, n);
    g << Matrix::Identity(n, n), -Matrix::Identity(n, n);
    Vector h(2 * n);
    h << hi, -lo;
    return Polytope(Matrix(0, n), Vector(0), std::move(g), std::move(h));
  }

  /// Max violation of all rows at x (<= 0 means feasible).
  double violation(const Vector& x) const {
    double v = 0.0;
    if (num_eq() > 0) v = (A_eq * x - b_eq).cwiseAbs().maxCoeff();
    if (num_inq() > 0) v = std::max(v, (G_inq * x - h_inq).maxCoeff());
    return v;
  }

  bool contains(const Vector& x, double tol = 1e-9) const { return violation(x) <= tol; }
};

enum class QpStatus { Optimal, Infeasible, Unbounded, MaxIter };

inline const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::Optimal: return "Optimal";
    case QpStatus::Infeasible: return "Infeasible";
    case QpStatus::Unbounded: return "Unbounded";
    case QpStatus::MaxIter: return "MaxIter";
  }
  return "?";
}

/// Primal-dual solution of a QP or LP over a Polytope.
///
/// `lambda` holds the inequality multipliers (nonnegative at optimality),
/// `nu` the equality multipliers, matching the stationarity convention
///   grad f(x) + G_inq^T lambda + A_eq^T nu = 0.
struct QpSolution {
  Vector x;
  Vector lambda;
  Vector nu;
  QpStatus status = QpStatus::MaxIter;
  double objective = 0.0;
  int iterations = 0;
};

}  // namespace bilevel
