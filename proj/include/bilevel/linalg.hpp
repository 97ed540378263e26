#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "bilevel/types.hpp"

namespace bilevel {

constexpr double kSingularPivotRatio = 1e-12;

/// LU factorization that raises SingularMatrixError when the smallest
/// pivot falls below kSingularPivotRatio * ||M||_inf.
class CheckedLu {
 public:
  explicit CheckedLu(const Matrix& m, const std::string& label = "matrix") : lu_(m) {
    if (m.rows() != m.cols()) throw DimensionError(label + ": LU of a non-square matrix");
    if (m.rows() == 0) return;  // empty factorization acts as the identity
    const double scale = std::max(m.cwiseAbs().maxCoeff(), 1.0);
    const double min_pivot = lu_.matrixLU().diagonal().cwiseAbs().minCoeff();
    if (!(min_pivot > kSingularPivotRatio * scale))
      throw SingularMatrixError(label + ": singular to working precision (pivot " +
                                std::to_string(min_pivot) + ")");
  }

  Matrix solve(const Matrix& rhs) const {
    if (lu_.rows() == 0) return Matrix(0, rhs.cols());
    return lu_.solve(rhs);
  }
  Vector solve(const Vector& rhs) const {
    if (lu_.rows() == 0) return Vector(0);
    return lu_.solve(rhs);
  }
  /// Solves M^T y = rhs (columnwise), i.e. returns M^-T rhs.
  Matrix transpose_solve(const Matrix& rhs) const {
    if (lu_.rows() == 0) return Matrix(0, rhs.cols());
    return lu_.transpose().solve(rhs);
  }
  Matrix inverse() const {
    if (lu_.rows() == 0) return Matrix(0, 0);
    return lu_.inverse();
  }

 private:
  Eigen::PartialPivLU<Matrix> lu_;
};

/// The four blocks of the inverse of [[M1, M2], [M3, M4]].
struct BlockInverse {
  Matrix B1, B2, B3, B4;
};

/// Inverts a 2x2-partitioned matrix through the Schur complement of M1:
///   Sh  = M4 - M3 M1^-1 M2
///   B1  = M1^-1 + M1^-1 M2 Sh^-1 M3 M1^-1
///   B2  = -M1^-1 M2 Sh^-1
///   B3  = -Sh^-1 M3 M1^-1
///   B4  = Sh^-1
/// Throws SingularMatrixError for a singular M1 ("SingularM1") or a
/// singular Schur complement ("SingularSchur").
inline BlockInverse block_inverse(const Matrix& m1, const Matrix& m2, const Matrix& m3,
                                  const Matrix& m4) {
  const Index p = m1.rows();
  const Index q = m4.rows();
  if (m1.cols() != p || m4.cols() != q || m2.rows() != p || m2.cols() != q ||
      m3.rows() != q || m3.cols() != p)
    throw DimensionError("block_inverse: blocks are not conformable");

  const CheckedLu lu1(m1, "SingularM1");
  const Matrix m1_inv_m2 = lu1.solve(m2);           // M1^-1 M2
  const Matrix schur = m4 - m3 * m1_inv_m2;         // Sh(M1)
  const CheckedLu lu_s(schur, "SingularSchur");

  BlockInverse out;
  out.B4 = lu_s.inverse();
  const Matrix m3_m1inv = lu1.transpose_solve(Matrix(m3.transpose())).transpose();  // M3 M1^-1
  out.B3 = -lu_s.solve(m3_m1inv);
  out.B2 = -m1_inv_m2 * out.B4;
  out.B1 = lu1.inverse() + m1_inv_m2 * lu_s.solve(m3_m1inv);
  return out;
}

/// Assembles [[M1, M2], [M3, M4]] (test helper for the block inverse).
inline Matrix assemble_blocks(const Matrix& m1, const Matrix& m2, const Matrix& m3,
                              const Matrix& m4) {
  Matrix m(m1.rows() + m3.rows(), m1.cols() + m2.cols());
  m << m1, m2, m3, m4;
  return m;
}

inline double default_fd_step(const Vector& x0) {
  const double scale = x0.size() > 0 ? x0.cwiseAbs().maxCoeff() : 0.0;
  return 1e-5 * std::max(1.0, scale);
}

/// Central-difference Jacobian of f at x0: column j is
/// (f(x0 + h e_j) - f(x0 - h e_j)) / (2h).
inline Matrix finite_difference_jacobian(const std::function<Vector(const Vector&)>& f,
                                         const Vector& x0, double h = 0.0) {
  if (h <= 0.0) h = default_fd_step(x0);
  const Index n = x0.size();
  Vector x = x0;
  Matrix jac;
  for (Index j = 0; j < n; ++j) {
    x(j) = x0(j) + h;
    const Vector fp = f(x);
    x(j) = x0(j) - h;
    const Vector fm = f(x);
    x(j) = x0(j);
    if (j == 0) jac.resize(fp.size(), n);
    if (fp.size() != jac.rows() || fm.size() != jac.rows())
      throw DimensionError("finite_difference_jacobian: f output size changed");
    jac.col(j) = (fp - fm) / (2.0 * h);
  }
  if (n == 0) jac.resize(f(x0).size(), 0);
  return jac;
}

inline double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  return m.jacobiSvd().singularValues()(0);
}

inline double smallest_symmetric_eigenvalue(const Matrix& m) {
  if (m.rows() == 0) return 0.0;
  const Matrix sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

inline bool is_positive_definite(const Matrix& m, double tol = 0.0) {
  if (m.rows() != m.cols()) return false;
  if (m.rows() == 0) return true;
  return smallest_symmetric_eigenvalue(m) > tol;
}

/// Numerical row rank via column-pivoted QR.
inline Index matrix_rank(const Matrix& m, double tol = -1.0) {
  if (m.size() == 0) return 0;
  Eigen::ColPivHouseholderQR<Matrix> qr(m);
  if (tol > 0.0) qr.setThreshold(tol);
  return qr.rank();
}

}  // namespace bilevel
