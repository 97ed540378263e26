#pragma once

// Shared test utilities: a portable deterministic RNG, random matrix
// factories, and brute-force oracles kept independent of the library's
// solver paths.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "bilevel/types.hpp"

namespace testutil {

using bilevel::Index;
using bilevel::Matrix;
using bilevel::Polytope;
using bilevel::Vector;

// mt19937_64-backed uniforms with an explicit mapping, so sequences are
// identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    const double u = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
  }

  double gaussian() {
    // Box-Muller on the portable uniforms.
    const double u1 = std::max(uniform(), 1e-300);
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  int integer(int lo, int hi) {  // inclusive bounds
    return lo + static_cast<int>(gen_() % static_cast<std::uint64_t>(hi - lo + 1));
  }

  Vector vector(Index n, double lo = -1.0, double hi = 1.0) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) v(i) = uniform(lo, hi);
    return v;
  }

  Matrix matrix(Index r, Index c, double lo = -1.0, double hi = 1.0) {
    Matrix m(r, c);
    for (Index i = 0; i < r; ++i)
      for (Index j = 0; j < c; ++j) m(i, j) = uniform(lo, hi);
    return m;
  }

  Matrix gaussian_matrix(Index r, Index c) {
    Matrix m(r, c);
    for (Index i = 0; i < r; ++i)
      for (Index j = 0; j < c; ++j) m(i, j) = gaussian();
    return m;
  }

 private:
  std::mt19937_64 gen_;
};

inline Matrix random_orthogonal(Rng& rng, Index n) {
  const Matrix g = rng.gaussian_matrix(n, n);
  Eigen::HouseholderQR<Matrix> qr(g);
  return qr.householderQ() * Matrix::Identity(n, n);
}

inline Matrix random_spd(Rng& rng, Index n, double eig_lo, double eig_hi) {
  const Matrix q = random_orthogonal(rng, n);
  Vector eigs(n);
  for (Index i = 0; i < n; ++i) eigs(i) = rng.uniform(eig_lo, eig_hi);
  return q * eigs.asDiagonal() * q.transpose();
}

// Brute-force LP oracle: enumerate all basic points (equality rows plus
// every (n - m_eq)-subset of inequality rows), keep the feasible ones,
// and return the best objective.
inline double vertex_enumeration_lp(const Vector& c, const Polytope& set) {
  const Index n = set.dim();
  const Index me = set.num_eq();
  const Index mi = set.num_inq();
  const Index k = n - me;
  double best = std::numeric_limits<double>::infinity();

  std::vector<Index> idx(k);
  std::function<void(Index, Index)> rec = [&](Index start, Index depth) {
    if (depth == k) {
      Matrix b(n, n);
      Vector rhs(n);
      if (me > 0) {
        b.topRows(me) = set.A_eq;
        rhs.head(me) = set.b_eq;
      }
      for (Index t = 0; t < k; ++t) {
        b.row(me + t) = set.G_inq.row(idx[t]);
        rhs(me + t) = set.h_inq(idx[t]);
      }
      Eigen::FullPivLU<Matrix> lu(b);
      if (!lu.isInvertible()) return;
      const Vector x = lu.solve(rhs);
      if (set.violation(x) <= 1e-8) best = std::min(best, c.dot(x));
      return;
    }
    for (Index j = start; j < mi; ++j) {
      idx[depth] = j;
      rec(j + 1, depth + 1);
    }
  };
  rec(0, 0);
  return best;
}

// Draws feasible points of a polytope by sampling the equality-constraint
// null space around a feasible center and rejecting inequality violations.
inline std::vector<Vector> sample_polytope(Rng& rng, const Polytope& set, const Vector& center,
                                           double radius, int want, int max_tries = 100000) {
  const Index n = set.dim();
  Matrix null_basis;
  if (set.num_eq() > 0) {
    Eigen::FullPivLU<Matrix> lu(set.A_eq);
    null_basis = lu.kernel();
  } else {
    null_basis = Matrix::Identity(n, n);
  }
  std::vector<Vector> out;
  for (int t = 0; t < max_tries && static_cast<int>(out.size()) < want; ++t) {
    const Vector w = rng.vector(null_basis.cols(), -radius, radius);
    const Vector x = center + null_basis * w;
    if (set.contains(x, 1e-10)) out.push_back(x);
  }
  return out;
}

}  // namespace testutil
