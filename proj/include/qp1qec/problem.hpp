#pragma once

#include <Eigen/Dense>

#include "qp1qec/errors.hpp"
#include "qp1qec/linalg.hpp"
#include "qp1qec/pencil.hpp"
#include "qp1qec/types.hpp"

namespace qp1qec {

/// Data of one constrained indefinite least-squares instance:
/// minimize [Tx - w0, Tx - w0] subject to [Vx - z0, Vx - z0] = 0,
/// where both brackets are signature inner products.
template <typename Scalar>
struct Problem {
  Matrix<Scalar> t;           ///< mK x n objective operator
  KreinSignature<Scalar> jk;  ///< codomain signature of T
  Matrix<Scalar> v;           ///< mE x n constraint operator
  KreinSignature<Scalar> je;  ///< codomain signature of V
  Vector<Scalar> w0;          ///< objective target
  Vector<Scalar> z0;          ///< constraint target
  ToleranceConfig<Scalar> tol;

  Index n() const { return t.cols(); }
  Index mk() const { return t.rows(); }
  Index me() const { return v.rows(); }

  /// Shape checks plus the structural requirement that V maps onto its
  /// codomain (full row rank at rank_tol).
  void validate() const {
    tol.validate();
    if (t.cols() != v.cols()) throw DimensionError("T and V must share a domain");
    if (jk.dim() != t.rows()) throw DimensionError("J_K dimension must match rows of T");
    if (je.dim() != v.rows()) throw DimensionError("J_E dimension must match rows of V");
    if (w0.size() != t.rows()) throw DimensionError("w0 length must match rows of T");
    if (z0.size() != v.rows()) throw DimensionError("z0 length must match rows of V");
    if (v.rows() > v.cols()) throw InvalidProblemError("V cannot be surjective: more rows than columns");
    if (numerical_rank<Scalar>(v, tol.rank_tol) != v.rows())
      throw InvalidProblemError("V must be surjective (full row rank)");
  }

  GramPair<Scalar> grams() const {
    return GramPair<Scalar>::FromOperators(t, jk, v, je, tol);
  }

  Scalar objective(const Vector<Scalar>& x) const {
    const Vector<Scalar> r = t * x - w0;
    return jk.product(r, r);
  }

  Scalar constraint(const Vector<Scalar>& x) const {
    const Vector<Scalar> r = v * x - z0;
    return je.product(r, r);
  }
};

/// Residual scaling shared by every verification bound in the solver.
template <typename Scalar>
Scalar problem_scale(const Problem<Scalar>& p, const GramPair<Scalar>& pair) {
  return Scalar(1) + pair.a.norm() + pair.b.norm() + p.w0.norm() + p.z0.norm();
}

/// Minimum-norm feasible base point x0 = V^dagger z0 of the affine constraint
/// level set. Throws RankDeficientError when V drops rank, SingularError when
/// the resulting point fails to satisfy V x0 = z0.
template <typename Scalar>
Vector<Scalar> base_point(const Matrix<Scalar>& v, const Vector<Scalar>& z0,
                          const ToleranceConfig<Scalar>& tol = {}) {
  if (z0.size() != v.rows()) throw DimensionError("z0 length must match rows of V");
  if (numerical_rank<Scalar>(v, tol.rank_tol) != v.rows())
    throw RankDeficientError("constraint operator is rank deficient");
  const Vector<Scalar> x0 = moore_penrose<Scalar>(v, tol.rank_tol) * z0;
  const Scalar sc = Scalar(1) + v.norm() * x0.norm() + z0.norm();
  if ((v * x0 - z0).norm() > tol.residual_tol * sc)
    throw SingularError("base point does not reproduce the constraint target");
  return x0;
}

}  // namespace qp1qec
