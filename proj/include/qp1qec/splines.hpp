#pragma once

#include <Eigen/Dense>

#include "qp1qec/linalg.hpp"
#include "qp1qec/problem.hpp"

namespace qp1qec {

/// Mixed smoothing instance: minimize [Ux, Ux]_{J1} + mu [Wx - w0, Wx - w0]_{J2}
/// subject to the quadratic constraint on V. The weight mu trades the
/// roughness term against the data-fit term and may be negative, making the
/// combined inner product indefinite even when J1 and J2 are definite.
template <typename Scalar>
struct MixedSplinesProblem {
  Matrix<Scalar> u;
  KreinSignature<Scalar> j1;
  Matrix<Scalar> w;
  KreinSignature<Scalar> j2;
  Matrix<Scalar> v;
  KreinSignature<Scalar> je;
  Scalar mu = Scalar(1);
  Vector<Scalar> w0;  ///< data-fit target (the roughness target is zero)
  Vector<Scalar> z0;
};

/// Reduction to the single-operator form by stacking: T = [U; W] with the
/// weight block-diagonal(J1, mu J2) and target (0, w0). The weight carries mu
/// so W's rows keep their physical scale; the returned objective equals the
/// mixed objective identically.
template <typename Scalar>
Problem<Scalar> build_problem(const MixedSplinesProblem<Scalar>& msp,
                              const ToleranceConfig<Scalar>& tol = {}) {
  if (msp.mu == Scalar(0)) throw InvalidProblemError("the mixing weight mu must be nonzero");
  const Index n = msp.u.cols();
  const Index m1 = msp.u.rows();
  const Index m2 = msp.w.rows();
  if (msp.w.cols() != n || msp.v.cols() != n)
    throw DimensionError("U, W, and V must share a domain");
  if (msp.j1.dim() != m1 || msp.j2.dim() != m2)
    throw DimensionError("signature dimensions must match the operator codomains");
  if (msp.w0.size() != m2) throw DimensionError("w0 length must match rows of W");
  if (msp.je.dim() != msp.v.rows() || msp.z0.size() != msp.v.rows())
    throw DimensionError("J_E and z0 must match rows of V");

  Matrix<Scalar> t(m1 + m2, n);
  t.topRows(m1) = msp.u;
  t.bottomRows(m2) = msp.w;
  Matrix<Scalar> weight = Matrix<Scalar>::Zero(m1 + m2, m1 + m2);
  weight.topLeftCorner(m1, m1) = msp.j1.matrix();
  weight.bottomRightCorner(m2, m2) = msp.mu * msp.j2.matrix();
  Vector<Scalar> target = Vector<Scalar>::Zero(m1 + m2);
  target.tail(m2) = msp.w0;
  return Problem<Scalar>{std::move(t), KreinSignature<Scalar>(std::move(weight)), msp.v, msp.je,
                         std::move(target), msp.z0, tol};
}

/// Nullspace dimensions behind the stacking surjectivity test.
struct SurjectivityReport {
  bool surjective = false;
  Index dim_null_u = 0;
  Index dim_null_w = 0;
  Index dim_null_common = 0;
};

/// The stacked operator [U; W] is surjective exactly when the nullspaces of U
/// and W together span the whole domain:
/// dim N(U) + dim N(W) - dim(N(U) cap N(W)) = n.
template <typename Scalar>
SurjectivityReport check_T_surjective(const Matrix<Scalar>& u, const Matrix<Scalar>& w,
                                      const ToleranceConfig<Scalar>& tol = {}) {
  if (u.cols() != w.cols()) throw DimensionError("U and W must share a domain");
  SurjectivityReport rep;
  rep.dim_null_u = nullspace_basis<Scalar>(u, tol.rank_tol).cols();
  rep.dim_null_w = nullspace_basis<Scalar>(w, tol.rank_tol).cols();
  Matrix<Scalar> stacked(u.rows() + w.rows(), u.cols());
  stacked.topRows(u.rows()) = u;
  stacked.bottomRows(w.rows()) = w;
  rep.dim_null_common = nullspace_basis<Scalar>(stacked, tol.rank_tol).cols();
  rep.surjective = rep.dim_null_u + rep.dim_null_w - rep.dim_null_common == u.cols();
  return rep;
}

}  // namespace qp1qec
