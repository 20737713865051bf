#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <utility>

#include "qp1qec/errors.hpp"
#include "qp1qec/types.hpp"

namespace qp1qec {

/// Adjoint of T with respect to signature inner products on domain and
/// codomain: the unique T# with [Tx, y]_cod = [x, T# y]_dom.
template <typename Scalar, typename Derived>
Matrix<Scalar> indefinite_adjoint(const Eigen::MatrixBase<Derived>& t,
                                  const KreinSignature<Scalar>& j_dom,
                                  const KreinSignature<Scalar>& j_cod) {
  if (t.rows() != j_cod.dim() || t.cols() != j_dom.dim())
    throw DimensionError("operator shape does not match signature dimensions");
  // J_dom^{-1} T' J_cod; signatures are invertible by construction.
  return j_dom.matrix().ldlt().solve(t.transpose() * j_cod.matrix());
}

/// Adjoint when the domain carries the ordinary inner product: T# = T' J_cod.
template <typename Scalar, typename Derived>
Matrix<Scalar> indefinite_adjoint(const Eigen::MatrixBase<Derived>& t,
                                  const KreinSignature<Scalar>& j_cod) {
  if (t.rows() != j_cod.dim())
    throw DimensionError("operator rows do not match codomain signature");
  return t.transpose() * j_cod.matrix();
}

/// Signature-weighted Gram matrix T# T = T' J T, symmetrized so roundoff
/// cannot leave a skew part.
template <typename Scalar, typename Derived>
Matrix<Scalar> gram(const Eigen::MatrixBase<Derived>& t, const KreinSignature<Scalar>& j_cod) {
  if (t.rows() != j_cod.dim())
    throw DimensionError("operator rows do not match codomain signature");
  Matrix<Scalar> g = t.transpose() * j_cod.matrix() * t;
  return ((g + g.transpose()) / Scalar(2)).eval();
}

/// Symmetric eigendecomposition with eigenvalues in descending order.
template <typename Scalar>
SpectralDecomposition<Scalar> sym_eig(const Matrix<Scalar>& s) {
  if (s.rows() != s.cols()) throw DimensionError("sym_eig requires a square matrix");
  Matrix<Scalar> sym = (s + s.transpose()) / Scalar(2);
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(sym);
  if (es.info() != Eigen::Success) throw SingularError("symmetric eigensolver failed");
  SpectralDecomposition<Scalar> out;
  out.eigenvalues = es.eigenvalues().reverse();
  out.eigenvectors = es.eigenvectors().rowwise().reverse();
  return out;
}

/// Positive square root M^{1/2} and inverse root M^{-1/2} of a positive
/// definite matrix. Throws NotPsdError when an eigenvalue falls below
/// -psd_tol * ||M||, SingularError when the smallest eigenvalue is within
/// rank_tol * ||M|| of zero (the inverse root would blow up).
template <typename Scalar>
std::pair<Matrix<Scalar>, Matrix<Scalar>> psd_sqrt_pair(const Matrix<Scalar>& m,
                                                        const ToleranceConfig<Scalar>& tol) {
  const SpectralDecomposition<Scalar> es = sym_eig(m);
  const Scalar norm = es.eigenvalues.size() ? es.eigenvalues.cwiseAbs().maxCoeff() : Scalar(0);
  const Scalar lambda_min = es.eigenvalues.size() ? es.eigenvalues.minCoeff() : Scalar(0);
  if (lambda_min < -tol.psd_tol * norm)
    throw NotPsdError("matrix is not positive semidefinite at psd_tol");
  if (norm == Scalar(0) || lambda_min <= tol.rank_tol * norm)
    throw SingularError("matrix is numerically singular; inverse root undefined");
  Vector<Scalar> roots = es.eigenvalues.cwiseMax(Scalar(0)).cwiseSqrt();
  Matrix<Scalar> half = es.eigenvectors * roots.asDiagonal() * es.eigenvectors.transpose();
  Matrix<Scalar> inv_half =
      es.eigenvectors * roots.cwiseInverse().asDiagonal() * es.eigenvectors.transpose();
  half = (half + half.transpose()) / Scalar(2);
  inv_half = (inv_half + inv_half.transpose()) / Scalar(2);
  return {half, inv_half};
}

/// Moore-Penrose pseudoinverse through the SVD; singular values at or below
/// rank_tol times the largest are treated as zero.
template <typename Scalar>
Matrix<Scalar> moore_penrose(const Matrix<Scalar>& s, Scalar rank_tol) {
  if (s.size() == 0) return Matrix<Scalar>(s.cols(), s.rows());
  Eigen::JacobiSVD<Matrix<Scalar>> svd(s, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const Scalar smax = sv.size() ? sv(0) : Scalar(0);
  if (smax == Scalar(0)) return Matrix<Scalar>::Zero(s.cols(), s.rows());
  Vector<Scalar> inv = Vector<Scalar>::Zero(sv.size());
  for (Index i = 0; i < sv.size(); ++i)
    if (sv(i) > rank_tol * smax) inv(i) = Scalar(1) / sv(i);
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

/// Numerical rank at the same cutoff moore_penrose uses.
template <typename Scalar>
Index numerical_rank(const Matrix<Scalar>& s, Scalar rank_tol) {
  if (s.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix<Scalar>> svd(s);
  const auto& sv = svd.singularValues();
  const Scalar smax = sv.size() ? sv(0) : Scalar(0);
  if (smax == Scalar(0)) return 0;
  Index r = 0;
  for (Index i = 0; i < sv.size(); ++i)
    if (sv(i) > rank_tol * smax) ++r;
  return r;
}

/// Orthonormal basis of the kernel of S, as columns. Returns an n x 0 matrix
/// when S has full column rank.
template <typename Scalar>
Matrix<Scalar> nullspace_basis(const Matrix<Scalar>& s, Scalar rank_tol) {
  const Index n = s.cols();
  if (s.rows() == 0) return Matrix<Scalar>::Identity(n, n);
  Eigen::JacobiSVD<Matrix<Scalar>> svd(s, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const Scalar smax = sv.size() ? sv(0) : Scalar(0);
  Index r = 0;
  if (smax > Scalar(0))
    for (Index i = 0; i < sv.size(); ++i)
      if (sv(i) > rank_tol * smax) ++r;
  return svd.matrixV().rightCols(n - r);
}

/// Orthonormal basis of the orthogonal complement of the kernel of S (the row
/// space), from the same SVD convention as nullspace_basis.
template <typename Scalar>
Matrix<Scalar> row_space_basis(const Matrix<Scalar>& s, Scalar rank_tol) {
  const Index n = s.cols();
  if (s.rows() == 0) return Matrix<Scalar>(n, 0);
  Eigen::JacobiSVD<Matrix<Scalar>> svd(s, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const Scalar smax = sv.size() ? sv(0) : Scalar(0);
  Index r = 0;
  if (smax > Scalar(0))
    for (Index i = 0; i < sv.size(); ++i)
      if (sv(i) > rank_tol * smax) ++r;
  return svd.matrixV().leftCols(r);
}

}  // namespace qp1qec
