#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>

#include "qp1qec/errors.hpp"

namespace qp1qec {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Numerical knobs shared across the solver. All values must be strictly
/// positive; root_tol may not be below machine epsilon.
template <typename Scalar>
struct ToleranceConfig {
  Scalar rank_tol = Scalar(1e-10);      ///< relative singular value cutoff
  Scalar psd_tol = Scalar(1e-8);        ///< scaled eigenvalue band for "numerically PSD"
  Scalar root_tol = Scalar(1e-12);      ///< bisection interval width for scalar roots
  Scalar residual_tol = Scalar(1e-8);   ///< scaled residual bound for verification
  int max_iter = 200;                   ///< iteration cap for scalar searches

  void validate() const {
    const Scalar eps = std::numeric_limits<Scalar>::epsilon();
    if (!(rank_tol > Scalar(0)) || !(psd_tol > Scalar(0)) || !(residual_tol > Scalar(0)))
      throw InvalidProblemError("tolerances must be strictly positive");
    if (!(root_tol >= eps))
      throw InvalidProblemError("root_tol must be at least machine epsilon");
    if (max_iter < 1) throw InvalidProblemError("max_iter must be positive");
  }
};

/// Signature matrix of an indefinite inner product [x, y] = <J x, y>.
/// J is symmetric and invertible; the canonical form is diagonal with
/// entries +1/-1.
template <typename Scalar>
class KreinSignature {
public:
  KreinSignature() = default;

  /// Wraps a full symmetric invertible matrix. Symmetry is required to hold to
  /// machine precision; invertibility is checked through the eigenvalues.
  explicit KreinSignature(Matrix<Scalar> j) : j_(std::move(j)) {
    if (j_.rows() != j_.cols()) throw DimensionError("signature matrix must be square");
    const Scalar scale = j_.template lpNorm<Eigen::Infinity>();
    const Scalar asym = (j_ - j_.transpose()).template lpNorm<Eigen::Infinity>();
    const Scalar eps = std::numeric_limits<Scalar>::epsilon();
    if (asym > Scalar(64) * eps * std::max(Scalar(1), scale))
      throw InvalidProblemError("signature matrix must be symmetric");
    j_ = ((j_ + j_.transpose()) / Scalar(2)).eval();
    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(j_, Eigen::EigenvaluesOnly);
    const Scalar emax = es.eigenvalues().cwiseAbs().maxCoeff();
    const Scalar emin = es.eigenvalues().cwiseAbs().minCoeff();
    if (j_.rows() > 0 && (emax == Scalar(0) || emin <= Scalar(64) * eps * emax))
      throw SingularError("signature matrix must be invertible");
  }

  /// Canonical diagonal signature from a vector of +1/-1 entries.
  static KreinSignature FromSigns(const Vector<Scalar>& signs) {
    for (Index i = 0; i < signs.size(); ++i)
      if (signs[i] != Scalar(1) && signs[i] != Scalar(-1))
        throw InvalidProblemError("diagonal signature entries must be +1 or -1");
    KreinSignature out;
    out.j_ = signs.asDiagonal();
    return out;
  }

  /// Identity signature (the inner product is the ordinary one).
  static KreinSignature Identity(Index n) {
    KreinSignature out;
    out.j_ = Matrix<Scalar>::Identity(n, n);
    return out;
  }

  Index dim() const { return j_.rows(); }
  const Matrix<Scalar>& matrix() const { return j_; }

  /// [x, y] = <J x, y>.
  Scalar product(const Vector<Scalar>& x, const Vector<Scalar>& y) const {
    if (x.size() != dim() || y.size() != dim())
      throw DimensionError("vector size does not match signature dimension");
    return y.dot(j_ * x);
  }

private:
  Matrix<Scalar> j_;
};

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted in
/// descending order and orthonormal eigenvector columns.
template <typename Scalar>
struct SpectralDecomposition {
  Vector<Scalar> eigenvalues;
  Matrix<Scalar> eigenvectors;
};

}  // namespace qp1qec
